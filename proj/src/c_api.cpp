#include "mshinf/c_api.h"

#include <cmath>
#include <string>

#include "mshinf/errors.hpp"
#include "mshinf/experiment.hpp"
#include "mshinf/filters.hpp"
#include "mshinf/metrics.hpp"
#include "mshinf/model.hpp"
#include "mshinf/model_io.hpp"
#include "mshinf/riccati.hpp"

struct mshinf_model {
  mshinf::MultiscaleModel model;
};

struct mshinf_signal {
  mshinf::TreeSignal signal;
};

struct mshinf_report {
  mshinf::FilterReport report;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

// Runs the body, translating the library's exception hierarchy into status
// codes and the thread-local message.
template <typename Fn>
mshinf_status guarded(Fn&& body) {
  try {
    body();
    g_last_error.clear();
    return MSHINF_OK;
  } catch (const mshinf::InfeasibleError& e) {
    set_error(e.what());
    return MSHINF_ERR_INFEASIBLE;
  } catch (const mshinf::DimensionError& e) {
    set_error(e.what());
    return MSHINF_ERR_DIMENSION;
  } catch (const mshinf::ParseError& e) {
    set_error(e.what());
    return MSHINF_ERR_PARSE;
  } catch (const mshinf::IoError& e) {
    set_error(e.what());
    return MSHINF_ERR_IO;
  } catch (const mshinf::NumericError& e) {
    set_error(e.what());
    return MSHINF_ERR_NUMERIC;
  } catch (const mshinf::ArgumentError& e) {
    set_error(e.what());
    return MSHINF_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    set_error(e.what());
    return MSHINF_ERR_UNKNOWN;
  } catch (...) {
    set_error("unknown failure");
    return MSHINF_ERR_UNKNOWN;
  }
}

mshinf_status require(bool ok, const char* message) {
  if (ok) return MSHINF_OK;
  set_error(message);
  return MSHINF_ERR_INVALID_ARGUMENT;
}

mshinf::NodeId node_of(int level, int64_t index) {
  return mshinf::NodeId{level, index};
}

}  // namespace

extern "C" {

const char* mshinf_version(void) { return "1.0.0"; }

const char* mshinf_status_name(mshinf_status status) {
  switch (status) {
    case MSHINF_OK: return "ok";
    case MSHINF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MSHINF_ERR_DIMENSION: return "dimension_mismatch";
    case MSHINF_ERR_PARSE: return "parse_error";
    case MSHINF_ERR_IO: return "io_error";
    case MSHINF_ERR_NUMERIC: return "numeric_error";
    case MSHINF_ERR_INFEASIBLE: return "infeasible";
    case MSHINF_ERR_UNKNOWN: return "unknown";
  }
  return "unknown";
}

const char* mshinf_last_error(void) { return g_last_error.c_str(); }

mshinf_status mshinf_model_load(const char* path, mshinf_model** out) {
  if (auto st = require(path && out, "model_load: path and out are required"))
    return st;
  return guarded([&] {
    mshinf::ModelFile file = mshinf::load_model_file(path);
    *out = new mshinf_model{std::move(file.model)};
  });
}

mshinf_status mshinf_model_uniform_scalar(int depth, int arity, double sigma_w2,
                                          double sigma_v2, double gamma,
                                          double prior_mean, double prior_var,
                                          mshinf_model** out) {
  if (auto st = require(out != nullptr, "model_uniform_scalar: out is required"))
    return st;
  return guarded([&] {
    if (sigma_w2 <= 0.0 || sigma_v2 <= 0.0)
      throw mshinf::ArgumentError("noise variances must be positive");
    mshinf::Dims dims{1, 1, 1, 1};
    mshinf::NodeParams np = mshinf::NodeParams::identity(dims);
    np.B(0, 0) = std::sqrt(sigma_w2);
    np.R(0, 0) = sigma_v2;
    mshinf::GameWeights w;
    w.gamma = gamma;
    w.prior_mean = Eigen::VectorXd::Constant(1, prior_mean);
    w.prior_cov = Eigen::MatrixXd::Constant(1, 1, prior_var);
    *out = new mshinf_model{mshinf::MultiscaleModel::uniform(
        mshinf::TreeTopology(depth, arity), dims, np, w)};
  });
}

void mshinf_model_free(mshinf_model* model) { delete model; }

int mshinf_model_depth(const mshinf_model* model) {
  return model ? model->model.topology().depth() : -1;
}

int mshinf_model_arity(const mshinf_model* model) {
  return model ? model->model.topology().arity() : -1;
}

int mshinf_model_state_dim(const mshinf_model* model) {
  return model ? model->model.dims().n : -1;
}

int64_t mshinf_model_node_count(const mshinf_model* model) {
  return model ? model->model.topology().node_count() : -1;
}

double mshinf_model_gamma(const mshinf_model* model) {
  return model ? model->model.weights().gamma : -1.0;
}

mshinf_status mshinf_sweep_feasible(const mshinf_model* model, double gamma,
                                    int* feasible, int* fail_level,
                                    int64_t* fail_index) {
  if (auto st = require(model != nullptr, "sweep_feasible: model is required"))
    return st;
  return guarded([&] {
    const mshinf::RiccatiState state = mshinf::sweep(model->model, gamma);
    if (feasible) *feasible = state.feasible ? 1 : 0;
    if (fail_level)
      *fail_level = state.first_failure ? state.first_failure->level : -1;
    if (fail_index)
      *fail_index = state.first_failure ? state.first_failure->index : -1;
  });
}

mshinf_status mshinf_max_gamma(const mshinf_model* model, double gamma_lo,
                               double gamma_hi, double tol, double* out) {
  if (auto st = require(model && out, "max_gamma: model and out are required"))
    return st;
  return guarded(
      [&] { *out = mshinf::max_gamma(model->model, gamma_lo, gamma_hi, tol); });
}

mshinf_status mshinf_simulate(const mshinf_model* model,
                              const double* root_state, size_t root_len,
                              double w_var, double v_var, uint64_t seed,
                              mshinf_signal** out) {
  if (auto st = require(model && root_state && out,
                        "simulate: model, root_state and out are required"))
    return st;
  return guarded([&] {
    Eigen::VectorXd root(static_cast<Eigen::Index>(root_len));
    for (size_t i = 0; i < root_len; ++i)
      root[static_cast<Eigen::Index>(i)] = root_state[i];
    *out = new mshinf_signal{mshinf::simulate(
        model->model, root, mshinf::NoiseSpec{w_var, v_var}, seed)};
  });
}

mshinf_status mshinf_adversarial(const mshinf_model* model,
                                 double power_budget, uint64_t seed,
                                 mshinf_signal** out) {
  if (auto st = require(model && out, "adversarial: model and out are required"))
    return st;
  return guarded([&] {
    *out = new mshinf_signal{
        mshinf::adversarial_disturbance(model->model, power_budget, seed)};
  });
}

mshinf_status mshinf_signal_remove_stage(mshinf_signal* signal, int level) {
  if (auto st = require(signal != nullptr, "remove_stage: signal is required"))
    return st;
  return guarded([&] { mshinf::remove_observations(signal->signal, {level}); });
}

void mshinf_signal_free(mshinf_signal* signal) { delete signal; }

mshinf_status mshinf_signal_state(const mshinf_signal* signal, int level,
                                  int64_t index, double* out, size_t out_len) {
  if (auto st = require(signal && out, "signal_state: signal and out are required"))
    return st;
  return guarded([&] {
    const auto& sig = signal->signal;
    const Eigen::VectorXd& x =
        sig.x[static_cast<std::size_t>(sig.topology.flat_index(node_of(level, index)))];
    if (static_cast<size_t>(x.size()) != out_len)
      throw mshinf::DimensionError("signal_state: out length must equal n");
    for (Eigen::Index i = 0; i < x.size(); ++i)
      out[static_cast<size_t>(i)] = x[i];
  });
}

mshinf_status mshinf_run_filter(const mshinf_model* model,
                                const mshinf_signal* signal,
                                mshinf_filter_kind kind, mshinf_report** out) {
  if (auto st = require(model && signal && out,
                        "run_filter: model, signal and out are required"))
    return st;
  return guarded([&] {
    mshinf::FilterKind fk;
    switch (kind) {
      case MSHINF_FILTER_PREDICTOR_HINF:
        fk = mshinf::FilterKind::PredictorHinf;
        break;
      case MSHINF_FILTER_CURRENT_HINF:
        fk = mshinf::FilterKind::CurrentHinf;
        break;
      case MSHINF_FILTER_KALMAN:
        fk = mshinf::FilterKind::Kalman;
        break;
      default:
        throw mshinf::ArgumentError("run_filter: unknown filter kind");
    }
    *out = new mshinf_report{
        mshinf::run_filter(model->model, signal->signal, fk)};
  });
}

void mshinf_report_free(mshinf_report* report) { delete report; }

mshinf_status mshinf_report_estimate(const mshinf_report* report, int level,
                                     int64_t index, double* out,
                                     size_t out_len) {
  if (auto st = require(report && out,
                        "report_estimate: report and out are required"))
    return st;
  return guarded([&] {
    const auto& rep = report->report;
    const Eigen::VectorXd& xhat = rep.xhat(node_of(level, index));
    if (static_cast<size_t>(xhat.size()) != out_len)
      throw mshinf::DimensionError("report_estimate: out length must equal n");
    for (Eigen::Index i = 0; i < xhat.size(); ++i)
      out[static_cast<size_t>(i)] = xhat[i];
  });
}

mshinf_status mshinf_report_cov_trace(const mshinf_report* report, double* out,
                                      size_t out_len) {
  if (auto st = require(report && out,
                        "report_cov_trace: report and out are required"))
    return st;
  return guarded([&] {
    const auto& trend = report->report.per_level_cov_trace;
    if (trend.size() != out_len)
      throw mshinf::DimensionError(
          "report_cov_trace: out length must equal depth + 1");
    for (std::size_t i = 0; i < trend.size(); ++i) out[i] = trend[i];
  });
}

mshinf_status mshinf_estimation_cost(const mshinf_model* model,
                                     const mshinf_signal* signal,
                                     const mshinf_report* report, double* out) {
  if (auto st = require(model && signal && report && out,
                        "estimation_cost: all arguments are required"))
    return st;
  return guarded([&] {
    *out = mshinf::estimation_cost(signal->signal, report->report, model->model);
  });
}

mshinf_status mshinf_game_objective(const mshinf_model* model,
                                    const mshinf_signal* signal,
                                    const mshinf_report* report, double gamma,
                                    double* out) {
  if (auto st = require(model && signal && report && out,
                        "game_objective: all arguments are required"))
    return st;
  return guarded([&] {
    *out = mshinf::game_objective(signal->signal, report->report, model->model,
                                  gamma);
  });
}

mshinf_status mshinf_run_experiment(const char* config_path,
                                    const char* expected_scenario,
                                    const char* output_dir_override,
                                    int64_t seed_override,
                                    const char* filter_override,
                                    const char* gamma_override) {
  if (auto st = require(config_path != nullptr,
                        "run_experiment: config_path is required"))
    return st;
  return guarded([&] {
    mshinf::ExperimentConfig config =
        mshinf::load_experiment_config(config_path);
    if (expected_scenario && config.scenario != expected_scenario)
      throw mshinf::ArgumentError(
          "config declares scenario '" + config.scenario +
          "' but the command requested '" + expected_scenario + "'");
    mshinf::RunOverrides overrides;
    if (output_dir_override) overrides.output_dir = output_dir_override;
    if (seed_override >= 0)
      overrides.seed = static_cast<std::uint64_t>(seed_override);
    if (filter_override) overrides.filter = filter_override;
    if (gamma_override) overrides.gamma = gamma_override;
    mshinf::run_experiment(config, overrides);
  });
}

}  // extern "C"
