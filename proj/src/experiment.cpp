#include "mshinf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mshinf/errors.hpp"
#include "mshinf/filters.hpp"
#include "mshinf/image_io.hpp"
#include "mshinf/metrics.hpp"
#include "mshinf/pyramid.hpp"
#include "mshinf/riccati.hpp"

namespace fs = std::filesystem;

namespace mshinf {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kDefaultSigmaW2 = 0.01;
constexpr double kDefaultSigmaV2 = 0.02;
constexpr double kAutoGammaSafety = 0.9;
constexpr double kConfidenceScale = 1.04;  // two-sided 70% Gaussian band

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_number_list(const std::string& text,
                                      const std::string& key,
                                      const std::string& origin) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ParseError(origin + ": key '" + key + "' has a malformed number '" +
                       token + "'");
    }
  }
  return out;
}

// Staged artifact writes: everything is kept in memory, written to
// temporaries, and renamed into place only when the full set is ready.
class ArtifactSet {
 public:
  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void note(const std::string& line) { notes_.push_back(line); }

  bool has(const std::string& name) const {
    for (const auto& [n, c] : files_)
      if (n == name) return true;
    return false;
  }

  // Header lines describe the resolved run configuration; the manifest lists
  // every artifact with its content hash.
  void commit(const std::string& output_dir,
              const std::vector<std::string>& header) {
    fs::create_directories(output_dir);

    std::ostringstream manifest;
    for (const std::string& line : header) manifest << line << '\n';
    for (const std::string& line : notes_) manifest << "note = " << line << '\n';
    for (const auto& [name, content] : files_) {
      char hash[32];
      std::snprintf(hash, sizeof hash, "%016llx",
                    static_cast<unsigned long long>(fnv1a64(content)));
      manifest << "artifact = " << name << " fnv1a64=" << hash
               << " size=" << content.size() << '\n';
    }
    files_.emplace_back("manifest.txt", manifest.str());

    std::vector<fs::path> staged;
    try {
      for (const auto& [name, content] : files_) {
        const fs::path tmp = fs::path(output_dir) / (".tmp." + name);
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw IoError("failed while writing '" + tmp.string() + "'");
        staged.push_back(tmp);
      }
      for (std::size_t i = 0; i < files_.size(); ++i)
        fs::rename(staged[i], fs::path(output_dir) / files_[i].first);
    } catch (...) {
      for (const fs::path& tmp : staged) {
        std::error_code ec;
        fs::remove(tmp, ec);
      }
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
  std::vector<std::string> notes_;
};

// Everything a scenario needs after option resolution.
struct ResolvedRun {
  ExperimentConfig config;
  ModelFile file;
  double sigma_w2 = kDefaultSigmaW2;
  double sigma_v2 = kDefaultSigmaV2;
  std::uint64_t seed = 0;
  std::vector<int> missing_stages;
  double gamma = 1.0;
  std::string gamma_source;  // "config", "model", or the auto search trace
  FilterKind hinf_kind = FilterKind::CurrentHinf;
  bool run_predictor = false;
  bool run_current = false;
  bool run_kalman = true;

  ResolvedRun(ExperimentConfig c, ModelFile f)
      : config(std::move(c)), file(std::move(f)) {}
};

// Scales the file's structural matrices by the configured noise magnitudes:
// B picks up sqrt(sigma_w2) so the filter sees disturbance power
// sigma_w2 * B B', and R picks up sigma_v2.
MultiscaleModel effective_model(const ModelFile& file, double sigma_w2,
                                double sigma_v2, double gamma) {
  const MultiscaleModel& base = file.model;
  const TreeTopology& topo = base.topology();
  std::vector<NodeParams> params;
  params.reserve(static_cast<std::size_t>(topo.node_count()));
  const double b_scale = std::sqrt(sigma_w2);
  for (const NodeId& node : topo.level_order()) {
    NodeParams np = base.params(node);
    np.B *= b_scale;
    np.R *= sigma_v2;
    params.push_back(std::move(np));
  }
  GameWeights weights = base.weights();
  weights.gamma = gamma;
  return MultiscaleModel(topo, base.dims(), std::move(params), weights);
}

double auto_gamma(const ModelFile& file, double sigma_w2, double sigma_v2,
                  std::string& trace) {
  const MultiscaleModel probe = effective_model(file, sigma_w2, sigma_v2, 1.0);
  double lo = 1e-9;
  if (!sweep(probe, lo).feasible)
    throw NumericError(
        "auto gamma: the recursion is infeasible even at gamma = 1e-9");
  double hi = 1.0;
  int doublings = 0;
  while (sweep(probe, hi).feasible) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60)
      throw NumericError("auto gamma: no infeasible upper bracket below 2^60");
  }
  const double sup = max_gamma(probe, lo, hi, 1e-6 * hi);
  const double chosen = kAutoGammaSafety * sup;
  trace = "auto (" + format_g9(kAutoGammaSafety) + " * max_gamma " +
          format_g9(sup) + ")";
  return chosen;
}

ResolvedRun resolve(const ExperimentConfig& base, const RunOverrides& ov) {
  ExperimentConfig config = base;
  if (ov.output_dir) config.output_dir = *ov.output_dir;
  if (ov.seed) config.seed = *ov.seed;
  if (ov.filter) config.filter = *ov.filter;
  if (ov.gamma) config.gamma = *ov.gamma;

  if (config.output_dir.empty())
    throw ArgumentError(
        "no output directory: set 'output' in the config or pass --output");

  ModelFile file = load_model_file(config.model_path);
  ResolvedRun run(std::move(config), std::move(file));
  run.sigma_w2 = run.config.sigma_w2.value_or(
      run.file.sigma_w2.value_or(kDefaultSigmaW2));
  run.sigma_v2 = run.config.sigma_v2.value_or(
      run.file.sigma_v2.value_or(kDefaultSigmaV2));
  if (run.sigma_w2 <= 0.0 || run.sigma_v2 <= 0.0)
    throw ArgumentError("noise variances must be positive");
  run.seed = run.config.seed.value_or(run.file.seed.value_or(0));
  run.missing_stages =
      run.config.missing_stages.value_or(run.file.missing_stages);

  const std::string& f = run.config.filter;
  if (f == "all") {
    run.run_predictor = run.run_current = true;
    run.hinf_kind = FilterKind::CurrentHinf;
  } else if (f == "predictor_hinf") {
    run.run_predictor = true;
    run.hinf_kind = FilterKind::PredictorHinf;
  } else if (f == "current_hinf") {
    run.run_current = true;
    run.hinf_kind = FilterKind::CurrentHinf;
  } else if (f == "kalman") {
    // baseline only
  } else {
    throw ArgumentError("unknown filter '" + f +
                        "' (expected predictor_hinf, current_hinf, kalman or "
                        "all)");
  }

  if (run.config.gamma && *run.config.gamma == "auto") {
    run.gamma = auto_gamma(run.file, run.sigma_w2, run.sigma_v2,
                           run.gamma_source);
  } else if (run.config.gamma) {
    try {
      std::size_t used = 0;
      run.gamma = std::stod(*run.config.gamma, &used);
      if (used != run.config.gamma->size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ArgumentError("gamma must be a number or 'auto', got '" +
                          *run.config.gamma + "'");
    }
    run.gamma_source = "config";
  } else {
    run.gamma = run.file.model.weights().gamma;
    run.gamma_source = "model";
  }
  if (run.gamma <= 0.0) throw ArgumentError("gamma must be positive");
  return run;
}

std::vector<std::string> manifest_header(const ResolvedRun& run) {
  std::vector<std::string> h;
  h.push_back("scenario = " + run.config.scenario);
  h.push_back("model = " + run.config.model_path);
  h.push_back("filter = " + run.config.filter);
  h.push_back("gamma = " + format_g9(run.gamma));
  h.push_back("gamma_source = " + run.gamma_source);
  h.push_back("sigma_w2 = " + format_g9(run.sigma_w2));
  h.push_back("sigma_v2 = " + format_g9(run.sigma_v2));
  h.push_back("seed = " + std::to_string(run.seed));
  std::string stages;
  for (int s : run.missing_stages)
    stages += (stages.empty() ? "" : " ") + std::to_string(s);
  h.push_back("missing_stages = " + (stages.empty() ? "(none)" : stages));
  return h;
}

struct FilterOutputs {
  std::optional<FilterReport> predictor;
  std::optional<FilterReport> current;
  std::optional<FilterReport> kalman;

  const FilterReport* hinf(FilterKind kind) const {
    if (kind == FilterKind::PredictorHinf)
      return predictor ? &*predictor : nullptr;
    return current ? &*current : nullptr;
  }
};

FilterOutputs run_selected(const MultiscaleModel& model,
                           const TreeSignal& signal, const ResolvedRun& run) {
  FilterOutputs out;
  if (run.run_predictor) out.predictor = run_predictor_hinf(model, signal);
  if (run.run_current) out.current = run_current_hinf(model, signal);
  if (run.run_kalman) out.kalman = run_kalman(model, signal);
  return out;
}

// Per-level SNR with nan (rather than the library's error) for levels whose
// truth carries no energy, e.g. a zero prior mean at the root.
std::vector<double> snr_db_guarded(
    const std::vector<std::vector<double>>& truth,
    const std::vector<std::vector<double>>& estimate) {
  std::vector<double> out(truth.size(), kNan);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    double signal = 0.0;
    double error = 0.0;
    for (std::size_t i = 0; i < truth[k].size(); ++i) {
      signal += truth[k][i] * truth[k][i];
      const double e = truth[k][i] - estimate[k][i];
      error += e * e;
    }
    if (signal == 0.0) continue;
    out[k] = error == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(signal / error);
  }
  return out;
}

std::vector<MetricsRow> build_metrics_rows(const MultiscaleModel& model,
                                           const TreeSignal& signal,
                                           const FilterReport* hinf,
                                           const FilterReport* kalman) {
  const int depth = model.topology().depth();
  std::vector<MetricsRow> rows(static_cast<std::size_t>(depth) + 1);
  const auto truth = per_level_states(signal);
  for (int k = 0; k <= depth; ++k) {
    rows[static_cast<std::size_t>(k)].level = k;
    rows[static_cast<std::size_t>(k)].snr_hinf_db = kNan;
    rows[static_cast<std::size_t>(k)].snr_kalman_db = kNan;
    rows[static_cast<std::size_t>(k)].cov_trace_hinf = kNan;
    rows[static_cast<std::size_t>(k)].cov_trace_kalman = kNan;
    rows[static_cast<std::size_t>(k)].cost_hinf = kNan;
    rows[static_cast<std::size_t>(k)].cost_kalman = kNan;
  }
  if (hinf) {
    const auto snr = snr_db_guarded(truth, per_level_states(*hinf));
    const auto cost = estimation_cost_per_level(signal, *hinf, model);
    const auto trend = covariance_trend(*hinf);
    for (int k = 0; k <= depth; ++k) {
      rows[static_cast<std::size_t>(k)].snr_hinf_db = snr[static_cast<std::size_t>(k)];
      rows[static_cast<std::size_t>(k)].cov_trace_hinf = trend[static_cast<std::size_t>(k)];
      rows[static_cast<std::size_t>(k)].cost_hinf = cost[static_cast<std::size_t>(k)];
    }
  }
  if (kalman) {
    const auto snr = snr_db_guarded(truth, per_level_states(*kalman));
    const auto cost = estimation_cost_per_level(signal, *kalman, model);
    const auto trend = covariance_trend(*kalman);
    for (int k = 0; k <= depth; ++k) {
      rows[static_cast<std::size_t>(k)].snr_kalman_db = snr[static_cast<std::size_t>(k)];
      rows[static_cast<std::size_t>(k)].cov_trace_kalman = trend[static_cast<std::size_t>(k)];
      rows[static_cast<std::size_t>(k)].cost_kalman = cost[static_cast<std::size_t>(k)];
    }
  }
  return rows;
}

void log_game_objective(ArtifactSet& artifacts, const MultiscaleModel& model,
                        const TreeSignal& signal, const FilterOutputs& outputs,
                        double gamma) {
  auto log_one = [&](const char* name, const std::optional<FilterReport>& rep) {
    if (!rep) return;
    const double j = game_objective(signal, *rep, model, gamma);
    artifacts.note(std::string("game_objective_") + name + " = " +
                   format_g9(j) + " (attenuation bound 1/gamma = " +
                   format_g9(1.0 / gamma) + ", satisfied on this realization: " +
                   (j < 1.0 / gamma ? "yes" : "no") + ")");
  };
  log_one("predictor_hinf", outputs.predictor);
  log_one("current_hinf", outputs.current);
  log_one("kalman", outputs.kalman);
}

std::string estimates_csv(const MultiscaleModel& model,
                          const TreeSignal& signal,
                          const FilterOutputs& outputs) {
  std::ostringstream out;
  out << "level,index,truth,y";
  const struct {
    const char* name;
    const std::optional<FilterReport>& rep;
  } columns[] = {{"predictor_hinf", outputs.predictor},
                 {"current_hinf", outputs.current},
                 {"kalman", outputs.kalman}};
  for (const auto& col : columns)
    out << ",xhat_" << col.name << ",band_lo_" << col.name << ",band_hi_"
        << col.name;
  out << '\n';

  const TreeTopology& topo = model.topology();
  const bool scalar = model.dims().n == 1;
  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    out << node.level << ',' << node.index << ','
        << format_g9(scalar ? signal.x[idx](0) : signal.x[idx].norm()) << ','
        << (signal.y[idx] ? format_g9(scalar ? (*signal.y[idx])(0)
                                             : signal.y[idx]->norm())
                          : "nan");
    for (const auto& col : columns) {
      if (!col.rep) {
        out << ",nan,nan,nan";
        continue;
      }
      const double xhat = scalar ? col.rep->state.xhat[idx](0)
                                 : col.rep->state.xhat[idx].norm();
      const double band =
          kConfidenceScale * std::sqrt(std::max(0.0, col.rep->state.P[idx].trace()));
      out << ',' << format_g9(xhat) << ',' << format_g9(xhat - band) << ','
          << format_g9(xhat + band);
    }
    out << '\n';
  }
  return out.str();
}

void require_scalar_dims(const MultiscaleModel& model, const char* scenario) {
  const Dims& d = model.dims();
  if (d.n != 1 || d.p != 1 || d.q != 1 || d.r != 1)
    throw ArgumentError(std::string(scenario) +
                        " requires a scalar model (n = p = q = r = 1)");
}

// ---------------------------------------------------------------------------
// step1d

void run_step1d(const ResolvedRun& run, ArtifactSet& artifacts) {
  const MultiscaleModel model =
      effective_model(run.file, run.sigma_w2, run.sigma_v2, run.gamma);
  require_scalar_dims(model, "step1d");
  if (model.topology().arity() != 2)
    throw ArgumentError("step1d requires an arity-2 model");

  const DyadicStack stack =
      step_signal(model.topology().depth(), run.config.step_breakpoints,
                  run.config.step_values);
  const double v_var = model.params(NodeId{0, 1}).R(0, 0);
  const TreeSignal signal = dyadic_to_observations(
      stack, model, NoiseSpec{1.0, v_var}, run.seed, run.missing_stages);

  const FilterOutputs outputs = run_selected(model, signal, run);
  const FilterReport* hinf = outputs.hinf(run.hinf_kind);
  const FilterReport* kalman = outputs.kalman ? &*outputs.kalman : nullptr;

  artifacts.add("metrics.csv",
                metrics_csv(build_metrics_rows(model, signal, hinf, kalman)));
  artifacts.add("estimates.csv", estimates_csv(model, signal, outputs));
  log_game_objective(artifacts, model, signal, outputs, run.gamma);
}

// ---------------------------------------------------------------------------
// image2d

void run_image2d(const ResolvedRun& run, ArtifactSet& artifacts) {
  if (run.config.image_path.empty())
    throw ArgumentError("image2d requires an 'image' path in the config");
  const MultiscaleModel model =
      effective_model(run.file, run.sigma_w2, run.sigma_v2, run.gamma);
  require_scalar_dims(model, "image2d");
  if (model.topology().arity() != 4)
    throw ArgumentError("image2d requires an arity-4 (quadtree) model");

  const bool rgb = is_ppm_file(run.config.image_path);
  std::vector<ImagePlane> channels;
  if (rgb) {
    channels = read_ppm(run.config.image_path).channels;
  } else {
    channels.push_back(read_pgm(run.config.image_path));
  }
  const int depth = model.topology().depth();
  if ((1 << depth) != channels[0].side)
    throw ArgumentError(
        "model depth " + std::to_string(depth) + " addresses a " +
        std::to_string(1 << depth) + "-sided image but the input is " +
        std::to_string(channels[0].side) + "-sided");

  struct ChannelRun {
    TreeSignal signal;
    FilterOutputs outputs;
  };
  std::vector<ChannelRun> runs;
  const double v_var = model.params(NodeId{0, 1}).R(0, 0);
  for (std::size_t ch = 0; ch < channels.size(); ++ch) {
    const PyramidStack stack = build_pyramid(channels[ch]);
    TreeSignal signal =
        pyramid_to_observations(stack, model, NoiseSpec{1.0, v_var},
                                run.seed + ch, run.missing_stages);
    FilterOutputs outputs = run_selected(model, signal, run);
    runs.push_back(ChannelRun{std::move(signal), std::move(outputs)});
  }

  // Per-level metrics aggregated over channels (energies add up).
  const FilterReport* hinf0 = runs[0].outputs.hinf(run.hinf_kind);
  const FilterReport* kalman0 =
      runs[0].outputs.kalman ? &*runs[0].outputs.kalman : nullptr;
  std::vector<MetricsRow> rows(static_cast<std::size_t>(depth) + 1);
  {
    auto energy_rows = [&](auto getter) {
      std::vector<double> signal_e(static_cast<std::size_t>(depth) + 1, 0.0);
      std::vector<double> error_e(static_cast<std::size_t>(depth) + 1, 0.0);
      std::vector<double> cost(static_cast<std::size_t>(depth) + 1, 0.0);
      for (const ChannelRun& cr : runs) {
        const FilterReport* rep = getter(cr.outputs);
        if (!rep) return std::tuple(signal_e, error_e, cost, false);
        const auto truth = per_level_states(cr.signal);
        const auto est = per_level_states(*rep);
        const auto c = estimation_cost_per_level(cr.signal, *rep,
                                                 model);
        for (int k = 0; k <= depth; ++k) {
          const std::size_t kk = static_cast<std::size_t>(k);
          for (std::size_t i = 0; i < truth[kk].size(); ++i) {
            signal_e[kk] += truth[kk][i] * truth[kk][i];
            const double e = truth[kk][i] - est[kk][i];
            error_e[kk] += e * e;
          }
          cost[kk] += c[kk];
        }
      }
      return std::tuple(signal_e, error_e, cost, true);
    };
    auto to_db = [](double s, double e) {
      if (s == 0.0) return kNan;
      return e == 0.0 ? std::numeric_limits<double>::infinity()
                      : 10.0 * std::log10(s / e);
    };
    const auto [hs, he, hc, have_h] =
        energy_rows([&](const FilterOutputs& o) { return o.hinf(run.hinf_kind); });
    const auto [ks, ke, kc, have_k] = energy_rows(
        [](const FilterOutputs& o) { return o.kalman ? &*o.kalman : nullptr; });
    const auto h_trend = hinf0 ? covariance_trend(*hinf0) : std::vector<double>();
    const auto k_trend = kalman0 ? covariance_trend(*kalman0) : std::vector<double>();
    for (int k = 0; k <= depth; ++k) {
      const std::size_t kk = static_cast<std::size_t>(k);
      rows[kk].level = k;
      rows[kk].snr_hinf_db = have_h ? to_db(hs[kk], he[kk]) : kNan;
      rows[kk].cost_hinf = have_h ? hc[kk] : kNan;
      rows[kk].cov_trace_hinf = hinf0 ? h_trend[kk] : kNan;
      rows[kk].snr_kalman_db = have_k ? to_db(ks[kk], ke[kk]) : kNan;
      rows[kk].cost_kalman = have_k ? kc[kk] : kNan;
      rows[kk].cov_trace_kalman = kalman0 ? k_trend[kk] : kNan;
    }
  }
  artifacts.add("metrics.csv", metrics_csv(rows));

  // The noisy finest-level observations, then the restored image per filter
  // and level.
  auto observed_plane = [&](int level) {
    std::vector<ImagePlane> planes;
    for (const ChannelRun& cr : runs) {
      const int side = 1 << level;
      std::vector<double> samples(static_cast<std::size_t>(side) * side, 0.0);
      for (std::int64_t m = 1; m <= model.topology().nodes_at(level); ++m) {
        int row = 0, col = 0;
        morton_decode(level, m, row, col);
        const auto idx = model.topology().flat_index(NodeId{level, m});
        const double value = cr.signal.y[idx] ? (*cr.signal.y[idx])(0) : 0.0;
        samples[static_cast<std::size_t>(row) * side + col] =
            std::clamp(value, 0.0, 1.0);
      }
      planes.push_back(ImagePlane(side, std::move(samples)));
    }
    return planes;
  };
  auto add_image = [&](const std::string& name,
                       const std::vector<ImagePlane>& planes) {
    if (rgb)
      artifacts.add(name + ".ppm", encode_ppm(RgbImage{planes}));
    else
      artifacts.add(name + ".pgm", encode_pgm(planes[0]));
  };
  add_image("observed_L" + std::to_string(depth), observed_plane(depth));

  auto add_restored = [&](const char* name, auto getter) {
    if (!getter(runs[0].outputs)) return;
    for (int k = 0; k <= depth; ++k) {
      std::vector<ImagePlane> planes;
      for (const ChannelRun& cr : runs)
        planes.push_back(estimates_to_image(*getter(cr.outputs), k));
      add_image("restored_" + std::string(name) + "_L" + std::to_string(k),
                planes);
    }
  };
  add_restored("predictor_hinf", [](const FilterOutputs& o) {
    return o.predictor ? &*o.predictor : nullptr;
  });
  add_restored("current_hinf", [](const FilterOutputs& o) {
    return o.current ? &*o.current : nullptr;
  });
  add_restored("kalman", [](const FilterOutputs& o) {
    return o.kalman ? &*o.kalman : nullptr;
  });

  for (std::size_t ch = 0; ch < runs.size(); ++ch)
    log_game_objective(artifacts, model, runs[ch].signal, runs[ch].outputs,
                       run.gamma);
}

// ---------------------------------------------------------------------------
// gamma_sweep

void run_gamma_sweep(const ResolvedRun& run, ArtifactSet& artifacts) {
  if (run.config.gamma_grid.empty())
    throw ArgumentError("gamma_sweep requires a non-empty 'gamma_grid'");

  std::vector<double> grid = run.config.gamma_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> unique_grid;
  for (double g : grid) {
    if (g <= 0.0) throw ArgumentError("gamma_grid entries must be positive");
    if (!unique_grid.empty() && g == unique_grid.back()) {
      std::cerr << "warning: duplicate gamma " << format_g9(g)
                << " removed from the grid\n";
      artifacts.note("duplicate gamma " + format_g9(g) + " removed");
      continue;
    }
    unique_grid.push_back(g);
  }

  // The simulated data does not depend on gamma; draw it once.
  const MultiscaleModel base_model =
      effective_model(run.file, run.sigma_w2, run.sigma_v2, 1.0);
  TreeSignal signal = simulate(base_model, base_model.weights().prior_mean,
                               NoiseSpec{1.0, 1.0}, run.seed);
  remove_observations(signal, run.missing_stages);

  std::ostringstream csv;
  csv << "gamma,feasible,total_cost,min_snr_db,is_max_gamma\n";
  std::vector<std::uint8_t> feasible_flags;
  auto emit_row = [&](double g, bool feasible, double cost, double snr,
                      bool is_max) {
    csv << format_g9(g) << ',' << (feasible ? 1 : 0) << ','
        << format_g9(cost) << ',' << format_g9(snr) << ',' << (is_max ? 1 : 0)
        << '\n';
  };

  auto evaluate_gamma = [&](double g, bool emit, bool is_max) {
    const bool feasible = sweep(base_model, g).feasible;
    double cost = kNan;
    double min_snr = kNan;
    if (feasible) {
      const MultiscaleModel model =
          effective_model(run.file, run.sigma_w2, run.sigma_v2, g);
      try {
        const FilterReport report = run_filter(
            model, signal,
            run.config.filter == "kalman" ? FilterKind::Kalman : run.hinf_kind);
        cost = estimation_cost(signal, report, model);
        const auto snr = snr_db_guarded(per_level_states(signal),
                                        per_level_states(report));
        min_snr = kNan;
        for (double s : snr)
          if (!std::isnan(s)) min_snr = std::isnan(min_snr) ? s : std::min(min_snr, s);
      } catch (const InfeasibleError& e) {
        artifacts.note("gamma " + format_g9(g) +
                       ": selected filter infeasible although the recursion "
                       "is (" + e.what() + ")");
      }
    }
    if (emit) emit_row(g, feasible, cost, min_snr, is_max);
    return feasible;
  };

  for (double g : unique_grid)
    feasible_flags.push_back(evaluate_gamma(g, true, false) ? 1 : 0);

  int flips = 0;
  for (std::size_t i = 1; i < feasible_flags.size(); ++i)
    if (feasible_flags[i] != feasible_flags[i - 1]) ++flips;
  if (flips > 1)
    artifacts.note(
        "feasibility flips more than once over the grid; the feasible set "
        "does not look like a single interval");

  // Bisect inside the first feasible-to-infeasible bracket, when one exists.
  bool emitted_max = false;
  for (std::size_t i = 1; i < feasible_flags.size(); ++i) {
    if (feasible_flags[i - 1] == 1 && feasible_flags[i] == 0) {
      const MultiscaleModel probe =
          effective_model(run.file, run.sigma_w2, run.sigma_v2, 1.0);
      const double g =
          max_gamma(probe, unique_grid[i - 1], unique_grid[i], 1e-4);
      evaluate_gamma(g, true, true);
      emitted_max = true;
      break;
    }
  }
  if (!emitted_max)
    artifacts.note(
        "max_gamma not bracketed by the grid (no feasible-to-infeasible "
        "transition)");

  artifacts.add("gamma_sweep.csv", csv.str());
}

// ---------------------------------------------------------------------------
// missing_stage

void run_missing_stage(const ResolvedRun& run, ArtifactSet& artifacts) {
  if (run.missing_stages.empty())
    throw ArgumentError("missing_stage requires a non-empty 'missing_stages'");
  const MultiscaleModel model =
      effective_model(run.file, run.sigma_w2, run.sigma_v2, run.gamma);

  const TreeSignal full = simulate(model, model.weights().prior_mean,
                                   NoiseSpec{1.0, 1.0}, run.seed);
  TreeSignal missing = full;
  remove_observations(missing, run.missing_stages);

  const FilterOutputs full_out = run_selected(model, full, run);
  const FilterOutputs miss_out = run_selected(model, missing, run);

  const FilterReport* hinf_full = full_out.hinf(run.hinf_kind);
  const FilterReport* hinf_miss = miss_out.hinf(run.hinf_kind);
  const FilterReport* kal_full = full_out.kalman ? &*full_out.kalman : nullptr;
  const FilterReport* kal_miss = miss_out.kalman ? &*miss_out.kalman : nullptr;

  artifacts.add("metrics.csv", metrics_csv(build_metrics_rows(
                                   model, missing, hinf_miss, kal_miss)));

  std::ostringstream trend;
  trend << "level,cov_trace_hinf_full,cov_trace_hinf_missing,"
           "cov_trace_kalman_full,cov_trace_kalman_missing\n";
  auto trend_or_empty = [&](const FilterReport* rep) {
    return rep ? covariance_trend(*rep) : std::vector<double>();
  };
  const auto hf = trend_or_empty(hinf_full);
  const auto hm = trend_or_empty(hinf_miss);
  const auto kf = trend_or_empty(kal_full);
  const auto km = trend_or_empty(kal_miss);
  for (int k = 0; k <= model.topology().depth(); ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    auto cell = [&](const std::vector<double>& t) {
      return t.empty() ? std::string("nan") : format_g9(t[kk]);
    };
    trend << k << ',' << cell(hf) << ',' << cell(hm) << ',' << cell(kf) << ','
          << cell(km) << '\n';
  }
  artifacts.add("covariance_trend.csv", trend.str());

  if (model.topology().node_count() <= 100000 && model.dims().n == 1)
    artifacts.add("estimates.csv", estimates_csv(model, missing, miss_out));
  log_game_objective(artifacts, model, missing, miss_out, run.gamma);
}

// ---------------------------------------------------------------------------
// steady_state

void run_steady_state(const ResolvedRun& run, ArtifactSet& artifacts) {
  const MultiscaleModel model =
      effective_model(run.file, run.sigma_w2, run.sigma_v2, run.gamma);
  const int depth = run.config.steady_depth;
  if (depth < 2)
    throw ArgumentError("steady_depth must be at least 2");

  // Uniform models carry the same P on every node of a level, so the trend
  // is the one-line recursion; a literal depth-30 tree would need 2^31
  // nodes.
  const NodeParams& edge = model.params(NodeId{1, 1});
  const auto hinf_seq = uniform_level_sequence(
      edge, model.weights().prior_cov, run.gamma, depth);
  const auto kalman_seq =
      uniform_level_sequence(edge, model.weights().prior_cov, 0.0, depth);

  std::ostringstream csv;
  csv << "stage,P_trace_hinf,P_trace_kalman\n";
  for (int k = 0; k <= depth; ++k)
    csv << k << ',' << format_g9(hinf_seq[static_cast<std::size_t>(k)].trace())
        << ',' << format_g9(kalman_seq[static_cast<std::size_t>(k)].trace())
        << '\n';
  artifacts.add("covariance_trend.csv", csv.str());

  const double last = hinf_seq[static_cast<std::size_t>(depth)].trace();
  const double prev = hinf_seq[static_cast<std::size_t>(depth) - 1].trace();
  artifacts.note("steady_state |P_K - P_{K-1}| = " +
                 format_g9(std::abs(last - prev)) +
                 (std::abs(last - prev) < 1e-6 ? " (converged)"
                                               : " (not converged)"));
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin) {
  static const std::set<std::string> global_keys = {
      "scenario", "model",    "output", "gamma", "sigma_w2",
      "sigma_v2", "seed",     "filter", "missing_stages"};
  static const std::map<std::string, std::set<std::string>> scenario_keys = {
      {"step1d", {"step_breakpoints", "step_values"}},
      {"image2d", {"image"}},
      {"gamma_sweep", {"gamma_grid"}},
      {"missing_stage", {}},
      {"steady_state", {"steady_depth"}},
  };

  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected 'key = value'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (entries.count(key))
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": duplicate key '" + key + "'");
    entries[key] = value;
  }

  auto scenario_it = entries.find("scenario");
  if (scenario_it == entries.end())
    throw ParseError(origin + ": missing required key 'scenario'");
  const std::string scenario = scenario_it->second;
  auto allowed_it = scenario_keys.find(scenario);
  if (allowed_it == scenario_keys.end())
    throw ParseError(origin + ": unknown scenario '" + scenario +
                     "' (expected step1d, image2d, gamma_sweep, missing_stage "
                     "or steady_state)");
  for (const auto& [key, value] : entries) {
    if (global_keys.count(key) || allowed_it->second.count(key)) continue;
    bool other_scenario = false;
    for (const auto& [name, keys] : scenario_keys)
      if (keys.count(key)) other_scenario = true;
    throw ParseError(origin + ": " +
                     (other_scenario
                          ? "key '" + key + "' does not apply to scenario '" +
                                scenario + "'"
                          : "unknown key '" + key + "'"));
  }

  ExperimentConfig config;
  config.scenario = scenario;
  auto model_it = entries.find("model");
  if (model_it == entries.end())
    throw ParseError(origin + ": missing required key 'model'");
  config.model_path = model_it->second;
  if (auto it = entries.find("output"); it != entries.end())
    config.output_dir = it->second;
  if (auto it = entries.find("gamma"); it != entries.end())
    config.gamma = it->second;
  if (auto it = entries.find("sigma_w2"); it != entries.end()) {
    const auto v = parse_number_list(it->second, "sigma_w2", origin);
    if (v.size() != 1)
      throw ParseError(origin + ": sigma_w2 expects a single number");
    config.sigma_w2 = v[0];
  }
  if (auto it = entries.find("sigma_v2"); it != entries.end()) {
    const auto v = parse_number_list(it->second, "sigma_v2", origin);
    if (v.size() != 1)
      throw ParseError(origin + ": sigma_v2 expects a single number");
    config.sigma_v2 = v[0];
  }
  if (auto it = entries.find("seed"); it != entries.end()) {
    const auto v = parse_number_list(it->second, "seed", origin);
    if (v.size() != 1 || v[0] < 0 || v[0] != static_cast<std::uint64_t>(v[0]))
      throw ParseError(origin + ": seed must be a nonnegative integer");
    config.seed = static_cast<std::uint64_t>(v[0]);
  }
  if (auto it = entries.find("missing_stages"); it != entries.end()) {
    std::vector<int> stages;
    for (double v : parse_number_list(it->second, "missing_stages", origin)) {
      if (v != static_cast<int>(v) || v < 0)
        throw ParseError(origin +
                         ": missing_stages entries must be nonnegative "
                         "integers");
      stages.push_back(static_cast<int>(v));
    }
    config.missing_stages = stages;
  }
  if (auto it = entries.find("filter"); it != entries.end())
    config.filter = it->second;
  if (auto it = entries.find("step_breakpoints"); it != entries.end())
    config.step_breakpoints =
        parse_number_list(it->second, "step_breakpoints", origin);
  if (auto it = entries.find("step_values"); it != entries.end())
    config.step_values = parse_number_list(it->second, "step_values", origin);
  if (auto it = entries.find("image"); it != entries.end())
    config.image_path = it->second;
  if (auto it = entries.find("gamma_grid"); it != entries.end())
    config.gamma_grid = parse_number_list(it->second, "gamma_grid", origin);
  if (auto it = entries.find("steady_depth"); it != entries.end()) {
    const auto v = parse_number_list(it->second, "steady_depth", origin);
    if (v.size() != 1 || v[0] < 1 || v[0] != static_cast<int>(v[0]))
      throw ParseError(origin + ": steady_depth must be a positive integer");
    config.steady_depth = static_cast<int>(v[0]);
  }
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig config = parse_experiment_config(buf.str(), path);
  const fs::path dir = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (dir / p).string();
  };
  resolve(config.model_path);
  resolve(config.image_path);
  return config;
}

void run_experiment(const ExperimentConfig& config,
                    const RunOverrides& overrides) {
  const ResolvedRun run = resolve(config, overrides);
  ArtifactSet artifacts;

  if (run.config.scenario == "step1d")
    run_step1d(run, artifacts);
  else if (run.config.scenario == "image2d")
    run_image2d(run, artifacts);
  else if (run.config.scenario == "gamma_sweep")
    run_gamma_sweep(run, artifacts);
  else if (run.config.scenario == "missing_stage")
    run_missing_stage(run, artifacts);
  else if (run.config.scenario == "steady_state")
    run_steady_state(run, artifacts);
  else
    throw ArgumentError("unknown scenario '" + run.config.scenario + "'");

  artifacts.commit(run.config.output_dir, manifest_header(run));
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (char c : data) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace mshinf
