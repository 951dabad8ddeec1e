#include "mshinf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mshinf/errors.hpp"

namespace mshinf {

std::vector<double> snr_db(const std::vector<std::vector<double>>& truth,
                           const std::vector<std::vector<double>>& estimate) {
  if (truth.size() != estimate.size())
    throw DimensionError("snr_db: level counts differ");
  std::vector<double> out(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k].size() != estimate[k].size())
      throw DimensionError("snr_db: level " + std::to_string(k) +
                           " lengths differ");
    double signal = 0.0;
    double error = 0.0;
    for (std::size_t i = 0; i < truth[k].size(); ++i) {
      signal += truth[k][i] * truth[k][i];
      const double e = truth[k][i] - estimate[k][i];
      error += e * e;
    }
    if (signal == 0.0)
      throw ArgumentError("snr_db: zero signal energy at level " +
                          std::to_string(k));
    out[k] = error == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(signal / error);
  }
  return out;
}

namespace {

std::vector<std::vector<double>> flatten_levels(
    const TreeTopology& topo, const std::vector<Eigen::VectorXd>& values) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(topo.depth()) + 1);
  for (const NodeId& node : topo.level_order()) {
    const Eigen::VectorXd& v =
        values[static_cast<std::size_t>(topo.flat_index(node))];
    auto& level = out[static_cast<std::size_t>(node.level)];
    for (Eigen::Index i = 0; i < v.size(); ++i) level.push_back(v[i]);
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> per_level_states(const TreeSignal& signal) {
  return flatten_levels(signal.topology, signal.x);
}

std::vector<std::vector<double>> per_level_states(const FilterReport& report) {
  return flatten_levels(report.topology, report.state.xhat);
}

double game_objective(const TreeSignal& signal, const FilterReport& report,
                      const MultiscaleModel& model, double gamma) {
  if (!(signal.topology == report.topology) ||
      !(signal.topology == model.topology()))
    throw DimensionError("signal, report and model cover different trees");
  if (gamma <= 0.0) throw ArgumentError("gamma must be positive");
  const TreeTopology& topo = model.topology();

  double numerator = 0.0;
  double denominator = 0.0;

  const Eigen::VectorXd prior_err =
      signal.x[0] - model.weights().prior_mean;
  denominator += prior_err.dot(
      model.weights().prior_cov.llt().solve(prior_err));

  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    if (node.level > 0) {
      const Eigen::VectorXd err = signal.z[idx] - report.state.zhat[idx];
      numerator += err.dot(np.Q * err);
      denominator += signal.w[idx].squaredNorm();
    }
    if (signal.v[idx])
      denominator += signal.v[idx]->dot(np.R.llt().solve(*signal.v[idx]));
  }

  if (denominator <= 0.0)
    throw ArgumentError("game objective undefined: zero disturbance energy");
  return numerator / denominator;
}

std::vector<double> covariance_trend(const FilterReport& report) {
  const TreeTopology& topo = report.topology;
  std::vector<double> trend(static_cast<std::size_t>(topo.depth()) + 1, 0.0);
  std::vector<std::int64_t> counts(trend.size(), 0);
  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    trend[static_cast<std::size_t>(node.level)] += report.state.P[idx].trace();
    ++counts[static_cast<std::size_t>(node.level)];
  }
  for (std::size_t k = 0; k < trend.size(); ++k)
    trend[k] /= static_cast<double>(counts[k]);
  return trend;
}

EvalSummary evaluate(const TreeSignal& signal, const FilterReport& report,
                     const MultiscaleModel& model, double baseline_cost) {
  EvalSummary summary;
  summary.snr_db_per_level =
      snr_db(per_level_states(signal), per_level_states(report));
  summary.total_cost = estimation_cost(signal, report, model);
  summary.cov_trace_per_level = covariance_trend(report);
  summary.cost_reduction_vs_baseline =
      baseline_cost > 0.0 ? 1.0 - summary.total_cost / baseline_cost : 0.0;
  return summary;
}

std::string format_g9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "level,snr_hinf_db,snr_kalman_db,cov_trace_hinf,cov_trace_kalman,"
         "cost_hinf,cost_kalman\n";
  for (const MetricsRow& row : rows) {
    out << row.level << ',' << format_g9(row.snr_hinf_db) << ','
        << format_g9(row.snr_kalman_db) << ',' << format_g9(row.cov_trace_hinf)
        << ',' << format_g9(row.cov_trace_kalman) << ','
        << format_g9(row.cost_hinf) << ',' << format_g9(row.cost_kalman)
        << '\n';
  }
  return out.str();
}

}  // namespace mshinf
