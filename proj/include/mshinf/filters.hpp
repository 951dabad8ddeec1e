#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mshinf/model.hpp"

namespace mshinf {

/// Per-node estimator output, level order. `gain` holds the correction gain
/// used at each node (zero at the root and wherever no observation entered).
struct FilterState {
  std::vector<Eigen::VectorXd> xhat;
  std::vector<Eigen::VectorXd> zhat;
  std::vector<Eigen::MatrixXd> P;
  std::vector<Eigen::MatrixXd> gain;
};

/// A completed filtering pass plus the per-level summary used for
/// uncertainty-trend plots (mean trace of P, coarse to fine).
struct FilterReport {
  TreeTopology topology;
  FilterState state;
  std::vector<double> per_level_cov_trace;
  bool feasible = true;

  explicit FilterReport(const TreeTopology& t) : topology(t) {}

  const Eigen::VectorXd& xhat(const NodeId& node) const {
    return state.xhat[static_cast<std::size_t>(topology.flat_index(node))];
  }
  const Eigen::MatrixXd& cov(const NodeId& node) const {
    return state.P[static_cast<std::size_t>(topology.flat_index(node))];
  }
};

enum class FilterKind { PredictorHinf, CurrentHinf, Kalman };

/// Name used in CLI flags, config files and CSV columns.
std::string filter_name(FilterKind kind);
FilterKind filter_from_name(const std::string& name);

/// Robust estimator driven by parent-level observations: child estimates are
/// A xhat_parent + K (y_parent - C xhat_parent) with the gain and covariance
/// from the tree Riccati recursion. Missing observations drop the innovation
/// and the measurement term of the recursion, keeping the gamma correction.
/// Throws InfeasibleError naming the first failing node when the model's
/// attenuation level is too large.
FilterReport run_predictor_hinf(const MultiscaleModel& model,
                                const TreeSignal& obs);

/// Robust estimator that also incorporates the observation at the node's own
/// level. Covariance updates through the indefinite augmented weight
/// Rtilde = blockdiag(R, -I/gamma) + [C; L] P [C' L']; the update is applied
/// only when Rtilde carries exactly p positive and r negative eigenvalues,
/// otherwise the attenuation level is infeasible for this variant. A missing
/// observation skips the mean correction and keeps only the L block of the
/// covariance update.
FilterReport run_current_hinf(const MultiscaleModel& model,
                              const TreeSignal& obs);

/// Standard coarse-to-fine Kalman baseline: the current-measurement
/// recursion with the -I/gamma block removed.
FilterReport run_kalman(const MultiscaleModel& model, const TreeSignal& obs);

/// Runs the selected estimator; experiments swap filters through this single
/// entry point.
FilterReport run_filter(const MultiscaleModel& model, const TreeSignal& obs,
                        FilterKind kind);

/// Accumulated Q-weighted output error sum ||z - zhat||^2_Q over all nodes.
double estimation_cost(const TreeSignal& signal, const FilterReport& report,
                       const MultiscaleModel& model);

/// Per-level Q-weighted output error sums (length depth+1); estimation_cost
/// is their total.
std::vector<double> estimation_cost_per_level(const TreeSignal& signal,
                                              const FilterReport& report,
                                              const MultiscaleModel& model);

}  // namespace mshinf
