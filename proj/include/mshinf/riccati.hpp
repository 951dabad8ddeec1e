#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mshinf/model.hpp"

namespace mshinf {

/// Result of propagating the coupled Riccati recursion over a tree. P is
/// stored per node in level order; entries past the first failure are left
/// unset. When `feasible` is false, `first_failure` names the first node for
/// which no valid positive definite solution exists.
struct RiccatiState {
  TreeTopology topology;
  std::vector<std::optional<Eigen::MatrixXd>> P;
  bool feasible = true;
  std::optional<NodeId> first_failure;

  explicit RiccatiState(const TreeTopology& t)
      : topology(t), P(static_cast<std::size_t>(t.node_count())) {}
};

/// The product-form correction matrix M = I - gamma*Qbar*P + C' R^-1 C P
/// shared by the recursion and the gain. Not symmetric in general.
Eigen::MatrixXd middle_matrix(const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& qbar,
                              const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& R, double gamma);

/// One edge of the recursion: P_child = A P M^-1 A' + B B', symmetrized.
/// `edge` carries the edge matrices A, B and the parent node's C, L, Q, R.
/// Throws NumericError when M is numerically singular.
Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& P_parent,
                             const NodeParams& edge, double gamma);

/// Filter gain for the same edge: K = A P M^-1 C' R^-1, an n x p matrix.
Eigen::MatrixXd gain(const Eigen::MatrixXd& P_parent, const NodeParams& edge,
                     double gamma);

/// Spectral existence test applied before every step: P > 0 and
/// P^-1 - gamma*Qbar + C' R^-1 C > 0, both with tolerance 1e-10 on the
/// smallest eigenvalue.
bool node_feasible(const Eigen::MatrixXd& P, const Eigen::MatrixXd& qbar,
                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& R,
                   double gamma);

/// Runs the recursion over every edge in level order starting from
/// P_root = prior_cov. Stops at the first node whose solution fails the
/// existence test; the result records the failure instead of throwing.
/// `observed`, when given, flags the nodes whose measurement term C' R^-1 C
/// participates; unobserved nodes keep only the -gamma*Qbar*P correction.
RiccatiState sweep(const MultiscaleModel& model, double gamma,
                   const std::vector<std::uint8_t>* observed = nullptr);

/// sweep() at the model's own attenuation level.
RiccatiState sweep(const MultiscaleModel& model);

/// Largest feasible attenuation, located by bisection on the sweep
/// feasibility predicate. Requires a valid bracket: feasible at `lo`,
/// infeasible at `hi`. The returned value is feasible and within `tol` of
/// the supremum (assuming the feasible set is an interval).
double max_gamma(const MultiscaleModel& model, double lo, double hi,
                 double tol);

/// P along one coarse-to-fine line of a uniform model: P_0 = p0 and `depth`
/// applications of riccati_step with the same parameters. On uniform trees
/// every node of level k carries entry k of this sequence.
std::vector<Eigen::MatrixXd> uniform_level_sequence(const NodeParams& params,
                                                    const Eigen::MatrixXd& p0,
                                                    double gamma, int depth);

}  // namespace mshinf
