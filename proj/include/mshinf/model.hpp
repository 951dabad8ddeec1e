#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mshinf/tree.hpp"

namespace mshinf {

/// Problem dimensions: state n, measurement p, disturbance q, output r.
struct Dims {
  int n = 1;
  int p = 1;
  int q = 1;
  int r = 1;
};

/// System matrices attached to one node. A and B describe the edge from the
/// node's parent into the node (unused at the root); C, L, Q, R describe the
/// node itself: observation map, output selection, output error weight, and
/// measurement noise weight.
struct NodeParams {
  Eigen::MatrixXd A;  // n x n interpolation, per incoming edge
  Eigen::MatrixXd B;  // n x q disturbance input, per incoming edge
  Eigen::MatrixXd C;  // p x n observation map
  Eigen::MatrixXd L;  // r x n output selection
  Eigen::MatrixXd Q;  // r x r output error weight, symmetric >= 0
  Eigen::MatrixXd R;  // p x p measurement noise weight, symmetric > 0

  /// Identity matrices of the given dimensions.
  static NodeParams identity(const Dims& dims);
};

/// Minimax game parameters: attenuation level and the prior on the root state.
struct GameWeights {
  double gamma = 1.0;
  Eigen::VectorXd prior_mean;  // n
  Eigen::MatrixXd prior_cov;   // n x n, symmetric > 0
};

/// Variances of the zero-mean Gaussian draws used by simulate(): `w_var` is
/// the variance of each disturbance coordinate (before the B map is applied),
/// `v_var` the variance of each measurement noise coordinate.
struct NoiseSpec {
  double w_var = 1.0;
  double v_var = 1.0;
};

/// One realization of the multiscale process: latent states, disturbances,
/// measurement noises, observations (absent entries model unrecorded
/// measurements), and outputs z = L x. All vectors are stored per node in
/// level order; w at the root is an empty vector since the root has no
/// incoming edge.
struct TreeSignal {
  TreeTopology topology;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> w;
  std::vector<Eigen::VectorXd> z;
  std::vector<std::optional<Eigen::VectorXd>> y;
  std::vector<std::optional<Eigen::VectorXd>> v;

  explicit TreeSignal(const TreeTopology& t);
};

/// A coarse-to-fine linear state-space model on a multiscale tree: per-node
/// system matrices plus the game weights. Immutable after construction.
class MultiscaleModel {
 public:
  /// Validates dimensions, symmetry, R > 0, Q >= 0, prior_cov > 0 for every
  /// node; `params` is indexed by flat node order.
  MultiscaleModel(const TreeTopology& topology, const Dims& dims,
                  std::vector<NodeParams> params, GameWeights weights);

  /// Every node carries a copy of `defaults`.
  static MultiscaleModel uniform(const TreeTopology& topology, const Dims& dims,
                                 const NodeParams& defaults,
                                 const GameWeights& weights);

  const TreeTopology& topology() const { return topology_; }
  const Dims& dims() const { return dims_; }
  const GameWeights& weights() const { return weights_; }
  const NodeParams& params(const NodeId& node) const;

  /// The state-space output weight Qbar = L' Q L of a node, cached at
  /// construction.
  const Eigen::MatrixXd& qbar(const NodeId& node) const;

 private:
  TreeTopology topology_;
  Dims dims_;
  std::vector<NodeParams> params_;
  std::vector<Eigen::MatrixXd> qbar_;
  GameWeights weights_;
};

/// Draws one trajectory of the model: x propagates coarse-to-fine with
/// i.i.d. Gaussian disturbances from `noise`, observations y = C x + v are
/// recorded at every node. Deterministic for a fixed seed.
TreeSignal simulate(const MultiscaleModel& model,
                    const Eigen::VectorXd& root_state, const NoiseSpec& noise,
                    std::uint64_t seed);

/// Removes the observations (and their noises) at the listed levels,
/// modelling stages where nothing was recorded.
void remove_observations(TreeSignal& signal, const std::vector<int>& levels);

/// Per-node flags, level order: 1 where the signal carries an observation.
std::vector<std::uint8_t> observation_mask(const TreeSignal& signal);

/// A bounded-energy disturbance realization that stresses the filter: the
/// whole budget is placed as process disturbance on the edges with the
/// strongest amplification lambda_max(B B'), split evenly among ties, each
/// aligned with the direction B amplifies most; signs are drawn from the
/// seed. Observations are exact (v = 0), the root state equals the prior
/// mean, and the total energy sum ||w||^2 + sum ||v||^2 equals
/// `power_budget` up to rounding.
TreeSignal adversarial_disturbance(const MultiscaleModel& model,
                                   double power_budget, std::uint64_t seed);

}  // namespace mshinf
