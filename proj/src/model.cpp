#include "mshinf/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mshinf/errors.hpp"

namespace mshinf {

namespace {

std::string node_str(const NodeId& n) {
  return "(" + std::to_string(n.level) + ", " + std::to_string(n.index) + ")";
}

void require_shape(const Eigen::MatrixXd& m, int rows, int cols,
                   const char* name, const NodeId& node) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(std::string(name) + " at node " + node_str(node) +
                         " must be " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

void require_symmetric(const Eigen::MatrixXd& m, const char* name,
                       const NodeId& node) {
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw ArgumentError(std::string(name) + " at node " + node_str(node) +
                        " is not symmetric");
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

NodeParams NodeParams::identity(const Dims& dims) {
  NodeParams p;
  p.A = Eigen::MatrixXd::Identity(dims.n, dims.n);
  p.B = Eigen::MatrixXd::Identity(dims.n, dims.q);
  p.C = Eigen::MatrixXd::Identity(dims.p, dims.n);
  p.L = Eigen::MatrixXd::Identity(dims.r, dims.n);
  p.Q = Eigen::MatrixXd::Identity(dims.r, dims.r);
  p.R = Eigen::MatrixXd::Identity(dims.p, dims.p);
  return p;
}

TreeSignal::TreeSignal(const TreeTopology& t)
    : topology(t),
      x(static_cast<std::size_t>(t.node_count())),
      w(static_cast<std::size_t>(t.node_count())),
      z(static_cast<std::size_t>(t.node_count())),
      y(static_cast<std::size_t>(t.node_count())),
      v(static_cast<std::size_t>(t.node_count())) {}

MultiscaleModel::MultiscaleModel(const TreeTopology& topology, const Dims& dims,
                                 std::vector<NodeParams> params,
                                 GameWeights weights)
    : topology_(topology),
      dims_(dims),
      params_(std::move(params)),
      weights_(std::move(weights)) {
  if (dims.n < 1 || dims.p < 1 || dims.q < 1 || dims.r < 1)
    throw DimensionError("all dimensions must be at least 1");
  if (params_.size() != static_cast<std::size_t>(topology_.node_count()))
    throw DimensionError("params must cover every node: expected " +
                         std::to_string(topology_.node_count()) + ", got " +
                         std::to_string(params_.size()));
  for (const NodeId& node : topology_.level_order()) {
    const NodeParams& np = params_[static_cast<std::size_t>(topology_.flat_index(node))];
    require_shape(np.A, dims.n, dims.n, "A", node);
    require_shape(np.B, dims.n, dims.q, "B", node);
    require_shape(np.C, dims.p, dims.n, "C", node);
    require_shape(np.L, dims.r, dims.n, "L", node);
    require_shape(np.Q, dims.r, dims.r, "Q", node);
    require_shape(np.R, dims.p, dims.p, "R", node);
    require_symmetric(np.Q, "Q", node);
    require_symmetric(np.R, "R", node);
    const double r_scale = 1.0 + np.R.cwiseAbs().maxCoeff();
    if (min_eigenvalue(np.R) <= 1e-12 * r_scale)
      throw ArgumentError("R at node " + node_str(node) +
                          " must be positive definite");
    const double q_scale = 1.0 + np.Q.cwiseAbs().maxCoeff();
    if (min_eigenvalue(np.Q) < -1e-12 * q_scale)
      throw ArgumentError("Q at node " + node_str(node) +
                          " must be positive semidefinite");
  }
  if (weights_.gamma <= 0.0)
    throw ArgumentError("gamma must be positive");
  if (weights_.prior_mean.size() != dims.n)
    throw DimensionError("prior_mean must have dimension n");
  if (weights_.prior_cov.rows() != dims.n || weights_.prior_cov.cols() != dims.n)
    throw DimensionError("prior_cov must be n x n");
  require_symmetric(weights_.prior_cov, "prior_cov", NodeId{0, 1});
  if (min_eigenvalue(weights_.prior_cov) <= 1e-12 * (1.0 + weights_.prior_cov.cwiseAbs().maxCoeff()))
    throw ArgumentError("prior_cov must be positive definite");

  qbar_.reserve(params_.size());
  for (const NodeParams& np : params_)
    qbar_.push_back(np.L.transpose() * np.Q * np.L);
}

MultiscaleModel MultiscaleModel::uniform(const TreeTopology& topology,
                                         const Dims& dims,
                                         const NodeParams& defaults,
                                         const GameWeights& weights) {
  std::vector<NodeParams> params(static_cast<std::size_t>(topology.node_count()),
                                 defaults);
  return MultiscaleModel(topology, dims, std::move(params), weights);
}

const NodeParams& MultiscaleModel::params(const NodeId& node) const {
  return params_[static_cast<std::size_t>(topology_.flat_index(node))];
}

const Eigen::MatrixXd& MultiscaleModel::qbar(const NodeId& node) const {
  return qbar_[static_cast<std::size_t>(topology_.flat_index(node))];
}

TreeSignal simulate(const MultiscaleModel& model,
                    const Eigen::VectorXd& root_state, const NoiseSpec& noise,
                    std::uint64_t seed) {
  const Dims& d = model.dims();
  if (root_state.size() != d.n)
    throw DimensionError("root_state must have dimension n");
  if (noise.w_var < 0.0 || noise.v_var < 0.0)
    throw ArgumentError("noise variances must be nonnegative");

  const TreeTopology& topo = model.topology();
  TreeSignal signal(topo);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double w_std = std::sqrt(noise.w_var);
  const double v_std = std::sqrt(noise.v_var);

  auto draw = [&](int len, double stddev) {
    Eigen::VectorXd out(len);
    for (int i = 0; i < len; ++i) out[i] = stddev * unit(rng);
    return out;
  };

  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    if (node.level == 0) {
      signal.x[idx] = root_state;
      signal.w[idx] = Eigen::VectorXd(0);
    } else {
      const std::size_t pidx =
          static_cast<std::size_t>(topo.flat_index(topo.parent(node)));
      signal.w[idx] = draw(d.q, w_std);
      signal.x[idx] = np.A * signal.x[pidx] + np.B * signal.w[idx];
    }
    signal.v[idx] = draw(d.p, v_std);
    signal.y[idx] = np.C * signal.x[idx] + *signal.v[idx];
    signal.z[idx] = np.L * signal.x[idx];
  }
  return signal;
}

void remove_observations(TreeSignal& signal, const std::vector<int>& levels) {
  for (int level : levels) {
    if (level < 0 || level > signal.topology.depth())
      throw ArgumentError("missing stage " + std::to_string(level) +
                          " outside [0, " +
                          std::to_string(signal.topology.depth()) + "]");
    const std::int64_t count = signal.topology.nodes_at(level);
    for (std::int64_t m = 1; m <= count; ++m) {
      const std::size_t idx = static_cast<std::size_t>(
          signal.topology.flat_index(NodeId{level, m}));
      signal.y[idx].reset();
      signal.v[idx].reset();
    }
  }
}

std::vector<std::uint8_t> observation_mask(const TreeSignal& signal) {
  std::vector<std::uint8_t> mask(signal.y.size());
  for (std::size_t i = 0; i < signal.y.size(); ++i)
    mask[i] = signal.y[i].has_value() ? 1 : 0;
  return mask;
}

TreeSignal adversarial_disturbance(const MultiscaleModel& model,
                                   double power_budget, std::uint64_t seed) {
  if (power_budget <= 0.0)
    throw ArgumentError("power_budget must be positive");

  const TreeTopology& topo = model.topology();
  const Dims& d = model.dims();
  const std::vector<NodeId> nodes = topo.level_order();

  // Rank edges by how strongly B amplifies a unit disturbance.
  double best = -1.0;
  std::vector<double> score(nodes.size(), -1.0);
  for (const NodeId& node : nodes) {
    if (node.level == 0) continue;
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const Eigen::MatrixXd& B = model.params(node).B;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B * B.transpose(),
                                                      Eigen::EigenvaluesOnly);
    score[idx] = es.eigenvalues().maxCoeff();
    if (score[idx] > best) best = score[idx];
  }
  if (best <= 0.0)
    throw ArgumentError(
        "adversarial_disturbance: the model has no disturbance channel (all B "
        "are zero)");

  std::vector<std::size_t> targets;
  for (const NodeId& node : nodes) {
    if (node.level == 0) continue;
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    if (score[idx] >= best * (1.0 - 1e-12)) targets.push_back(idx);
  }

  const double per_edge = power_budget / static_cast<double>(targets.size());
  std::mt19937_64 rng(seed);

  TreeSignal signal(topo);
  std::vector<std::uint8_t> is_target(nodes.size(), 0);
  for (std::size_t idx : targets) is_target[idx] = 1;

  for (const NodeId& node : nodes) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    if (node.level == 0) {
      signal.x[idx] = model.weights().prior_mean;
      signal.w[idx] = Eigen::VectorXd(0);
    } else {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(d.q);
      if (is_target[idx]) {
        // Direction in disturbance space that feeds the top eigenvector of
        // B B': the leading right singular direction of B.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(np.B * np.B.transpose());
        Eigen::VectorXd state_dir = es.eigenvectors().col(d.n - 1);
        Eigen::VectorXd dir = np.B.transpose() * state_dir;
        dir.normalize();
        const double sign = (rng() & 1u) ? 1.0 : -1.0;
        w = sign * std::sqrt(per_edge) * dir;
      }
      signal.w[idx] = w;
      const std::size_t pidx =
          static_cast<std::size_t>(topo.flat_index(topo.parent(node)));
      signal.x[idx] = np.A * signal.x[pidx] + np.B * w;
    }
    signal.v[idx] = Eigen::VectorXd::Zero(d.p);
    signal.y[idx] = np.C * signal.x[idx];
    signal.z[idx] = np.L * signal.x[idx];
  }
  return signal;
}

}  // namespace mshinf
