#include "mshinf/model.hpp"

#include <cmath>

#include "doctest.h"
#include "mshinf/errors.hpp"

using namespace mshinf;

namespace {

MultiscaleModel scalar_uniform(int depth, int arity, double a = 1.0,
                               double b = 1.0, double c = 1.0, double r = 1.0,
                               double gamma = 1.0, double p0 = 1.0,
                               double mean = 0.0) {
  Dims dims{1, 1, 1, 1};
  NodeParams np = NodeParams::identity(dims);
  np.A(0, 0) = a;
  np.B(0, 0) = b;
  np.C(0, 0) = c;
  np.R(0, 0) = r;
  GameWeights w;
  w.gamma = gamma;
  w.prior_mean = Eigen::VectorXd::Constant(1, mean);
  w.prior_cov = Eigen::MatrixXd::Constant(1, 1, p0);
  return MultiscaleModel::uniform(TreeTopology(depth, arity), dims, np, w);
}

}  // namespace

TEST_CASE("uniform model covers every node of a K=5 dyadic tree") {
  auto model = scalar_uniform(5, 2);
  CHECK(model.topology().node_count() == 63);
  for (const NodeId& node : model.topology().level_order())
    CHECK(model.params(node).A(0, 0) == 1.0);
}

TEST_CASE("non positive definite R is rejected") {
  Dims dims{1, 1, 1, 1};
  NodeParams np = NodeParams::identity(dims);
  np.R(0, 0) = 0.0;
  GameWeights w;
  w.gamma = 1.0;
  w.prior_mean = Eigen::VectorXd::Zero(1);
  w.prior_cov = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(
      MultiscaleModel::uniform(TreeTopology(2, 2), dims, np, w),
      mshinf::ArgumentError);
}

TEST_CASE("noiseless identity model propagates the root state unchanged") {
  auto model = scalar_uniform(3, 2);
  auto signal = simulate(model, Eigen::VectorXd::Constant(1, 5.0),
                         NoiseSpec{0.0, 0.0}, 7);
  for (const NodeId& node : model.topology().level_order()) {
    const auto idx = model.topology().flat_index(node);
    CHECK(signal.x[idx](0) == 5.0);
    REQUIRE(signal.y[idx].has_value());
    CHECK((*signal.y[idx])(0) == 5.0);
  }
}

TEST_CASE("simulation is a pure function of the seed") {
  auto model = scalar_uniform(4, 2);
  auto a = simulate(model, Eigen::VectorXd::Zero(1), NoiseSpec{0.01, 0.02}, 99);
  auto b = simulate(model, Eigen::VectorXd::Zero(1), NoiseSpec{0.01, 0.02}, 99);
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    CHECK(a.x[i] == b.x[i]);
    CHECK(*a.y[i] == *b.y[i]);
    if (i > 0) CHECK(a.w[i] == b.w[i]);
  }
  auto c = simulate(model, Eigen::VectorXd::Zero(1), NoiseSpec{0.01, 0.02}, 100);
  CHECK(c.x.back() != a.x.back());
}

TEST_CASE("every simulated edge reconstructs x_child = A x_parent + B w") {
  Dims dims{2, 1, 2, 1};
  NodeParams np;
  np.A = (Eigen::MatrixXd(2, 2) << 0.9, 0.1, -0.2, 0.8).finished();
  np.B = (Eigen::MatrixXd(2, 2) << 1.0, 0.0, 0.3, 0.7).finished();
  np.C = (Eigen::MatrixXd(1, 2) << 1.0, 1.0).finished();
  np.L = (Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished();
  np.Q = Eigen::MatrixXd::Identity(1, 1);
  np.R = Eigen::MatrixXd::Identity(1, 1);
  GameWeights w;
  w.gamma = 0.5;
  w.prior_mean = Eigen::VectorXd::Zero(2);
  w.prior_cov = Eigen::MatrixXd::Identity(2, 2);
  auto model = MultiscaleModel::uniform(TreeTopology(4, 2), dims, np, w);

  auto signal = simulate(model, Eigen::VectorXd::Ones(2), NoiseSpec{0.3, 0.1}, 5);
  const auto& topo = model.topology();
  for (const NodeId& node : topo.level_order()) {
    if (node.level == 0) continue;
    const auto idx = topo.flat_index(node);
    const auto pidx = topo.flat_index(topo.parent(node));
    const Eigen::VectorXd recon = np.A * signal.x[pidx] + np.B * signal.w[idx];
    CHECK((signal.x[idx] - recon).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((*signal.y[idx] - (np.C * signal.x[idx] + *signal.v[idx]))
              .cwiseAbs()
              .maxCoeff() < 1e-15);
  }
}

TEST_CASE("empirical disturbance variance tracks the noise spec") {
  auto model = scalar_uniform(5, 2);
  double sum_sq = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto signal =
        simulate(model, Eigen::VectorXd::Zero(1), NoiseSpec{0.01, 0.02}, seed);
    const auto& topo = model.topology();
    for (const NodeId& node : topo.level_order()) {
      if (node.level == 0) continue;
      const double diff = signal.x[topo.flat_index(node)](0) -
                          signal.x[topo.flat_index(topo.parent(node))](0);
      sum_sq += diff * diff;
      ++count;
    }
  }
  REQUIRE(count >= 500);
  const double var = sum_sq / count;
  CHECK(var > 0.007);
  CHECK(var < 0.013);
}

TEST_CASE("removing observations blanks whole stages") {
  auto model = scalar_uniform(3, 2);
  auto signal = simulate(model, Eigen::VectorXd::Zero(1), NoiseSpec{1, 1}, 3);
  remove_observations(signal, {2});
  for (const NodeId& node : model.topology().level_order()) {
    const auto idx = model.topology().flat_index(node);
    CHECK(signal.y[idx].has_value() == (node.level != 2));
  }
  auto mask = observation_mask(signal);
  CHECK(mask[model.topology().flat_index(NodeId{2, 1})] == 0);
  CHECK(mask[model.topology().flat_index(NodeId{1, 1})] == 1);
}

TEST_CASE("adversarial disturbance meets its power budget exactly") {
  auto model = scalar_uniform(4, 2, 1.0, 0.5);
  const double budget = 3.75;
  auto signal = adversarial_disturbance(model, budget, 11);
  double energy = 0.0;
  for (std::size_t i = 0; i < signal.w.size(); ++i) {
    energy += signal.w[i].squaredNorm();
    REQUIRE(signal.v[i].has_value());
    energy += signal.v[i]->squaredNorm();
  }
  CHECK(std::abs(energy - budget) <= 1e-9 * budget);
}

TEST_CASE("adversarial disturbance rejects a non-positive budget") {
  auto model = scalar_uniform(2, 2);
  CHECK_THROWS_AS((void)adversarial_disturbance(model, 0.0, 1),
                  mshinf::ArgumentError);
  CHECK_THROWS_AS((void)adversarial_disturbance(model, -1.0, 1),
                  mshinf::ArgumentError);
}

TEST_CASE("adversarial energy concentrates on the strongest edge") {
  // K=1 dyadic tree with distinct B per child; enumerate both edges.
  TreeTopology topo(1, 2);
  Dims dims{1, 1, 1, 1};
  std::vector<NodeParams> params(3, NodeParams::identity(dims));
  params[topo.flat_index(NodeId{1, 1})].B(0, 0) = 0.4;
  params[topo.flat_index(NodeId{1, 2})].B(0, 0) = 1.7;
  GameWeights w;
  w.gamma = 1.0;
  w.prior_mean = Eigen::VectorXd::Zero(1);
  w.prior_cov = Eigen::MatrixXd::Identity(1, 1);
  MultiscaleModel model(topo, dims, params, w);

  auto signal = adversarial_disturbance(model, 1.0, 42);
  const double w1 = signal.w[topo.flat_index(NodeId{1, 1})].squaredNorm();
  const double w2 = signal.w[topo.flat_index(NodeId{1, 2})].squaredNorm();
  CHECK(w1 == 0.0);
  CHECK(w2 == doctest::Approx(1.0).epsilon(1e-12));
}
