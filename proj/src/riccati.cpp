#include "mshinf/riccati.hpp"

#include <cmath>
#include <string>

#include "mshinf/errors.hpp"

namespace mshinf {

namespace {

constexpr double kEigTol = 1e-10;

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

double min_eig(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// R^-1 C via Cholesky; R is validated positive definite at model build time
// but free-standing calls may pass anything.
Eigen::MatrixXd solve_rinv(const Eigen::MatrixXd& R, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(R));
  if (llt.info() != Eigen::Success)
    throw NumericError("R is not positive definite");
  return llt.solve(rhs);
}

// M^-1 rhs with an explicit conditioning check; M is a product form and has
// no useful structure to exploit.
Eigen::MatrixXd solve_middle(const Eigen::MatrixXd& M,
                             const Eigen::MatrixXd& rhs) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-12 * smax))
    throw NumericError("middle matrix is numerically singular");
  return svd.solve(rhs);
}

}  // namespace

Eigen::MatrixXd middle_matrix(const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& qbar,
                              const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& R, double gamma) {
  const Eigen::Index n = P.rows();
  return Eigen::MatrixXd::Identity(n, n) - gamma * qbar * P +
         C.transpose() * solve_rinv(R, C * P);
}

Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& P_parent,
                             const NodeParams& edge, double gamma) {
  const Eigen::MatrixXd qbar = edge.L.transpose() * edge.Q * edge.L;
  const Eigen::MatrixXd M = middle_matrix(P_parent, qbar, edge.C, edge.R, gamma);
  const Eigen::MatrixXd propagated =
      edge.A * P_parent * solve_middle(M, edge.A.transpose());
  return symmetrized(propagated + edge.B * edge.B.transpose());
}

Eigen::MatrixXd gain(const Eigen::MatrixXd& P_parent, const NodeParams& edge,
                     double gamma) {
  const Eigen::MatrixXd qbar = edge.L.transpose() * edge.Q * edge.L;
  const Eigen::MatrixXd M = middle_matrix(P_parent, qbar, edge.C, edge.R, gamma);
  const Eigen::MatrixXd rinv_c = solve_rinv(edge.R, edge.C);  // R^-1 C
  return edge.A * P_parent * solve_middle(M, rinv_c.transpose());
}

bool node_feasible(const Eigen::MatrixXd& P, const Eigen::MatrixXd& qbar,
                   const Eigen::MatrixXd& C, const Eigen::MatrixXd& R,
                   double gamma) {
  const Eigen::MatrixXd sym_p = symmetrized(P);
  if (min_eig(sym_p) <= kEigTol) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(sym_p);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd p_inv =
      llt.solve(Eigen::MatrixXd::Identity(P.rows(), P.cols()));
  const Eigen::MatrixXd form =
      symmetrized(p_inv) - gamma * qbar + C.transpose() * solve_rinv(R, C);
  return min_eig(symmetrized(form)) > kEigTol;
}

RiccatiState sweep(const MultiscaleModel& model, double gamma,
                   const std::vector<std::uint8_t>* observed) {
  const TreeTopology& topo = model.topology();
  if (observed && observed->size() != static_cast<std::size_t>(topo.node_count()))
    throw DimensionError("observation mask must cover every node");

  RiccatiState state(topo);
  const std::size_t root = 0;
  state.P[root] = symmetrized(model.weights().prior_cov);
  if (min_eig(*state.P[root]) <= kEigTol) {
    state.feasible = false;
    state.first_failure = NodeId{0, 1};
    return state;
  }

  const Eigen::MatrixXd zero_c =
      Eigen::MatrixXd::Zero(model.dims().p, model.dims().n);

  for (const NodeId& node : topo.level_order()) {
    if (node.level == topo.depth()) break;
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    const bool has_obs = !observed || (*observed)[idx] != 0;
    const Eigen::MatrixXd& c_eff = has_obs ? np.C : zero_c;

    if (!node_feasible(*state.P[idx], model.qbar(node), c_eff, np.R, gamma)) {
      state.feasible = false;
      state.first_failure = topo.children(node).front();
      return state;
    }
    for (const NodeId& child : topo.children(node)) {
      const std::size_t cidx = static_cast<std::size_t>(topo.flat_index(child));
      NodeParams edge = model.params(child);  // A, B of the edge
      edge.C = c_eff;                         // C, L, Q, R of the parent
      edge.L = np.L;
      edge.Q = np.Q;
      edge.R = np.R;
      state.P[cidx] = riccati_step(*state.P[idx], edge, gamma);
      if (min_eig(*state.P[cidx]) <= kEigTol) {
        state.feasible = false;
        state.first_failure = child;
        state.P[cidx].reset();
        return state;
      }
    }
  }
  return state;
}

RiccatiState sweep(const MultiscaleModel& model) {
  return sweep(model, model.weights().gamma);
}

double max_gamma(const MultiscaleModel& model, double lo, double hi,
                 double tol) {
  if (!(lo < hi)) throw ArgumentError("max_gamma: need lo < hi");
  if (!(tol > 0.0)) throw ArgumentError("max_gamma: tol must be positive");
  if (!sweep(model, lo).feasible)
    throw ArgumentError("max_gamma: sweep must be feasible at lo");
  if (sweep(model, hi).feasible)
    throw ArgumentError("max_gamma: sweep must be infeasible at hi");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (sweep(model, mid).feasible)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

std::vector<Eigen::MatrixXd> uniform_level_sequence(const NodeParams& params,
                                                    const Eigen::MatrixXd& p0,
                                                    double gamma, int depth) {
  if (depth < 0) throw ArgumentError("depth must be nonnegative");
  std::vector<Eigen::MatrixXd> seq;
  seq.reserve(static_cast<std::size_t>(depth) + 1);
  seq.push_back(0.5 * (p0 + p0.transpose()));
  for (int k = 0; k < depth; ++k)
    seq.push_back(riccati_step(seq.back(), params, gamma));
  return seq;
}

}  // namespace mshinf
