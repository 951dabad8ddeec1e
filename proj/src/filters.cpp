#include "mshinf/filters.hpp"

#include <cmath>

#include "mshinf/errors.hpp"
#include "mshinf/riccati.hpp"

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

std::vector<double> mean_trace_per_level(const TreeTopology& topo,
                                         const std::vector<Eigen::MatrixXd>& P) {
  std::vector<double> trend(static_cast<std::size_t>(topo.depth()) + 1, 0.0);
  for (int k = 0; k <= topo.depth(); ++k) {
    double sum = 0.0;
    const std::int64_t count = topo.nodes_at(k);
    for (std::int64_t m = 1; m <= count; ++m)
      sum += P[static_cast<std::size_t>(topo.flat_index(NodeId{k, m}))].trace();
    trend[static_cast<std::size_t>(k)] = sum / static_cast<double>(count);
  }
  return trend;
}

void require_signal_shape(const MultiscaleModel& model, const TreeSignal& obs) {
  if (!(obs.topology == model.topology()))
    throw DimensionError("signal topology does not match the model");
  for (std::size_t i = 0; i < obs.y.size(); ++i)
    if (obs.y[i] && obs.y[i]->size() != model.dims().p)
      throw DimensionError("observation dimension does not match the model");
}

// Eigenvalue inertia of the augmented weight; `pos`/`neg` count eigenvalues
// beyond a scale-relative tolerance, `singular` flags anything in between.
struct Inertia {
  int pos = 0;
  int neg = 0;
  bool singular = false;
};

Inertia inertia_of(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Inertia out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lambda = es.eigenvalues()[i];
    if (lambda > 1e-12 * scale)
      ++out.pos;
    else if (lambda < -1e-12 * scale)
      ++out.neg;
    else
      out.singular = true;
  }
  return out;
}

// Shared level-order driver. `update` maps (node, predicted mean, predicted
// covariance) to the filtered pair and the gain actually applied.
template <typename UpdateFn>
FilterReport filtered_pass(const MultiscaleModel& model, const TreeSignal& obs,
                           UpdateFn&& update) {
  require_signal_shape(model, obs);
  const TreeTopology& topo = model.topology();

  FilterReport report(topo);
  const std::size_t count = static_cast<std::size_t>(topo.node_count());
  report.state.xhat.resize(count);
  report.state.zhat.resize(count);
  report.state.P.resize(count);
  report.state.gain.resize(count);

  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);

    Eigen::VectorXd x_pred;
    Eigen::MatrixXd p_pred;
    if (node.level == 0) {
      x_pred = model.weights().prior_mean;
      p_pred = symmetrized(model.weights().prior_cov);
    } else {
      const std::size_t pidx =
          static_cast<std::size_t>(topo.flat_index(topo.parent(node)));
      x_pred = np.A * report.state.xhat[pidx];
      p_pred = symmetrized(np.A * report.state.P[pidx] * np.A.transpose() +
                           np.B * np.B.transpose());
    }

    auto [x_filt, p_filt, applied_gain] = update(node, x_pred, p_pred);
    report.state.xhat[idx] = std::move(x_filt);
    report.state.P[idx] = std::move(p_filt);
    report.state.gain[idx] = std::move(applied_gain);
    report.state.zhat[idx] = np.L * report.state.xhat[idx];
  }
  report.per_level_cov_trace = mean_trace_per_level(topo, report.state.P);
  return report;
}

}  // namespace

std::string filter_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::PredictorHinf:
      return "predictor_hinf";
    case FilterKind::CurrentHinf:
      return "current_hinf";
    case FilterKind::Kalman:
      return "kalman";
  }
  throw ArgumentError("unknown filter kind");
}

FilterKind filter_from_name(const std::string& name) {
  if (name == "predictor_hinf") return FilterKind::PredictorHinf;
  if (name == "current_hinf") return FilterKind::CurrentHinf;
  if (name == "kalman") return FilterKind::Kalman;
  throw ArgumentError("unknown filter '" + name +
                      "' (expected predictor_hinf, current_hinf or kalman)");
}

FilterReport run_predictor_hinf(const MultiscaleModel& model,
                                const TreeSignal& obs) {
  require_signal_shape(model, obs);
  const TreeTopology& topo = model.topology();
  const Dims& d = model.dims();
  const double gamma = model.weights().gamma;

  const std::vector<std::uint8_t> mask = observation_mask(obs);
  const RiccatiState rs = sweep(model, gamma, &mask);
  if (!rs.feasible)
    throw InfeasibleError(*rs.first_failure,
                          "H-infinity recursion infeasible for gamma " +
                              std::to_string(gamma));

  FilterReport report(topo);
  const std::size_t count = static_cast<std::size_t>(topo.node_count());
  report.state.xhat.resize(count);
  report.state.zhat.resize(count);
  report.state.P.resize(count);
  report.state.gain.assign(count, Eigen::MatrixXd::Zero(d.n, d.p));
  for (std::size_t i = 0; i < count; ++i) report.state.P[i] = *rs.P[i];

  report.state.xhat[0] = model.weights().prior_mean;
  report.state.zhat[0] = model.params(NodeId{0, 1}).L * report.state.xhat[0];

  for (const NodeId& node : topo.level_order()) {
    if (node.level == topo.depth()) break;
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    const bool has_obs = mask[idx] != 0;
    const Eigen::VectorXd& xp = report.state.xhat[idx];

    Eigen::VectorXd innovation;
    if (has_obs) innovation = *obs.y[idx] - np.C * xp;

    for (const NodeId& child : topo.children(node)) {
      const std::size_t cidx = static_cast<std::size_t>(topo.flat_index(child));
      const NodeParams& cp = model.params(child);
      Eigen::VectorXd xhat = cp.A * xp;
      if (has_obs) {
        NodeParams edge = cp;  // A, B of the edge; observation data of the parent
        edge.C = np.C;
        edge.L = np.L;
        edge.Q = np.Q;
        edge.R = np.R;
        const Eigen::MatrixXd K = gain(report.state.P[idx], edge, gamma);
        xhat += K * innovation;
        report.state.gain[cidx] = K;
      }
      report.state.xhat[cidx] = std::move(xhat);
      report.state.zhat[cidx] = cp.L * report.state.xhat[cidx];
    }
  }

  report.per_level_cov_trace = mean_trace_per_level(topo, report.state.P);
  return report;
}

FilterReport run_current_hinf(const MultiscaleModel& model,
                              const TreeSignal& obs) {
  const Dims d = model.dims();
  const double gamma = model.weights().gamma;
  const Eigen::MatrixXd neg_inv_gamma =
      (-1.0 / gamma) * Eigen::MatrixXd::Identity(d.r, d.r);

  return filtered_pass(model, obs, [&](const NodeId& node,
                                       const Eigen::VectorXd& x_pred,
                                       const Eigen::MatrixXd& p_pred) {
    const std::size_t idx =
        static_cast<std::size_t>(model.topology().flat_index(node));
    const NodeParams& np = model.params(node);
    Eigen::VectorXd x_filt = x_pred;
    Eigen::MatrixXd gain_used = Eigen::MatrixXd::Zero(d.n, d.p);
    Eigen::MatrixXd rtilde;
    Eigen::MatrixXd stacked;  // rows of Rtilde's quadratic term, times p_pred

    if (obs.y[idx]) {
      // Mean correction through the standard innovation gain.
      const Eigen::MatrixXd s_inn =
          symmetrized(np.R + np.C * p_pred * np.C.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(s_inn);
      if (llt.info() != Eigen::Success)
        throw NumericError("singular innovation covariance at node (" +
                           std::to_string(node.level) + ", " +
                           std::to_string(node.index) + ")");
      gain_used = llt.solve(np.C * p_pred).transpose();
      x_filt += gain_used * (*obs.y[idx] - np.C * x_pred);

      Eigen::MatrixXd G(d.p + d.r, d.n);
      G.topRows(d.p) = np.C;
      G.bottomRows(d.r) = np.L;
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d.p + d.r, d.p + d.r);
      D.topLeftCorner(d.p, d.p) = np.R;
      D.bottomRightCorner(d.r, d.r) = neg_inv_gamma;
      stacked = G * p_pred;
      rtilde = symmetrized(D + stacked * G.transpose());

      const Inertia in = inertia_of(rtilde);
      if (in.singular)
        throw NumericError("augmented weight Rtilde is singular at node (" +
                           std::to_string(node.level) + ", " +
                           std::to_string(node.index) + ")");
      if (in.pos != d.p || in.neg != d.r)
        throw InfeasibleError(node,
                              "Rtilde inertia violation: gamma too large for "
                              "the current-measurement estimator");
    } else {
      // No measurement: only the output channel enters the update.
      stacked = np.L * p_pred;
      rtilde = symmetrized(neg_inv_gamma + stacked * np.L.transpose());
      const Inertia in = inertia_of(rtilde);
      if (in.singular)
        throw NumericError("augmented weight Rtilde is singular at node (" +
                           std::to_string(node.level) + ", " +
                           std::to_string(node.index) + ")");
      if (in.neg != d.r)
        throw InfeasibleError(node,
                              "Rtilde inertia violation: gamma too large for "
                              "the current-measurement estimator");
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(rtilde);
    Eigen::MatrixXd p_filt =
        symmetrized(p_pred - stacked.transpose() * lu.solve(stacked));
    if (min_eig(p_filt) <= kEigTol)
      throw InfeasibleError(node,
                            "filtered covariance lost positive definiteness: "
                            "gamma too large for the current-measurement "
                            "estimator");
    return std::make_tuple(std::move(x_filt), std::move(p_filt),
                           std::move(gain_used));
  });
}

FilterReport run_kalman(const MultiscaleModel& model, const TreeSignal& obs) {
  const Dims d = model.dims();
  return filtered_pass(model, obs, [&](const NodeId& node,
                                       const Eigen::VectorXd& x_pred,
                                       const Eigen::MatrixXd& p_pred) {
    const std::size_t idx =
        static_cast<std::size_t>(model.topology().flat_index(node));
    const NodeParams& np = model.params(node);
    if (!obs.y[idx])
      return std::make_tuple(Eigen::VectorXd(x_pred), Eigen::MatrixXd(p_pred),
                             Eigen::MatrixXd(Eigen::MatrixXd::Zero(d.n, d.p)));

    const Eigen::MatrixXd s_inn =
        symmetrized(np.R + np.C * p_pred * np.C.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(s_inn);
    if (llt.info() != Eigen::Success)
      throw NumericError("singular innovation covariance at node (" +
                         std::to_string(node.level) + ", " +
                         std::to_string(node.index) + ")");
    const Eigen::MatrixXd cp = np.C * p_pred;
    const Eigen::MatrixXd K = llt.solve(cp).transpose();
    Eigen::VectorXd x_filt = x_pred + K * (*obs.y[idx] - np.C * x_pred);
    Eigen::MatrixXd p_filt = symmetrized(p_pred - cp.transpose() * llt.solve(cp));
    return std::make_tuple(std::move(x_filt), std::move(p_filt),
                           Eigen::MatrixXd(K));
  });
}

FilterReport run_filter(const MultiscaleModel& model, const TreeSignal& obs,
                        FilterKind kind) {
  switch (kind) {
    case FilterKind::PredictorHinf:
      return run_predictor_hinf(model, obs);
    case FilterKind::CurrentHinf:
      return run_current_hinf(model, obs);
    case FilterKind::Kalman:
      return run_kalman(model, obs);
  }
  throw ArgumentError("unknown filter kind");
}

std::vector<double> estimation_cost_per_level(const TreeSignal& signal,
                                              const FilterReport& report,
                                              const MultiscaleModel& model) {
  if (!(signal.topology == report.topology) ||
      !(signal.topology == model.topology()))
    throw DimensionError("signal, report and model cover different trees");
  const TreeTopology& topo = model.topology();
  std::vector<double> per_level(static_cast<std::size_t>(topo.depth()) + 1, 0.0);
  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const Eigen::VectorXd err = signal.z[idx] - report.state.zhat[idx];
    per_level[static_cast<std::size_t>(node.level)] +=
        err.dot(model.params(node).Q * err);
  }
  return per_level;
}

double estimation_cost(const TreeSignal& signal, const FilterReport& report,
                       const MultiscaleModel& model) {
  double total = 0.0;
  for (double c : estimation_cost_per_level(signal, report, model)) total += c;
  return total;
}

}  // namespace mshinf
