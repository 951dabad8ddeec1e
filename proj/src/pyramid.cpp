#include "mshinf/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mshinf/errors.hpp"

namespace mshinf {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

// Shared by both observation builders once the per-node truth is known.
TreeSignal truth_to_observations(const std::vector<double>& truth_by_flat,
                                 const MultiscaleModel& model,
                                 const NoiseSpec& noise, std::uint64_t seed,
                                 const std::vector<int>& missing_levels) {
  const Dims& d = model.dims();
  if (d.n != 1 || d.p != 1 || d.q != 1)
    throw DimensionError(
        "stack observations require a scalar-state model (n = p = q = 1)");
  const TreeTopology& topo = model.topology();

  TreeSignal signal(topo);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double v_std = std::sqrt(noise.v_var);

  for (const NodeId& node : topo.level_order()) {
    const std::size_t idx = static_cast<std::size_t>(topo.flat_index(node));
    const NodeParams& np = model.params(node);
    signal.x[idx] = Eigen::VectorXd::Constant(1, truth_by_flat[idx]);
    if (node.level == 0) {
      signal.w[idx] = Eigen::VectorXd(0);
    } else {
      // Back-solve the disturbance that realizes this transition.
      const std::size_t pidx =
          static_cast<std::size_t>(topo.flat_index(topo.parent(node)));
      const double residual =
          truth_by_flat[idx] - np.A(0, 0) * truth_by_flat[pidx];
      if (np.B(0, 0) == 0.0 && residual != 0.0)
        throw NumericError(
            "stack transition cannot be realized: B = 0 but the truth moves");
      const double w = np.B(0, 0) == 0.0 ? 0.0 : residual / np.B(0, 0);
      signal.w[idx] = Eigen::VectorXd::Constant(1, w);
    }
    const double v = v_std * unit(rng);
    signal.v[idx] = Eigen::VectorXd::Constant(1, v);
    signal.y[idx] = np.C * signal.x[idx] + *signal.v[idx];
    signal.z[idx] = np.L * signal.x[idx];
  }
  remove_observations(signal, missing_levels);
  return signal;
}

}  // namespace

ImagePlane::ImagePlane(int side_, std::vector<double> samples_)
    : side(side_), samples(std::move(samples_)) {
  if (!is_power_of_two(side))
    throw ArgumentError("image side must be a power of two, got " +
                        std::to_string(side));
  if (samples.size() != static_cast<std::size_t>(side) * side)
    throw DimensionError("sample count does not match side * side");
  for (double s : samples)
    if (s < -1e-12 || s > 1.0 + 1e-12)
      throw ArgumentError("image samples must lie in [0, 1]");
}

PyramidStack build_pyramid(const ImagePlane& finest) {
  PyramidStack stack;
  const int depth = log2_exact(finest.side);
  stack.planes.resize(static_cast<std::size_t>(depth) + 1);
  stack.planes[static_cast<std::size_t>(depth)] = finest;
  for (int k = depth - 1; k >= 0; --k) {
    const ImagePlane& fine = stack.planes[static_cast<std::size_t>(k) + 1];
    const int side = 1 << k;
    std::vector<double> coarse(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        coarse[static_cast<std::size_t>(r) * side + c] =
            0.25 * (fine.at(2 * r, 2 * c) + fine.at(2 * r, 2 * c + 1) +
                    fine.at(2 * r + 1, 2 * c) + fine.at(2 * r + 1, 2 * c + 1));
    stack.planes[static_cast<std::size_t>(k)] = ImagePlane(side, std::move(coarse));
  }
  return stack;
}

DyadicStack step_signal(int levels, const std::vector<double>& breakpoints,
                        const std::vector<double>& values) {
  if (levels < 1) throw ArgumentError("step_signal needs at least one level");
  if (values.size() != breakpoints.size() + 1)
    throw ArgumentError("step_signal needs one more value than breakpoints");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints[i] < 0.0 || breakpoints[i] > 1.0)
      throw ArgumentError("breakpoints must lie in [0, 1]");
    if (i > 0 && breakpoints[i] < breakpoints[i - 1])
      throw ArgumentError("breakpoints must be sorted ascending");
  }

  DyadicStack stack;
  stack.levels.resize(static_cast<std::size_t>(levels) + 1);
  const std::int64_t finest = std::int64_t{1} << levels;
  auto& fine = stack.levels[static_cast<std::size_t>(levels)];
  fine.resize(static_cast<std::size_t>(finest));
  for (std::int64_t i = 0; i < finest; ++i) {
    const double left = static_cast<double>(i) / static_cast<double>(finest);
    std::size_t piece = 0;
    while (piece < breakpoints.size() && breakpoints[piece] <= left) ++piece;
    fine[static_cast<std::size_t>(i)] = values[piece];
  }
  for (int k = levels - 1; k >= 0; --k) {
    const auto& finer = stack.levels[static_cast<std::size_t>(k) + 1];
    auto& coarse = stack.levels[static_cast<std::size_t>(k)];
    coarse.resize(finer.size() / 2);
    for (std::size_t i = 0; i < coarse.size(); ++i)
      coarse[i] = 0.5 * (finer[2 * i] + finer[2 * i + 1]);
  }
  return stack;
}

void morton_decode(int level, std::int64_t index, int& row, int& col) {
  if (level < 0 || index < 1 || index > (std::int64_t{1} << (2 * level)))
    throw ArgumentError("morton_decode: index outside the level");
  std::int64_t bits = index - 1;
  row = 0;
  col = 0;
  for (int i = 0; i < level; ++i) {
    col |= static_cast<int>((bits >> (2 * i)) & 1) << i;
    row |= static_cast<int>((bits >> (2 * i + 1)) & 1) << i;
  }
}

std::int64_t morton_encode(int level, int row, int col) {
  if (level < 0 || row < 0 || col < 0 || row >= (1 << level) ||
      col >= (1 << level))
    throw ArgumentError("morton_encode: pixel outside the level");
  std::int64_t bits = 0;
  for (int i = 0; i < level; ++i) {
    bits |= static_cast<std::int64_t>((col >> i) & 1) << (2 * i);
    bits |= static_cast<std::int64_t>((row >> i) & 1) << (2 * i + 1);
  }
  return bits + 1;
}

TreeSignal pyramid_to_observations(const PyramidStack& stack,
                                   const MultiscaleModel& model,
                                   const NoiseSpec& noise, std::uint64_t seed,
                                   const std::vector<int>& missing_levels) {
  const TreeTopology& topo = model.topology();
  if (topo.arity() != 4)
    throw DimensionError("pyramid observations require a quadtree model");
  if (stack.depth() != topo.depth())
    throw DimensionError("pyramid depth " + std::to_string(stack.depth()) +
                         " does not match the model depth " +
                         std::to_string(topo.depth()));

  std::vector<double> truth(static_cast<std::size_t>(topo.node_count()));
  for (const NodeId& node : topo.level_order()) {
    int row = 0, col = 0;
    morton_decode(node.level, node.index, row, col);
    truth[static_cast<std::size_t>(topo.flat_index(node))] =
        stack.planes[static_cast<std::size_t>(node.level)].at(row, col);
  }
  return truth_to_observations(truth, model, noise, seed, missing_levels);
}

TreeSignal dyadic_to_observations(const DyadicStack& stack,
                                  const MultiscaleModel& model,
                                  const NoiseSpec& noise, std::uint64_t seed,
                                  const std::vector<int>& missing_levels) {
  const TreeTopology& topo = model.topology();
  if (topo.arity() != 2)
    throw DimensionError("dyadic observations require an arity-2 model");
  if (stack.depth() != topo.depth())
    throw DimensionError("stack depth does not match the model depth");

  std::vector<double> truth(static_cast<std::size_t>(topo.node_count()));
  for (const NodeId& node : topo.level_order())
    truth[static_cast<std::size_t>(topo.flat_index(node))] =
        stack.levels[static_cast<std::size_t>(node.level)]
                    [static_cast<std::size_t>(node.index - 1)];
  return truth_to_observations(truth, model, noise, seed, missing_levels);
}

ImagePlane estimates_to_image(const FilterReport& report, int level) {
  const TreeTopology& topo = report.topology;
  if (topo.arity() != 4)
    throw ArgumentError("estimates_to_image requires a quadtree report");
  if (level < 0 || level > topo.depth())
    throw ArgumentError("level " + std::to_string(level) +
                        " outside the report's range [0, " +
                        std::to_string(topo.depth()) + "]");

  const int side = 1 << level;
  std::vector<double> samples(static_cast<std::size_t>(side) * side);
  for (std::int64_t m = 1; m <= topo.nodes_at(level); ++m) {
    int row = 0, col = 0;
    morton_decode(level, m, row, col);
    const Eigen::VectorXd& xhat =
        report.state.xhat[static_cast<std::size_t>(
            topo.flat_index(NodeId{level, m}))];
    if (xhat.size() != 1)
      throw DimensionError("estimates_to_image requires scalar states");
    samples[static_cast<std::size_t>(row) * side + col] =
        std::clamp(xhat(0), 0.0, 1.0);
  }
  return ImagePlane(side, std::move(samples));
}

}  // namespace mshinf
