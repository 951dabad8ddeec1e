#pragma once

#include <cstdint>
#include <vector>

#include "mshinf/filters.hpp"
#include "mshinf/model.hpp"

namespace mshinf {

/// Square grayscale plane with power-of-two side; samples are row-major
/// doubles in [0, 1].
struct ImagePlane {
  int side = 1;
  std::vector<double> samples;

  ImagePlane() : samples(1, 0.0) {}
  ImagePlane(int side_, std::vector<double> samples_);

  double at(int row, int col) const {
    return samples[static_cast<std::size_t>(row) * side + col];
  }
  double& at(int row, int col) {
    return samples[static_cast<std::size_t>(row) * side + col];
  }
};

/// Multiresolution image stack, coarse to fine; plane k has side 2^k and
/// each coarse pixel is the mean of its 2x2 block one plane finer.
struct PyramidStack {
  std::vector<ImagePlane> planes;

  int depth() const { return static_cast<int>(planes.size()) - 1; }
};

/// 1-D analogue: per-level sample arrays on a dyadic tree, coarse to fine,
/// level k holding 2^k samples.
struct DyadicStack {
  std::vector<std::vector<double>> levels;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
};

/// Recursive 2x2 averaging down to the 1x1 global mean.
PyramidStack build_pyramid(const ImagePlane& finest);

/// Piecewise-constant function on [0, 1] sampled at 2^levels points, then
/// pairwise-averaged up to the root. `breakpoints` must be sorted and lie in
/// [0, 1]; `values` has one more entry than `breakpoints`.
DyadicStack step_signal(int levels, const std::vector<double>& breakpoints,
                        const std::vector<double>& values);

/// Maps quadtree node indices to pixel coordinates: the children of a node
/// are its 2x2 pixel block, ordered row-major within the block (Z order).
/// `index` is the 1-based node index at `level`; the plane side is 2^level.
void morton_decode(int level, std::int64_t index, int& row, int& col);
std::int64_t morton_encode(int level, int row, int col);

/// Loads the stack onto a quadtree model as ground truth: node (k, m) takes
/// the Morton-mapped pixel of plane k as its latent scalar state, implied
/// disturbances are back-solved from the dynamics, and observations
/// y = x + v carry Gaussian noise of variance `noise.v_var` (stages listed
/// in `missing_levels` record nothing). Requires a scalar-state model whose
/// topology matches the stack.
TreeSignal pyramid_to_observations(const PyramidStack& stack,
                                   const MultiscaleModel& model,
                                   const NoiseSpec& noise, std::uint64_t seed,
                                   const std::vector<int>& missing_levels = {});

/// Same construction for the 1-D dyadic stack: node (k, m) takes sample m-1
/// of level k.
TreeSignal dyadic_to_observations(const DyadicStack& stack,
                                  const MultiscaleModel& model,
                                  const NoiseSpec& noise, std::uint64_t seed,
                                  const std::vector<int>& missing_levels = {});

/// Reads one level of estimates back into an image via the inverse Morton
/// map, clamping to [0, 1].
ImagePlane estimates_to_image(const FilterReport& report, int level);

}  // namespace mshinf
