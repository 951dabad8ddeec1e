#include "mshinf/pyramid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mshinf/errors.hpp"
#include "mshinf/image_io.hpp"

using namespace mshinf;

namespace {

ImagePlane random_plane(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> samples(static_cast<std::size_t>(side) * side);
  for (double& s : samples) s = dist(rng);
  return ImagePlane(side, std::move(samples));
}

MultiscaleModel scalar_tree_model(int depth, int arity, double gamma = 0.5) {
  Dims dims{1, 1, 1, 1};
  NodeParams np = NodeParams::identity(dims);
  GameWeights w;
  w.gamma = gamma;
  w.prior_mean = Eigen::VectorXd::Zero(1);
  w.prior_cov = Eigen::MatrixXd::Identity(1, 1);
  return MultiscaleModel::uniform(TreeTopology(depth, arity), dims, np, w);
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("a 2x2 plane averages to its mean") {
  ImagePlane plane(2, {0.0, 0.0, 1.0, 1.0});
  auto stack = build_pyramid(plane);
  REQUIRE(stack.planes.size() == 2);
  CHECK(stack.planes[0].samples[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("a constant image is a fixed point of averaging") {
  ImagePlane plane(8, std::vector<double>(64, 0.37));
  auto stack = build_pyramid(plane);
  for (const ImagePlane& p : stack.planes)
    for (double s : p.samples) CHECK(s == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("the coarse plane of a ramp equals independent block means") {
  std::vector<double> samples(16);
  for (int i = 0; i < 16; ++i) samples[i] = static_cast<double>(i) / 15.0;
  ImagePlane plane(4, samples);
  auto stack = build_pyramid(plane);
  const ImagePlane& coarse = stack.planes[1];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc) mean += plane.at(2 * r + dr, 2 * c + dc);
      mean /= 4.0;
      CHECK(coarse.at(r, c) == doctest::Approx(mean).epsilon(1e-15));
    }
}

TEST_CASE("every stack level obeys the block-mean invariant") {
  auto stack = build_pyramid(random_plane(64, 3));
  for (std::size_t k = 0; k + 1 < stack.planes.size(); ++k) {
    const ImagePlane& coarse = stack.planes[k];
    const ImagePlane& fine = stack.planes[k + 1];
    for (int r = 0; r < coarse.side; ++r)
      for (int c = 0; c < coarse.side; ++c) {
        const double mean =
            0.25 * (fine.at(2 * r, 2 * c) + fine.at(2 * r, 2 * c + 1) +
                    fine.at(2 * r + 1, 2 * c) + fine.at(2 * r + 1, 2 * c + 1));
        CHECK(std::abs(coarse.at(r, c) - mean) <= 1e-12);
      }
  }
}

TEST_CASE("per-plane variance never grows toward the coarse end") {
  auto stack = build_pyramid(random_plane(32, 9));
  auto variance = [](const ImagePlane& p) {
    double mean = 0.0;
    for (double s : p.samples) mean += s;
    mean /= static_cast<double>(p.samples.size());
    double var = 0.0;
    for (double s : p.samples) var += (s - mean) * (s - mean);
    return var / static_cast<double>(p.samples.size());
  };
  for (std::size_t k = 0; k + 1 < stack.planes.size(); ++k)
    CHECK(variance(stack.planes[k]) <= variance(stack.planes[k + 1]) + 1e-12);
}

TEST_CASE("non power-of-two planes are rejected") {
  CHECK_THROWS_AS(ImagePlane(3, std::vector<double>(9, 0.0)),
                  mshinf::ArgumentError);
  CHECK_THROWS_AS(ImagePlane(4, std::vector<double>(12, 0.0)),
                  mshinf::DimensionError);
  CHECK_THROWS_AS(ImagePlane(2, {0.0, 0.5, 2.0, 1.0}), mshinf::ArgumentError);
}

TEST_CASE("morton mapping is a bijection that matches a bit-twiddling oracle") {
  for (int level : {1, 2, 3}) {
    const int side = 1 << level;
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        const std::int64_t m = morton_encode(level, r, c);
        int rr = 0, cc = 0;
        morton_decode(level, m, rr, cc);
        CHECK(rr == r);
        CHECK(cc == c);

        // Independent decode: peel two bits per split, most significant
        // pair first.
        std::int64_t bits = m - 1;
        int or_ = 0, oc = 0;
        for (int i = level - 1; i >= 0; --i) {
          or_ = (or_ << 1) | static_cast<int>((bits >> (2 * i + 1)) & 1);
          oc = (oc << 1) | static_cast<int>((bits >> (2 * i)) & 1);
        }
        CHECK(or_ == r);
        CHECK(oc == c);
      }
  }
}

TEST_CASE("the quadrant (0,1) of the root block is its second child") {
  CHECK(morton_encode(1, 0, 1) == 2);
  CHECK(morton_encode(1, 0, 0) == 1);
  CHECK(morton_encode(1, 1, 0) == 3);
  CHECK(morton_encode(1, 1, 1) == 4);
}

TEST_CASE("pyramid observations round trip through estimates_to_image") {
  auto model = scalar_tree_model(3, 4);
  auto stack = build_pyramid(random_plane(8, 21));
  auto signal = pyramid_to_observations(stack, model, NoiseSpec{1.0, 0.0}, 5);

  // Zero noise: observations equal the plane pixels exactly.
  for (const NodeId& node : model.topology().level_order()) {
    int r = 0, c = 0;
    morton_decode(node.level, node.index, r, c);
    const auto idx = model.topology().flat_index(node);
    CHECK((*signal.y[idx])(0) ==
          stack.planes[static_cast<std::size_t>(node.level)].at(r, c));
  }

  // A perfect report reproduces every plane.
  FilterReport perfect(model.topology());
  perfect.state.xhat = signal.x;
  perfect.state.zhat = signal.z;
  perfect.state.P.assign(signal.x.size(), Eigen::MatrixXd::Zero(1, 1));
  perfect.state.gain.assign(signal.x.size(), Eigen::MatrixXd::Zero(1, 1));
  for (int k = 0; k <= 3; ++k) {
    const ImagePlane plane = estimates_to_image(perfect, k);
    CHECK(plane.samples == stack.planes[static_cast<std::size_t>(k)].samples);
  }
}

TEST_CASE("estimates_to_image clamps out-of-range values") {
  auto model = scalar_tree_model(1, 4);
  FilterReport report(model.topology());
  const std::size_t count = 5;
  report.state.xhat.assign(count, Eigen::VectorXd::Constant(1, 1.3));
  report.state.zhat = report.state.xhat;
  report.state.P.assign(count, Eigen::MatrixXd::Zero(1, 1));
  report.state.gain.assign(count, Eigen::MatrixXd::Zero(1, 1));
  report.state.xhat[1] = Eigen::VectorXd::Constant(1, -0.4);
  const ImagePlane plane = estimates_to_image(report, 1);
  CHECK(plane.at(0, 0) == 0.0);  // node (1,1) clamped up from -0.4
  CHECK(plane.at(0, 1) == 1.0);  // clamped down from 1.3
  CHECK_THROWS_AS((void)estimates_to_image(report, 2), mshinf::ArgumentError);
}

TEST_CASE("observation noise variance matches the spec") {
  auto model = scalar_tree_model(6, 4);
  ImagePlane flat(64, std::vector<double>(4096, 0.5));
  auto stack = build_pyramid(flat);
  auto signal = pyramid_to_observations(stack, model, NoiseSpec{1.0, 0.02}, 77);
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < signal.y.size(); ++i) {
    const double diff = (*signal.y[i])(0) - signal.x[i](0);
    sum_sq += diff * diff;
    ++count;
  }
  const double var = sum_sq / static_cast<double>(count);
  CHECK(var > 0.02 * 0.7);
  CHECK(var < 0.02 * 1.3);
}

TEST_CASE("step signal samples the pieces and averages pairwise") {
  auto stack = step_signal(3, {0.5}, {0.0, 1.0});
  REQUIRE(stack.levels.size() == 4);
  const std::vector<double> expected{0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(stack.levels[3] == expected);
  CHECK(stack.levels[2] == std::vector<double>{0, 0, 1, 1});
  CHECK(stack.levels[0] == std::vector<double>{0.5});
}

TEST_CASE("constant step signals stay constant at every level") {
  auto stack = step_signal(4, {}, {0.7});
  for (const auto& level : stack.levels)
    for (double s : level) CHECK(s == 0.7);
}

TEST_CASE("step signal level sizes double down the stack") {
  auto stack = step_signal(6, {0.3, 0.6}, {0.1, 0.5, 0.9});
  REQUIRE(stack.levels.size() == 7);
  for (int k = 0; k <= 6; ++k)
    CHECK(stack.levels[static_cast<std::size_t>(k)].size() ==
          static_cast<std::size_t>(1) << k);
}

TEST_CASE("unsorted breakpoints are rejected") {
  CHECK_THROWS_AS((void)step_signal(3, {0.6, 0.3}, {0, 1, 2}),
                  mshinf::ArgumentError);
  CHECK_THROWS_AS((void)step_signal(3, {1.5}, {0, 1}), mshinf::ArgumentError);
  CHECK_THROWS_AS((void)step_signal(3, {0.5}, {0.0}), mshinf::ArgumentError);
}

TEST_CASE("dyadic observations place samples in index order") {
  auto model = scalar_tree_model(3, 2);
  auto stack = step_signal(3, {0.5}, {0.0, 1.0});
  auto signal = dyadic_to_observations(stack, model, NoiseSpec{1.0, 0.0}, 1);
  for (const NodeId& node : model.topology().level_order()) {
    const auto idx = model.topology().flat_index(node);
    CHECK(signal.x[idx](0) ==
          stack.levels[static_cast<std::size_t>(node.level)]
                      [static_cast<std::size_t>(node.index - 1)]);
  }
}

TEST_CASE("pgm files round trip bit exactly") {
  const auto path = temp_file("mshinf_test_roundtrip.pgm");
  write_pgm(path.string(), random_plane(16, 5));
  const ImagePlane again = read_pgm(path.string());
  const auto path2 = temp_file("mshinf_test_roundtrip2.pgm");
  write_pgm(path2.string(), again);

  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string bytes_a((std::istreambuf_iterator<char>(a)),
                      std::istreambuf_iterator<char>());
  std::string bytes_b((std::istreambuf_iterator<char>(b)),
                      std::istreambuf_iterator<char>());
  CHECK(bytes_a == bytes_b);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("pgm reader rejects wrong formats") {
  const auto path = temp_file("mshinf_test_bad.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n4 4\n65535\n";
    out << std::string(32, '\0');
  }
  CHECK_THROWS_AS((void)read_pgm(path.string()), mshinf::IoError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n4 2\n255\n" << std::string(8, '\0');
  }
  CHECK_THROWS_AS((void)read_pgm(path.string()), mshinf::IoError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n3 3\n255\n" << std::string(9, '\0');
  }
  CHECK_THROWS_AS((void)read_pgm(path.string()), mshinf::IoError);
  std::filesystem::remove(path);
}

TEST_CASE("ppm files carry three independent channels") {
  RgbImage image;
  image.channels.push_back(random_plane(8, 1));
  image.channels.push_back(random_plane(8, 2));
  image.channels.push_back(random_plane(8, 3));
  const auto path = temp_file("mshinf_test_rgb.ppm");
  write_ppm(path.string(), image);
  CHECK(is_ppm_file(path.string()));
  const RgbImage again = read_ppm(path.string());
  for (int ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < 64; ++i) {
      const double q =
          std::round(image.channels[ch].samples[i] * 255.0) / 255.0;
      CHECK(again.channels[ch].samples[i] == doctest::Approx(q).epsilon(1e-12));
    }
  std::filesystem::remove(path);
}
