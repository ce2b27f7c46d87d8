#include "maglens/kernels/sampling.hpp"
#include "maglens/volume.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace maglens;

namespace {

VolumeGrid random_grid(std::mt19937_64& rng, Dims dims) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (auto& x : v) x = u(rng);
  return VolumeGrid(dims, Vec3(0.3, 0.5, 0.7), Vec3(-1.0, 0.2, -0.4), std::move(v));
}

kernels::Line random_line(std::mt19937_64& rng, const VolumeGrid& g) {
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  const Vec3 ext = g.box_max() - g.box_min();
  const Vec3 a = g.box_min() + Vec3(u(rng) * ext.x(), u(rng) * ext.y(), u(rng) * ext.z());
  const Vec3 d = testing::random_unit(rng) * (0.05 + 0.2 * u(rng));
  return {{a.x(), a.y(), a.z()}, {d.x(), d.y(), d.z()}};
}

}  // namespace

TEST_CASE("scalar and avx2 kernels are bit-identical") {
  if (!kernels::isa_supported(kernels::Isa::Avx2)) {
    MESSAGE("AVX2 not available; equivalence not exercised");
    return;
  }
  std::mt19937_64 rng(42);
  for (int g = 0; g < 5; ++g) {
    const auto grid = random_grid(rng, {9 + g, 7, 11 - g});
    const auto view = grid.view();
    for (int i = 0; i < 400; ++i) {
      const auto line = random_line(rng, grid);
      const std::size_t n = 1 + rng() % 80;
      std::vector<double> a(n), b(n);
      kernels::scalar::sample_line(view, line, a);
      kernels::avx2::sample_line(view, line, b);
      for (std::size_t k = 0; k < n; ++k) REQUIRE(a[k] == b[k]);
      for (bool interior : {false, true}) {
        kernels::scalar::gradient_line(view, line, interior, a);
        kernels::avx2::gradient_line(view, line, interior, b);
        for (std::size_t k = 0; k < n; ++k) REQUIRE(a[k] == b[k]);
      }
    }
  }
}

TEST_CASE("line kernels match the per-point reference") {
  std::mt19937_64 rng(5);
  const auto grid = random_grid(rng, {6, 8, 5});
  const auto view = grid.view();
  for (int i = 0; i < 200; ++i) {
    const auto line = random_line(rng, grid);
    std::vector<double> out(33);
    kernels::sample_line(view, line, out);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Vec3 p(line.start[0] + k * line.delta[0], line.start[1] + k * line.delta[1],
                   line.start[2] + k * line.delta[2]);
      CHECK(out[k] == doctest::Approx(testing::oracle_sample(grid, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient kernel agrees with central differences") {
  std::mt19937_64 rng(6);
  const auto grid = random_grid(rng, {8, 8, 8});
  const auto view = grid.view();
  const Vec3 s = grid.spacing();
  for (int i = 0; i < 200; ++i) {
    const auto line = random_line(rng, grid);
    std::vector<double> out(17), interior(17);
    kernels::gradient_line(view, line, false, out);
    kernels::gradient_line(view, line, true, interior);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Vec3 p(line.start[0] + k * line.delta[0], line.start[1] + k * line.delta[1],
                   line.start[2] + k * line.delta[2]);
      Vec3 g;
      for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = s[a];
        g[a] = (testing::oracle_sample(grid, p + e) - testing::oracle_sample(grid, p - e)) / (2 * s[a]);
      }
      CHECK(out[k] == doctest::Approx(g.norm()).epsilon(1e-9));
      const double l_margin = 1e-6;
      bool clearly_inside = true, clearly_outside = false;
      for (int a = 0; a < 3; ++a) {
        const double l = (p[a] - grid.origin()[a]) / s[a];
        clearly_inside = clearly_inside && l > 1.0 + l_margin && l < grid.dims()[a] - 2 - l_margin;
        clearly_outside = clearly_outside || l < 1.0 - l_margin || l > grid.dims()[a] - 2 + l_margin;
      }
      if (clearly_inside) CHECK(interior[k] == out[k]);
      if (clearly_outside) CHECK(interior[k] == 0.0);
    }
  }
}

TEST_CASE("isa selection") {
  const auto before = kernels::active_isa();
  CHECK(kernels::set_active_isa(kernels::Isa::Scalar));
  CHECK(kernels::active_isa() == kernels::Isa::Scalar);
  CHECK(kernels::isa_name(kernels::Isa::Scalar) == "scalar");
  kernels::set_active_isa(before);
}
