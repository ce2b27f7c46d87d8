#include "maglens/render.hpp"

#include "maglens/cli.hpp"
#include "maglens/image_io.hpp"
#include "maglens/session.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace maglens;

namespace {

const EffectDescriptor kDerivative(FieldTransform::GradientMagnitude, std::nullopt);
const EffectDescriptor kMip(std::nullopt, Integrator::MaximumIntensity);

SceneState scene_with(std::shared_ptr<const VolumeGrid> grid) {
  SceneState s;
  s.volume = make_volume_asset(std::move(grid), VolumeSource::none());
  return s;
}

Camera looking_down_z(Vec3 at, int w, int h, double fov = 60) {
  Camera c;
  c.pose = Pose(at, Quat::Identity());
  c.width = w;
  c.height = h;
  c.fov_deg = fov;
  return c;
}

Lens disc(std::uint32_t id, Vec3 c, double r, EffectDescriptor e) {
  Lens l;
  l.id = LensId{id};
  l.pose = Pose(c, Quat::Identity());
  l.radius = r;
  l.front_effect = e;
  l.back_effect = e;
  return l;
}

bool is_background(const std::uint8_t* px, Rgb bg = kDefaultBackground) {
  return px[0] == bg[0] && px[1] == bg[1] && px[2] == bg[2] && px[3] == 255;
}

std::shared_ptr<const VolumeGrid> smooth_grid(int n) {
  const double h = 1.0 / (n - 1);
  return std::make_shared<const VolumeGrid>(testing::make_grid(
      {n, n, n}, Vec3::Constant(h), Vec3::Constant(-0.5), [](const Vec3& p) {
        return 0.5 + 0.4 * std::sin(2.1 * p.x() + 0.3) * std::cos(1.7 * p.y() - 0.2) * std::cos(2.3 * p.z());
      }));
}

}  // namespace

TEST_CASE("camera invariants and rays") {
  Camera c;
  CHECK(c.check_invariants().empty());
  c.fov_deg = 5;
  CHECK_FALSE(c.check_invariants().empty());
  c = looking_down_z(Vec3::Zero(), 4, 2, 90);
  const Ray center = c.pixel_ray(2, 1);  // pixel centers straddle the axis
  CHECK(center.direction.z() < 0);
  const auto p = c.project(Vec3(0, 0, -3));
  REQUIRE(p);
  CHECK((*p)[0] == doctest::Approx(1.5));
  CHECK((*p)[1] == doctest::Approx(0.5));
  CHECK_FALSE(c.project(Vec3(0, 0, 3)));
  // pixel_ray and project are inverse.
  Camera d = looking_down_z(Vec3(1, 2, 3), 64, 48, 50);
  d.pose.set_orientation(quat_from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7));
  for (int y = 0; y < 48; y += 7)
    for (int x = 0; x < 64; x += 9) {
      const auto q = d.project(d.pixel_ray(x, y).at(2.5));
      CHECK((*q)[0] == doctest::Approx(x));
      CHECK((*q)[1] == doctest::Approx(y));
    }
}

TEST_CASE("transfer function") {
  const auto tf = TransferFunction::default_tf();
  CHECK(tf.evaluate(0.0).opacity == 0.0);
  CHECK(tf.evaluate(0.45).opacity == doctest::Approx(0.04));
  CHECK(tf.evaluate(1.0).gray == 0.9);
  CHECK(TransferFunction::from_record(tf.to_record()) == tf);
  CHECK_THROWS_AS(TransferFunction({{0.1, 0, 0}, {1, 1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(TransferFunction({{0, 0, 0}, {0.5, 1, 1}, {0.5, 1, 1}, {1, 1, 1}}), std::invalid_argument);
}

TEST_CASE("empty scene renders uniform background") {
  const auto fb = render_frame(SceneState{}, looking_down_z(Vec3::Zero(), 16, 12), TransferFunction::default_tf());
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) CHECK(is_background(fb.pixel(x, y)));
}

TEST_CASE("transparent volume shows only the background and rings") {
  auto grid = std::make_shared<const VolumeGrid>(Dims{4, 4, 4}, Vec3::Constant(0.5), Vec3::Constant(-0.75),
                                                 std::vector<double>(64, 0.0));
  SceneState s = scene_with(grid);
  s.insert(disc(1, Vec3(0, 0, -1), 0.3, kMip));
  const Camera cam = looking_down_z(Vec3(0, 0, 2), 64, 48);
  const auto fb = render_frame(s, cam, TransferFunction::default_tf());
  RenderSettings no_rings;
  no_rings.draw_rings = false;
  const auto plain = render_frame(s, cam, TransferFunction::default_tf(), no_rings);
  int ring = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      CHECK(is_background(plain.pixel(x, y)));
      if (!is_background(fb.pixel(x, y))) {
        ++ring;
        CHECK(fb.pixel(x, y)[0] == kRingIdle[0]);
      }
    }
  CHECK(ring > 0);
}

TEST_CASE("segment integration: flat field derivative MIP contributes nothing") {
  const VolumeGrid g({8, 8, 8}, Vec3::Constant(0.1), Vec3::Zero(), std::vector<double>(512, 0.4));
  const auto tf = TransferFunction::default_tf();
  SegmentContext ctx{&g, &tf, 0.05, 0.1, 0.0, 1.0};
  const std::vector<EffectDescriptor> stack{kDerivative, kMip};
  RayAccumulator acc;
  integrate_segment(ctx, Ray(Vec3(0.35, 0.35, 0.0), Vec3(0, 0, 1)), 0.0, 0.7, compose_effects(stack), acc);
  CHECK(acc.color == 0.0);
  CHECK(acc.alpha == 0.0);
  CHECK_FALSE(acc.terminated);
}

TEST_CASE("segment integration: MIP over a single spike is 1") {
  std::vector<double> v(125, 0.0);
  const VolumeGrid g({5, 5, 5}, Vec3::Ones(), Vec3::Zero(), v);
  v[g.index(2, 2, 2)] = 1.0;
  const VolumeGrid spike({5, 5, 5}, Vec3::Ones(), Vec3::Zero(), v);
  const auto tf = TransferFunction::default_tf();
  SegmentContext ctx{&spike, &tf, 0.5, 1.0, 0.0, 1.0};
  const std::vector<EffectDescriptor> stack{kMip};
  RayAccumulator acc;
  std::vector<double> sampled;
  integrate_segment(ctx, Ray(Vec3(2, 2, 0), Vec3(0, 0, 1)), 0.0, 4.0, compose_effects(stack), acc, nullptr, &sampled);
  CHECK(acc.color == 1.0);
  CHECK(acc.alpha == 1.0);
  CHECK(acc.terminated);
  CHECK(sampled.size() >= 8);
}

TEST_CASE("MIP matches the refined-step oracle and bounds every sample") {
  const auto grid = smooth_grid(32);
  SceneState s = scene_with(grid);
  s.insert(disc(1, Vec3(0, 0, 0.8), 1.5, kMip));
  const Camera cam = looking_down_z(Vec3(0, 0, 1.5), 24, 24, 40);
  RenderSettings settings;
  const double step = 0.5 * grid->min_spacing();
  double worst = 0.0;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      const Ray ray = cam.pixel_ray(x, y);
      const auto acc = integrate_ray(s, TransferFunction::default_tf(), ray, settings);
      double t0, t1;
      if (!acc || !intersect_box(ray, grid->box_min(), grid->box_max(), t0, t1)) continue;
      double oracle = 0.0;
      for (double t = std::max(t0, 0.0); t < t1; t += step / 10) {
        oracle = std::max(oracle, testing::oracle_sample(*grid, ray.at(t)));
      }
      worst = std::max(worst, std::abs(acc->color - oracle));
    }
  MESSAGE("worst MIP deviation " << worst);
  CHECK(worst < 1e-3);

  // Lower bound: the reported peak is at least every sampled value.
  const auto tf = TransferFunction::default_tf();
  SegmentContext ctx{grid.get(), &tf, step, grid->min_spacing(), 0.0, 1.0};
  const std::vector<EffectDescriptor> stack{kMip};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Ray ray(Vec3(0, 0, 0) - testing::random_unit(rng), testing::random_unit(rng));
    RayAccumulator acc;
    std::vector<double> sampled;
    integrate_segment(ctx, ray, 0.0, 2.0, compose_effects(stack), acc, nullptr, &sampled);
    for (double v : sampled) CHECK(acc.color >= v);
  }
}

TEST_CASE("accumulated opacity is monotone and bounded") {
  const auto grid = smooth_grid(24);
  SceneState s = scene_with(grid);
  const Camera cam = looking_down_z(Vec3(0, 0, 1.5), 32, 32, 45);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      std::vector<double> trace;
      integrate_ray(s, TransferFunction::default_tf(), cam.pixel_ray(x, y), {}, &trace);
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
      for (double a : trace) CHECK(a <= 1.0);
    }
}

TEST_CASE("nested derivative lenses apply the gradient twice") {
  const auto grid = smooth_grid(24);
  const auto tf = TransferFunction::default_tf();
  SegmentContext ctx{grid.get(), &tf, 0.02, grid->min_spacing(), 0.0, 1.0};
  const std::vector<FieldTransform> once{FieldTransform::GradientMagnitude};
  const std::vector<FieldTransform> twice{FieldTransform::GradientMagnitude, FieldTransform::GradientMagnitude};
  const Vec3 p(0.05, -0.1, 0.12);
  const double g1 = shaded_value(ctx, p, once, 1.0);
  CHECK(g1 == doctest::Approx(std::min(1.0, gradient_central(*grid, p).norm())));
  // Oracle: central differences of the single-derivative field.
  const Vec3 h = grid->spacing();
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h[a];
    g[a] = (shaded_value(ctx, p + e, once, 1.0) - shaded_value(ctx, p - e, once, 1.0)) / (2 * h[a]);
  }
  CHECK(shaded_value(ctx, p, twice, 1.0) == doctest::Approx(std::min(1.0, g.norm())));
}

TEST_CASE("lenses only change pixels whose rays hit a disc") {
  const SceneState base = overview_scene();
  SceneState lensed = base;
  Lens a = disc(1, Vec3(-0.4, -1.6, 0.1), 0.25, kMip);
  a.pose.set_orientation(base.head.orientation());
  Lens b = disc(2, Vec3(0.5, -1.2, -0.1), 0.3, kDerivative);
  b.pose.set_orientation(base.head.orientation() * quat_from_axis_angle(Vec3::UnitY(), 0.5));
  lensed.insert(a);
  lensed.insert(b);
  const Camera cam = overview_camera(80, 60);
  RenderSettings no_rings;
  no_rings.draw_rings = false;
  const auto f0 = render_frame(base, cam, TransferFunction::default_tf(), no_rings);
  const auto f1 = render_frame(lensed, cam, TransferFunction::default_tf(), no_rings);
  int touched = 0, same = 0;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x) {
      const Ray r = cam.pixel_ray(x, y);
      if (ray_disc_hit(a, r) || ray_disc_hit(b, r)) {
        ++touched;
        continue;
      }
      ++same;
      CHECK(std::equal(f0.pixel(x, y), f0.pixel(x, y) + 4, f1.pixel(x, y)));
    }
  CHECK(touched > 50);
  CHECK(same > 1000);
}

TEST_CASE("halving the step changes DVR luminance by at most 2") {
  const SceneState s = overview_scene();
  const Camera cam = overview_camera(80, 60);
  RenderSettings coarse, fine;
  coarse.step = 0.5 * s.volume->grid->min_spacing();
  fine.step = 0.5 * coarse.step;
  const auto a = render_frame(s, cam, TransferFunction::default_tf(), coarse);
  const auto b = render_frame(s, cam, TransferFunction::default_tf(), fine);
  double worst = 0;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x) worst = std::max(worst, std::abs(luminance(a.pixel(x, y)) - luminance(b.pixel(x, y))));
  MESSAGE("max luminance change " << worst);
  CHECK(worst <= 2.0);
}

TEST_CASE("rendering is deterministic across runs and worker counts") {
  const SceneState s = benchmark_scene();
  const Camera cam = overview_camera(64, 48);
  RenderSettings one, many;
  one.workers = 1;
  many.workers = 5;
  const auto a = render_frame(s, cam, TransferFunction::default_tf(), one);
  const auto b = render_frame(s, cam, TransferFunction::default_tf(), many);
  const auto c = render_frame(s, cam, TransferFunction::default_tf(), one);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("default phantom overview matches the committed golden image") {
  const SceneState s = overview_scene();
  const auto fb = render_frame(s, overview_camera(160, 120), TransferFunction::default_tf());
  const auto report = compare_golden(fb, testing::source_dir() + "/tests/golden/overview_160x120.ppm", 2);
  MESSAGE("golden max delta " << report.max_delta << ", pixels over " << report.pixels_over << " " << report.error);
  CHECK(report.error.empty());
  CHECK(report.passed);
}

TEST_CASE("rings: culled behind the camera") {
  SceneState s;
  s.insert(disc(1, Vec3(0, 0, 3), 0.5, kMip));
  Framebuffer fb(40, 30);
  draw_lens_rings(fb, s, looking_down_z(Vec3::Zero(), 40, 30));
  CHECK(fb == Framebuffer(40, 30));
}

TEST_CASE("rings: face-on annulus matches the projected radii") {
  SceneState s;
  Lens l = disc(1, Vec3(0, 0, -2), 0.5, kMip);
  l.ring_width = 0.05;
  s.insert(l);
  const Camera cam = looking_down_z(Vec3::Zero(), 121, 121, 40);
  Framebuffer fb(121, 121);
  draw_lens_rings(fb, s, cam);
  // Projected radius in pixels of a circle of radius r at depth 2.
  const double f = 121 / 2.0 / std::tan(20.0 * std::numbers::pi / 180.0);
  const auto proj = [&](double r) { return f * r / 2.0; };
  const double c = 60.0;
  double min_r = 1e9, max_r = 0;
  for (int y = 0; y < 121; ++y)
    for (int x = 0; x < 121; ++x) {
      if (is_background(fb.pixel(x, y))) continue;
      const double r = std::hypot(x - c, y - c);
      min_r = std::min(min_r, r);
      max_r = std::max(max_r, r);
    }
  MESSAGE("ring pixel radii " << min_r << ".." << max_r << " projected " << proj(0.45) << ".." << proj(0.5));
  CHECK(std::abs(max_r - proj(0.5)) <= 1.0);
  CHECK(std::abs(min_r - proj(0.45)) <= 1.0);
}

TEST_CASE("rings: the nearer ring wins where rings overlap") {
  SceneState s;
  Lens near_lens = disc(1, Vec3(0.1, 0, -2), 0.5, kMip);
  near_lens.ring_width = 0.08;
  Lens far_lens = disc(2, Vec3(-0.1, 0.05, -3), 0.7, kMip);
  far_lens.ring_width = 0.1;
  far_lens.pose.set_orientation(quat_from_axis_angle(Vec3::UnitY(), 0.4));
  s.insert(near_lens);
  s.insert(far_lens);
  s.held = LensId{2};  // distinct colors
  const Camera cam = looking_down_z(Vec3::Zero(), 100, 100, 50);
  Framebuffer fb(100, 100);
  draw_lens_rings(fb, s, cam);
  int overlaps = 0;
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) {
      const Ray r = cam.pixel_ray(x, y);
      std::optional<double> tn, tf;
      // Half a pixel of slack at the hit depth.
      const double half_pixel = std::tan(50.0 * std::numbers::pi / 360.0) / 100.0;
      for (const Lens* l : {&near_lens, &far_lens}) {
        auto h = testing::oracle_disc_hit(l->center(), l->pose.orientation().toRotationMatrix(), 2.0 * l->radius, r.origin, r.direction);
        if (!h) continue;
        const double d = (r.at(h->t) - l->center()).norm();
        const double pad = half_pixel * h->t;
        if (d > l->radius + pad || d < l->radius - l->ring_width - pad) continue;
        (l == &near_lens ? tn : tf) = h->t;
      }
      const auto* px = fb.pixel(x, y);
      if (tn && tf) {
        ++overlaps;
        const Rgb want = *tn < *tf ? kRingIdle : kRingGrabbed;
        CHECK(px[0] == want[0]);
      } else if (tn) {
        CHECK(px[0] == kRingIdle[0]);
      } else if (tf) {
        CHECK(px[0] == kRingGrabbed[0]);
      }
    }
  CHECK(overlaps > 0);
}

TEST_CASE("rings: proxy is half transparent and spawning lenses grow in") {
  SceneState s;
  s.insert(disc(1, Vec3(0, 0, -2), 0.5, kMip));
  s.insert(disc(2, Vec3(0, 0, -2.5), 0.1, kMip));
  s.proxy = ProxyBinding{LensId{1}, LensId{2}, 5.0, Pose()};
  Framebuffer fb(60, 60, {0, 0, 0});
  draw_lens_rings(fb, s, looking_down_z(Vec3::Zero(), 60, 60));
  bool found = false;
  for (int y = 0; y < 60 && !found; ++y)
    for (int x = 0; x < 60 && !found; ++x) {
      const auto* px = fb.pixel(x, y);
      if (px[0] == 128 && px[1] == 88 && px[2] == 0) found = true;
    }
  CHECK(found);

  s.clock_ms = 150;
  s.appearances.push_back({LensId{2}, 0.0});
  CHECK(appearance_scale(s, LensId{2}) == 0.5);
  CHECK(appearance_scale(s, LensId{1}) == 1.0);
}
