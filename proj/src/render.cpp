#include "maglens/render.hpp"

#include "maglens/kernels/sampling.hpp"
#include "maglens/lens.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace maglens {

namespace {

constexpr int kChunk = 64;

double tan_half_fov(double fov_deg) { return std::tan(0.5 * fov_deg * std::numbers::pi / 180.0); }

// 1 - (1 - a)^e with exact fast paths for the common exponents.
double correct_opacity(double a, double exponent) {
  if (exponent == 1.0) return a;
  if (exponent == 0.5) return 1.0 - std::sqrt(1.0 - a);
  return 1.0 - std::pow(1.0 - a, exponent);
}

double normalize_gradient(double magnitude, double gradient_max, double scale) {
  return std::min(1.0, magnitude / gradient_max * scale);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

// First lattice index whose t is >= t.
long long lattice_index(double t_origin, double step, double t) {
  long long k = static_cast<long long>(std::ceil((t - t_origin) / step));
  if (k < 0) k = 0;
  while (k > 0 && t_origin + static_cast<double>(k - 1) * step >= t) --k;
  while (t_origin + static_cast<double>(k) * step < t) ++k;
  return k;
}

}  // namespace

// ---------------------------------------------------------------------------
// Camera

std::string Camera::check_invariants() const {
  if (!(fov_deg > 10.0 && fov_deg < 170.0)) return "fov must lie in (10, 170) degrees";
  if (width < 1 || height < 1) return "resolution must be at least 1x1";
  return {};
}

Ray Camera::pixel_ray(int x, int y) const {
  const double th = tan_half_fov(fov_deg);
  const double aspect = static_cast<double>(width) / height;
  const double u = (2.0 * (x + 0.5) / width - 1.0) * th * aspect;
  const double v = (1.0 - 2.0 * (y + 0.5) / height) * th;
  return Ray(pose.position(), pose.transform_vector(Vec3(u, v, -1.0)));
}

std::optional<std::array<double, 2>> Camera::project(const Vec3& world) const {
  const Vec3 local = pose.inverse_transform_point(world);
  if (!(local.z() < 0.0)) return std::nullopt;
  const double th = tan_half_fov(fov_deg);
  const double aspect = static_cast<double>(width) / height;
  const double u = local.x() / -local.z() / (th * aspect);
  const double v = local.y() / -local.z() / th;
  return std::array<double, 2>{(u + 1.0) * 0.5 * width - 0.5, (1.0 - v) * 0.5 * height - 0.5};
}

Record Camera::to_record() const {
  Record r;
  r.keyword = "camera";
  r.add("fov", fov_deg).add("width", static_cast<double>(width)).add("height", static_cast<double>(height));
  r.add("pose", pose.to_string());
  return r;
}

Camera Camera::from_record(const Record& r) {
  Camera c;
  c.fov_deg = r.number_or("fov", c.fov_deg);
  if (r.has("width")) c.width = static_cast<int>(r.integer("width"));
  if (r.has("height")) c.height = static_cast<int>(r.integer("height"));
  if (r.has("pose")) c.pose = Pose::parse(r.text("pose"), r.line);
  if (auto e = c.check_invariants(); !e.empty()) throw FormatError(r.line, e);
  return c;
}

// ---------------------------------------------------------------------------
// Transfer function

TransferFunction::TransferFunction(std::vector<TfPoint> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("transfer function needs at least two points");
  if (points_.front().value != 0.0 || points_.back().value != 1.0) {
    throw std::invalid_argument("transfer function must start at 0 and end at 1");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (i > 0 && !(p.value > points_[i - 1].value)) {
      throw std::invalid_argument("transfer function values must be strictly increasing");
    }
    if (!(p.opacity >= 0.0 && p.opacity <= 1.0 && p.gray >= 0.0 && p.gray <= 1.0)) {
      throw std::invalid_argument("transfer function opacity and gray must lie in [0,1]");
    }
  }
}

TransferFunction TransferFunction::default_tf() {
  return TransferFunction({{0.0, 0.0, 0.0}, {0.3, 0.02, 0.35}, {0.6, 0.06, 0.6}, {1.0, 0.15, 0.9}});
}

TransferFunction::Sample TransferFunction::evaluate(double v) const {
  if (!(v > 0.0)) return {points_.front().opacity, points_.front().gray};
  if (v >= 1.0) return {points_.back().opacity, points_.back().gray};
  std::size_t i = 1;
  while (points_[i].value < v) ++i;
  const auto& a = points_[i - 1];
  const auto& b = points_[i];
  const double f = (v - a.value) / (b.value - a.value);
  return {a.opacity + (b.opacity - a.opacity) * f, a.gray + (b.gray - a.gray) * f};
}

Record TransferFunction::to_record() const {
  std::vector<double> flat;
  for (const auto& p : points_) flat.insert(flat.end(), {p.value, p.opacity, p.gray});
  Record r;
  r.keyword = "tf";
  r.add("points", flat);
  return r;
}

TransferFunction TransferFunction::from_record(const Record& r) {
  const auto flat = r.numbers("points");
  if (flat.size() % 3 != 0) throw FormatError(r.line, "tf points come in (value,opacity,gray) triples");
  std::vector<TfPoint> pts;
  for (std::size_t i = 0; i < flat.size(); i += 3) pts.push_back({flat[i], flat[i + 1], flat[i + 2]});
  try {
    return TransferFunction(std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw FormatError(r.line, e.what());
  }
}

Framebuffer::Framebuffer(int w, int h, Rgb fill) : width(w), height(h) {
  rgba.resize(4 * static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < rgba.size(); i += 4) {
    rgba[i] = fill[0];
    rgba[i + 1] = fill[1];
    rgba[i + 2] = fill[2];
    rgba[i + 3] = 255;
  }
}

// ---------------------------------------------------------------------------
// Integration

double shaded_value(const SegmentContext& ctx, const Vec3& p,
                    std::span<const FieldTransform> transforms, double gradient_scale) {
  const auto view = ctx.grid->view();
  if (transforms.empty()) return kernels::sample_point(view, p.x(), p.y(), p.z());
  if (transforms.size() == 1) {
    kernels::Line line{{p.x(), p.y(), p.z()}, {0.0, 0.0, 0.0}};
    double m = 0.0;
    kernels::gradient_line(view, line, true, {&m, 1});
    return normalize_gradient(m, ctx.gradient_max, gradient_scale);
  }
  // Nested derivative: central differences of the inner shaded field, with
  // the same interior rule as the kernel.
  const Vec3& s = ctx.grid->spacing();
  const Vec3 lo = ctx.grid->box_min();
  const auto& d = ctx.grid->dims();
  for (int a = 0; a < 3; ++a) {
    const double l = (p[a] - lo[a]) / s[a];
    if (!(l >= 1.0 + 1e-9 && l <= (d[a] - 2) - 1e-9)) return 0.0;
  }
  const auto inner = transforms.first(transforms.size() - 1);
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = s[a];
    const double g = (shaded_value(ctx, p + e, inner, gradient_scale) -
                      shaded_value(ctx, p - e, inner, gradient_scale)) /
                     (2.0 * s[a]);
    sum += g * g;
  }
  return normalize_gradient(std::sqrt(sum), ctx.gradient_max, gradient_scale);
}

namespace {

constexpr double kMipRefineBand = 0.02;
constexpr std::size_t kMipRefineMax = 16;
constexpr std::size_t kMipRefineSamples = 20;

void shade_line(const SegmentContext& ctx, std::span<const FieldTransform> transforms, double gradient_scale,
                const kernels::Line& line, std::span<double> out) {
  const auto view = ctx.grid->view();
  if (transforms.empty()) {
    kernels::sample_line(view, line, out);
  } else if (transforms.size() == 1) {
    kernels::gradient_line(view, line, true, out);
    for (auto& v : out) v = normalize_gradient(v, ctx.gradient_max, gradient_scale);
  } else {
    for (std::size_t j = 0; j < out.size(); ++j) {
      const Vec3 p(line.start[0] + static_cast<double>(j) * line.delta[0],
                   line.start[1] + static_cast<double>(j) * line.delta[1],
                   line.start[2] + static_cast<double>(j) * line.delta[2]);
      out[j] = shaded_value(ctx, p, transforms, gradient_scale);
    }
  }
}

}  // namespace

void integrate_segment(const SegmentContext& ctx, const Ray& ray, double t0, double t1,
                       const EffectiveShading& shading, RayAccumulator& acc,
                       std::vector<double>* alpha_trace, std::vector<double>* mip_trace) {
  if (acc.terminated || !(t0 < t1)) return;
  const long long k_begin = lattice_index(ctx.t_origin, ctx.step, t0);
  const long long k_end = lattice_index(ctx.t_origin, ctx.step, t1);
  if (k_begin >= k_end) return;

  const bool mip = shading.integrator == Integrator::MaximumIntensity;
  const double gradient_scale = shading.param("gradient_scale", 1.0);
  const double opacity_scale = shading.param("opacity_scale", 1.0);
  const double gain = shading.param("intensity_gain", 1.0);
  const double exponent = ctx.step / ctx.step_ref;
  const Vec3 delta = ctx.step * ray.direction;
  std::array<double, kChunk> values;
  double peak = 0.0;

  // MIP keeps the lattice samples near the running maximum; the peak is
  // refined around them once the segment is done.
  std::vector<std::pair<long long, double>> near_peak;

  for (long long k = k_begin; k < k_end; k += kChunk) {
    const auto n = static_cast<std::size_t>(std::min<long long>(kChunk, k_end - k));
    const std::span<double> out(values.data(), n);
    const Vec3 start = ray.at(ctx.t_origin + static_cast<double>(k) * ctx.step);
    const kernels::Line line{{start.x(), start.y(), start.z()}, {delta.x(), delta.y(), delta.z()}};
    shade_line(ctx, shading.transforms, gradient_scale, line, out);

    if (mip) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = out[j];
        if (mip_trace) mip_trace->push_back(v);
        if (v < peak - kMipRefineBand) continue;
        if (v > peak) {
          peak = v;
          std::erase_if(near_peak, [&](const auto& c) { return c.second < peak - kMipRefineBand; });
        }
        if (near_peak.size() < kMipRefineMax) near_peak.emplace_back(k + static_cast<long long>(j), v);
      }
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto s = ctx.tf->evaluate(out[j]);
      double e = exponent;
      if (k + static_cast<long long>(j) == k_end - 1 && t1 >= ctx.t_exit) {
        const double t_last = ctx.t_origin + static_cast<double>(k_end - 1) * ctx.step;
        e = std::clamp(ctx.t_exit - t_last, 0.0, ctx.step) / ctx.step_ref;
      }
      const double a = correct_opacity(std::min(1.0, s.opacity * opacity_scale), e);
      acc.color += (1.0 - acc.alpha) * a * s.gray;
      acc.alpha += (1.0 - acc.alpha) * a;
      if (alpha_trace) alpha_trace->push_back(acc.alpha);
      if (acc.alpha >= kEarlyExitAlpha) {
        acc.terminated = true;
        return;
      }
    }
  }

  if (mip && peak > 0.0) {
    std::array<double, kMipRefineSamples> fine;
    for (const auto& [k, v] : near_peak) {
      const double tk = ctx.t_origin + static_cast<double>(k) * ctx.step;
      const double lo = std::max(t0, tk - ctx.step);
      const double hi = std::min(t1, tk + ctx.step);
      if (!(hi > lo)) continue;
      const Vec3 d = ((hi - lo) / kMipRefineSamples) * ray.direction;
      const Vec3 start = ray.at(lo);
      const kernels::Line line{{start.x(), start.y(), start.z()}, {d.x(), d.y(), d.z()}};
      shade_line(ctx, shading.transforms, gradient_scale, line, fine);
      for (double f : fine) {
        peak = std::max(peak, f);
        if (mip_trace) mip_trace->push_back(f);
      }
    }
    acc.color += (1.0 - acc.alpha) * std::min(1.0, peak * gain);
    acc.alpha = 1.0;
    acc.terminated = true;
  }
}

namespace {

struct FrameContext {
  const SceneState* scene;
  SegmentContext seg;
  Vec3 lo, hi;
};

std::optional<RayAccumulator> trace(const FrameContext& fc, const Ray& ray,
                                    std::vector<double>* alpha_trace) {
  double t_near = 0.0;
  double t_far = 0.0;
  if (!intersect_box(ray, fc.lo, fc.hi, t_near, t_far)) return std::nullopt;
  SegmentContext seg = fc.seg;
  seg.t_origin = std::max(t_near, 0.0);
  seg.t_exit = t_far;

  RayAccumulator acc;
  const auto chain = effect_chain(fc.scene->lenses, ray, t_far);
  for (const auto& s : chain) {
    if (acc.terminated) break;
    if (s.t_end <= seg.t_origin) continue;
    const auto shading = compose_effects(s.active_stack);
    integrate_segment(seg, ray, std::max(s.t_start, seg.t_origin), s.t_end, shading, acc, alpha_trace);
  }
  return acc;
}

std::optional<FrameContext> make_frame_context(const SceneState& scene, const TransferFunction& tf,
                                               const RenderSettings& settings) {
  if (!scene.volume || !scene.volume->grid) return std::nullopt;
  const auto& grid = *scene.volume->grid;
  FrameContext fc;
  fc.scene = &scene;
  fc.seg.grid = &grid;
  fc.seg.tf = &tf;
  fc.seg.step_ref = grid.min_spacing();
  fc.seg.step = settings.step > 0.0 ? settings.step : 0.5 * fc.seg.step_ref;
  fc.seg.gradient_max = settings.gradient_max.value_or(scene.volume->gradient_reference);
  fc.lo = grid.box_min();
  fc.hi = grid.box_max();
  return fc;
}

}  // namespace

std::optional<RayAccumulator> integrate_ray(const SceneState& scene, const TransferFunction& tf,
                                            const Ray& ray, const RenderSettings& settings,
                                            std::vector<double>* alpha_trace) {
  const auto fc = make_frame_context(scene, tf, settings);
  if (!fc) return std::nullopt;
  return trace(*fc, ray, alpha_trace);
}

Framebuffer render_frame(const SceneState& scene, const Camera& camera, const TransferFunction& tf,
                         const RenderSettings& settings) {
  Framebuffer fb(camera.width, camera.height, scene.background);
  if (const auto fc = make_frame_context(scene, tf, settings)) {
    const Rgb bg = scene.background;
    std::atomic<int> next_row{0};
    auto worker = [&] {
      for (int y = next_row++; y < camera.height; y = next_row++) {
        for (int x = 0; x < camera.width; ++x) {
          const auto acc = trace(*fc, camera.pixel_ray(x, y), nullptr);
          if (!acc) continue;
          std::uint8_t* px = fb.pixel(x, y);
          for (int c = 0; c < 3; ++c) px[c] = to_byte(acc->color * 255.0 + (1.0 - acc->alpha) * bg[c]);
        }
      }
    };
    int workers = settings.workers > 0 ? settings.workers
                                       : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, camera.height);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
  }
  if (settings.draw_rings) draw_lens_rings(fb, scene, camera);
  return fb;
}

// ---------------------------------------------------------------------------
// Rings

double appearance_scale(const SceneState& scene, LensId id) {
  for (const auto& a : scene.appearances) {
    if (a.lens == id) return std::clamp((scene.clock_ms - a.start_ms) / kSpawnAnimationMs, 0.0, 1.0);
  }
  return 1.0;
}

void draw_lens_rings(Framebuffer& fb, const SceneState& scene, const Camera& camera) {
  struct RingGeom {
    const Lens* lens;
    Vec3 center, normal;
    double outer, inner;
    Rgb color;
    bool translucent;
  };
  std::vector<RingGeom> rings;
  for (const auto& lens : scene.lenses) {
    const double s = appearance_scale(scene, lens.id);
    if (s <= 0.0) continue;
    const double outer = lens.radius * s;
    rings.push_back({&lens, lens.center(), lens.normal(), outer, outer - lens.ring_width * s,
                     scene.held == lens.id ? kRingGrabbed : kRingIdle,
                     scene.proxy && scene.proxy->proxy == lens.id});
  }
  if (rings.empty()) return;
  // Half a pixel of slack at the hit depth keeps sub-pixel rings visible.
  const double half_pixel = std::tan(camera.fov_deg * std::numbers::pi / 360.0) / camera.height;

  for (int y = 0; y < fb.height; ++y) {
    for (int x = 0; x < fb.width; ++x) {
      const Ray ray = camera.pixel_ray(x, y);
      const RingGeom* best = nullptr;
      double best_t = std::numeric_limits<double>::infinity();
      for (const auto& r : rings) {
        const double denom = ray.direction.dot(r.normal);
        if (std::abs(denom) < 1e-12) continue;
        const double t = (r.center - ray.origin).dot(r.normal) / denom;
        if (!(t > 0.0) || t >= best_t) continue;
        const double d = (ray.at(t) - r.center).norm();
        const double pad = half_pixel * t;
        if (d > r.outer + pad || d < r.inner - pad) continue;
        best = &r;
        best_t = t;
      }
      if (!best) continue;
      std::uint8_t* px = fb.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        px[c] = best->translucent ? to_byte(0.5 * px[c] + 0.5 * best->color[c]) : best->color[c];
      }
    }
  }
}

double luminance(const std::uint8_t* px) { return 0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2]; }

}  // namespace maglens
