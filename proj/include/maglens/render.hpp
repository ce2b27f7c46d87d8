#pragma once

#include "maglens/effects.hpp"
#include "maglens/geometry.hpp"
#include "maglens/record.hpp"
#include "maglens/scene.hpp"
#include "maglens/volume.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maglens {

// Pinhole camera looking along local -Z with local +Y up.
struct Camera {
  Pose pose;
  double fov_deg = 60.0;  // vertical
  int width = 320;
  int height = 240;

  std::string check_invariants() const;
  // Primary ray through the center of pixel (x, y), top-left origin.
  Ray pixel_ray(int x, int y) const;
  // Pixel coordinates of a world point; nullopt when behind the camera.
  std::optional<std::array<double, 2>> project(const Vec3& world) const;

  Record to_record() const;
  // Reads fov/width/height and an optional pose.
  static Camera from_record(const Record& r);
};

struct TfPoint {
  double value;
  double opacity;
  double gray;
  bool operator==(const TfPoint&) const = default;
};

// Piecewise-linear map from scalar value to (opacity, gray level).
class TransferFunction {
 public:
  // Throws std::invalid_argument when the control points are not sorted,
  // do not start at 0 and end at 1, or leave [0,1].
  explicit TransferFunction(std::vector<TfPoint> points);
  static TransferFunction default_tf();

  const std::vector<TfPoint>& points() const { return points_; }

  struct Sample {
    double opacity;
    double gray;
  };
  Sample evaluate(double v) const;

  Record to_record() const;
  static TransferFunction from_record(const Record& r);
  bool operator==(const TransferFunction&) const = default;

 private:
  std::vector<TfPoint> points_;
};

struct Framebuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;  // row-major, top-left origin

  Framebuffer() = default;
  Framebuffer(int w, int h, Rgb fill = kDefaultBackground);
  std::uint8_t* pixel(int x, int y) { return &rgba[4 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgba[4 * (static_cast<std::size_t>(y) * width + x)];
  }
  bool operator==(const Framebuffer&) const = default;
};

struct RenderSettings {
  double step = 0.0;                    // <= 0 picks 0.5 * min spacing
  int workers = 0;                      // <= 0 picks the hardware thread count
  std::optional<double> gradient_max;   // overrides the volume's reference
  bool draw_rings = true;
};

// Front-to-back compositing state for one ray.
struct RayAccumulator {
  double color = 0.0;
  double alpha = 0.0;
  bool terminated = false;  // early exit or an opaque MIP segment
};

inline constexpr double kEarlyExitAlpha = 0.99;

// What integrate_segment needs besides the segment itself. Samples lie on
// the lattice t = t_origin + k * step shared by every segment of a ray.
struct SegmentContext {
  const VolumeGrid* grid = nullptr;
  const TransferFunction* tf = nullptr;
  double step = 0.0;
  double step_ref = 0.0;  // opacity-correction reference, min spacing
  double t_origin = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();  // volume exit; the last sample is weighted by what remains
  double gradient_max = 1.0;
};

// Integrates lattice samples with t in [t0, t1). When alpha_trace is given,
// the accumulated opacity after every emission-absorption sample is appended;
// when mip_trace is given, every value a MIP segment sampled is appended.
void integrate_segment(const SegmentContext& ctx, const Ray& ray, double t0, double t1,
                       const EffectiveShading& shading, RayAccumulator& acc,
                       std::vector<double>* alpha_trace = nullptr,
                       std::vector<double>* mip_trace = nullptr);

// The shaded field value at p after applying the transforms.
double shaded_value(const SegmentContext& ctx, const Vec3& p,
                    std::span<const FieldTransform> transforms, double gradient_scale);

// Whole-ray integration (effect chain + segments) without ring overlay.
// Returns nullopt when the ray misses the volume.
std::optional<RayAccumulator> integrate_ray(const SceneState& scene, const TransferFunction& tf,
                                            const Ray& ray, const RenderSettings& settings,
                                            std::vector<double>* alpha_trace = nullptr);

Framebuffer render_frame(const SceneState& scene, const Camera& camera, const TransferFunction& tf,
                         const RenderSettings& settings = {});

inline constexpr Rgb kRingIdle{255, 176, 0};
inline constexpr Rgb kRingGrabbed{0, 220, 255};
inline constexpr double kSpawnAnimationMs = 300.0;

// Paints every lens ring over fb. The nearest ring wins per pixel; the proxy
// lens's ring is blended at 50%.
void draw_lens_rings(Framebuffer& fb, const SceneState& scene, const Camera& camera);

// Display scale of a lens during its spawn animation, 1 once settled.
double appearance_scale(const SceneState& scene, LensId id);

double luminance(const std::uint8_t* px);

}  // namespace maglens
