#pragma once

#include "maglens/effects.hpp"
#include "maglens/geometry.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maglens {

struct LensId {
  std::uint32_t value = 0;
  auto operator<=>(const LensId&) const = default;
};

inline constexpr double kMinLensRadius = 0.05;
inline constexpr double kMaxLensRadius = 2.0;
inline constexpr double kDefaultRingWidth = 0.012;

class InvalidOperation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Face { Front, Back };

// A see-through disc. The disc lies in the pose's local XY plane and local +Z
// is the front normal.
//
// A combined lens (stack non-empty, at least two entries) renders its whole
// stack regardless of which face the viewer sees. combine_tree records how
// the stack was built: a pre-order list of split offsets over the binary
// combine tree, one entry per combine, so split() can undo the most recent
// combine exactly.
struct Lens {
  LensId id;
  Pose pose;
  double radius = 0.15;
  EffectDescriptor front_effect{FieldTransform::GradientMagnitude, std::nullopt};
  EffectDescriptor back_effect{FieldTransform::GradientMagnitude, std::nullopt};
  std::vector<EffectDescriptor> stack;
  std::vector<std::uint32_t> combine_tree;
  double ring_width = kDefaultRingWidth;

  Vec3 center() const { return pose.position(); }
  Vec3 normal() const { return pose.transform_vector(Vec3::UnitZ()); }
  bool combined() const { return !stack.empty(); }

  // Effects this lens applies to a ray that crosses it on `face`.
  std::vector<EffectDescriptor> contribution(Face face) const;
  // Effects seen by a viewer at `viewpoint` (front when the viewer is on the
  // normal's side of the disc plane).
  std::vector<EffectDescriptor> contribution_for_viewer(const Vec3& viewpoint) const;

  // Empty string when every invariant holds, else a description of the
  // first violation.
  std::string check_invariants() const;

  bool operator==(const Lens& o) const {
    return id == o.id && pose == o.pose && radius == o.radius && front_effect == o.front_effect &&
           back_effect == o.back_effect && stack == o.stack && combine_tree == o.combine_tree &&
           ring_width == o.ring_width;
  }
};

struct DiscHit {
  double t;
  Face face;
};

std::optional<DiscHit> ray_disc_hit(const Lens& lens, const Ray& ray);

struct EffectChainSegment {
  double t_start;
  double t_end;
  std::vector<EffectDescriptor> active_stack;
};

// Splits [0, t_exit] at every disc hit before t_exit. Hits are ordered by
// ray parameter, ties by lens id; segment k carries the contributions of the
// first k hits in hit order.
std::vector<EffectChainSegment> effect_chain(std::span<const Lens> lenses, const Ray& ray,
                                             double t_exit);

struct SnapThresholds {
  double center_fraction = 0.1;   // of the larger radius
  double max_angle_deg = 10.0;    // between normals, either orientation
  double radius_fraction = 0.25;  // |ra - rb| relative to the larger radius
  bool operator==(const SnapThresholds&) const = default;
};

bool overlap_near_maximal(const Lens& a, const Lens& b, const SnapThresholds& t = {});

// Snap `other` into `held`. Returns nullopt when the overlap predicate fails.
// The result keeps held's id and pose. Each input contributes its stack if
// combined, else the effect facing `viewpoint`.
std::optional<Lens> combine(const Lens& held, const Lens& other, const Vec3& viewpoint,
                            const SnapThresholds& t = {});

// Undoes the most recent combine. The first lens keeps the id and pose; the
// second gets `second_id` and sits 1.2 radii along the local +X axis. Throws
// InvalidOperation for atomic lenses.
std::pair<Lens, Lens> split(const Lens& combined, LensId second_id);

}  // namespace maglens
