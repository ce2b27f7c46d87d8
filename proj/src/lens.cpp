#include "maglens/lens.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace maglens {

namespace {

constexpr double kMinHitT = 1e-6;
constexpr double kParallelEps = 1e-9;

Lens make_part(const Lens& source, LensId id, const Pose& pose,
               std::vector<EffectDescriptor> stack, std::vector<std::uint32_t> tree) {
  Lens out = source;
  out.id = id;
  out.pose = pose;
  if (stack.size() == 1) {
    out.front_effect = stack.front();
    out.back_effect = stack.front();
    out.stack.clear();
    out.combine_tree.clear();
  } else {
    out.stack = std::move(stack);
    out.combine_tree = std::move(tree);
  }
  return out;
}

}  // namespace

std::vector<EffectDescriptor> Lens::contribution(Face face) const {
  if (combined()) return stack;
  return {face == Face::Front ? front_effect : back_effect};
}

std::vector<EffectDescriptor> Lens::contribution_for_viewer(const Vec3& viewpoint) const {
  return contribution((viewpoint - center()).dot(normal()) >= 0.0 ? Face::Front : Face::Back);
}

std::string Lens::check_invariants() const {
  if (!(radius >= kMinLensRadius && radius <= kMaxLensRadius)) {
    return "radius " + std::to_string(radius) + " outside [0.05, 2.0]";
  }
  if (std::abs(pose.orientation().norm() - 1.0) > 1e-6) return "orientation not unit length";
  if (!pose.position().allFinite()) return "position not finite";
  if (stack.size() == 1) return "combined stack of length 1";
  if (stack.empty() != combine_tree.empty()) return "combine tree does not match stack";
  if (!stack.empty() && combine_tree.size() != stack.size() - 1) return "combine tree size mismatch";
  return {};
}

std::optional<DiscHit> ray_disc_hit(const Lens& lens, const Ray& ray) {
  const Vec3 n = lens.normal();
  const double denom = ray.direction.dot(n);
  if (std::abs(denom) < kParallelEps) return std::nullopt;
  const double t = (lens.center() - ray.origin).dot(n) / denom;
  if (!(t > kMinHitT)) return std::nullopt;
  const Vec3 q = ray.origin + t * ray.direction;
  if ((q - lens.center()).norm() > lens.radius) return std::nullopt;
  return DiscHit{t, denom < 0.0 ? Face::Front : Face::Back};
}

std::vector<EffectChainSegment> effect_chain(std::span<const Lens> lenses, const Ray& ray,
                                             double t_exit) {
  struct Hit {
    double t;
    LensId id;
    const Lens* lens;
    Face face;
  };
  std::vector<Hit> hits;
  for (const auto& lens : lenses) {
    if (auto h = ray_disc_hit(lens, ray); h && h->t < t_exit) {
      hits.push_back({h->t, lens.id, &lens, h->face});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.t != b.t ? a.t < b.t : a.id < b.id;
  });

  std::vector<EffectChainSegment> segments;
  segments.reserve(hits.size() + 1);
  std::vector<EffectDescriptor> active;
  double start = 0.0;
  for (const auto& h : hits) {
    segments.push_back({start, h.t, active});
    const auto c = h.lens->contribution(h.face);
    active.insert(active.end(), c.begin(), c.end());
    start = h.t;
  }
  segments.push_back({start, t_exit, std::move(active)});
  return segments;
}

bool overlap_near_maximal(const Lens& a, const Lens& b, const SnapThresholds& t) {
  const double r = std::max(a.radius, b.radius);
  if ((a.center() - b.center()).norm() > t.center_fraction * r) return false;
  if (std::abs(a.radius - b.radius) > t.radius_fraction * r) return false;
  const double cos_angle = std::min(1.0, std::abs(a.normal().dot(b.normal())));
  return std::acos(cos_angle) <= t.max_angle_deg * std::numbers::pi / 180.0;
}

std::optional<Lens> combine(const Lens& held, const Lens& other, const Vec3& viewpoint,
                            const SnapThresholds& t) {
  if (!overlap_near_maximal(held, other, t)) return std::nullopt;
  auto first = held.contribution_for_viewer(viewpoint);
  auto second = other.contribution_for_viewer(viewpoint);

  Lens out = held;
  out.radius = std::max(held.radius, other.radius);
  out.combine_tree.clear();
  out.combine_tree.push_back(static_cast<std::uint32_t>(first.size()));
  out.combine_tree.insert(out.combine_tree.end(), held.combine_tree.begin(), held.combine_tree.end());
  out.combine_tree.insert(out.combine_tree.end(), other.combine_tree.begin(), other.combine_tree.end());
  out.stack = std::move(first);
  out.stack.insert(out.stack.end(), second.begin(), second.end());
  return out;
}

std::pair<Lens, Lens> split(const Lens& combined, LensId second_id) {
  if (!combined.combined()) throw InvalidOperation("cannot split an atomic lens");
  const std::size_t n = combined.stack.size();
  const std::size_t k = combined.combine_tree.front();
  const auto& s = combined.stack;
  const auto& tree = combined.combine_tree;

  std::vector<EffectDescriptor> left(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<EffectDescriptor> right(s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
  // A subtree over m leaves has m-1 internal nodes.
  std::vector<std::uint32_t> left_tree(tree.begin() + 1, tree.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::uint32_t> right_tree(tree.begin() + static_cast<std::ptrdiff_t>(k),
                                        tree.begin() + static_cast<std::ptrdiff_t>(n - 1));

  Lens first = make_part(combined, combined.id, combined.pose, std::move(left), std::move(left_tree));
  const Pose offset(combined.pose.transform_point(Vec3(1.2 * combined.radius, 0.0, 0.0)),
                    combined.pose.orientation());
  Lens second = make_part(combined, second_id, offset, std::move(right), std::move(right_tree));
  if (second.combined()) {
    second.front_effect = second.stack.front();
    second.back_effect = second.stack.front();
  }
  return {std::move(first), std::move(second)};
}

}  // namespace maglens
