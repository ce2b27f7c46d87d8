#include "maglens/geometry.hpp"

#include "maglens/record.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace maglens {

namespace {

Quat normalized_or_identity(const Quat& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) return Quat::Identity();
  return Quat(q.w() / n, q.x() / n, q.y() / n, q.z() / n);
}

// Already-unit input is kept as is so serialization round trips exactly.
Quat keep_if_unit(const Quat& q) {
  return std::abs(q.squaredNorm() - 1.0) < 1e-12 ? q : normalized_or_identity(q);
}

}  // namespace

Pose::Pose(const Vec3& position, const Quat& orientation)
    : position_(position), orientation_(normalized_or_identity(orientation)) {}

void Pose::set_orientation(const Quat& q) { orientation_ = normalized_or_identity(q); }

Pose Pose::inverse() const {
  const Quat qi = orientation_.conjugate();
  return Pose(-(qi * position_), qi);
}

Pose Pose::compose(const Pose& other) const {
  return Pose(position_ + orientation_ * other.position_, orientation_ * other.orientation_);
}

std::array<double, 7> Pose::to_array() const {
  return {position_.x(),    position_.y(),    position_.z(),   orientation_.w(),
          orientation_.x(), orientation_.y(), orientation_.z()};
}

Pose Pose::from_array(const std::array<double, 7>& v) {
  Pose p;
  p.position_ = Vec3(v[0], v[1], v[2]);
  p.orientation_ = keep_if_unit(Quat(v[3], v[4], v[5], v[6]));
  return p;
}

std::string Pose::to_string() const {
  const auto a = to_array();
  return format_numbers(a);
}

Pose Pose::parse(std::string_view token, int line) {
  const auto v = parse_numbers(token, line);
  if (v.size() != 7) {
    throw FormatError(line, "pose needs 7 numbers (x,y,z,qw,qx,qy,qz), got " +
                                std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw FormatError(line, "pose has non-finite component");
  }
  return from_array({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
}

Ray::Ray(const Vec3& o, const Vec3& dir) : origin(o), direction(dir.normalized()) {}

bool intersect_box(const Ray& ray, const Vec3& lo, const Vec3& hi, double& t_near,
                   double& t_far) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis];
    const double d = ray.direction[axis];
    if (d == 0.0) {
      if (o < lo[axis] || o > hi[axis]) return false;
      continue;
    }
    double ta = (lo[axis] - o) / d;
    double tb = (hi[axis] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 < t0 || t1 <= 0.0) return false;
  t_near = t0;
  t_far = t1;
  return true;
}

Quat quat_from_axis_angle(const Vec3& axis, double radians) {
  return Quat(Eigen::AngleAxisd(radians, axis.normalized()));
}

}  // namespace maglens
