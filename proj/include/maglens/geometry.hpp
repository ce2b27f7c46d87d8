#pragma once

#include <Eigen/Geometry>

#include <array>
#include <string>
#include <string_view>

namespace maglens {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Rigid pose. The orientation is renormalized on construction so every Pose
// carries a unit quaternion (norm within 1e-6 of 1 is the contract; in
// practice it is within a few ulps).
class Pose {
 public:
  Pose() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}
  Pose(const Vec3& position, const Quat& orientation);

  const Vec3& position() const { return position_; }
  const Quat& orientation() const { return orientation_; }
  void set_position(const Vec3& p) { position_ = p; }
  void set_orientation(const Quat& q);

  Vec3 transform_point(const Vec3& local) const { return position_ + orientation_ * local; }
  Vec3 transform_vector(const Vec3& local) const { return orientation_ * local; }
  Vec3 inverse_transform_point(const Vec3& world) const {
    return orientation_.conjugate() * (world - position_);
  }

  Pose inverse() const;
  // this ∘ other: first apply `other`, then `this`.
  Pose compose(const Pose& other) const;

  // Serialized as x,y,z,qw,qx,qy,qz.
  std::array<double, 7> to_array() const;
  static Pose from_array(const std::array<double, 7>& v);
  std::string to_string() const;
  static Pose parse(std::string_view token, int line = 0);

  bool operator==(const Pose& o) const {
    return to_array() == o.to_array();
  }

 private:
  Vec3 position_;
  Quat orientation_;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3(0, 0, -1);

  Ray() = default;
  // Normalizes `dir`.
  Ray(const Vec3& origin, const Vec3& dir);
  Vec3 at(double t) const { return origin + t * direction; }
};

// Slab test against an axis-aligned box. Returns false if the ray misses or
// the box lies entirely behind the origin. t_near may be negative when the
// origin is inside the box.
bool intersect_box(const Ray& ray, const Vec3& lo, const Vec3& hi, double& t_near, double& t_far);

Quat quat_from_axis_angle(const Vec3& axis, double radians);

}  // namespace maglens
