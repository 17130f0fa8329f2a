#pragma once

#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "dualglass/plane.hpp"
#include "dualglass/types.hpp"

namespace dualglass {

/// Rigid transform mapping sensor-frame coordinates into a parent frame.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();
  std::string frame_id = "map";

  static Pose identity() { return {}; }

  static Pose from_yaw(double yaw_rad, const Vec3& t)
  {
    Pose p;
    p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ()));
    p.translation = t;
    return p;
  }

  /// Throws InputError unless the quaternion has unit norm within 1e-9.
  void validate() const
  {
    if (std::abs(rotation.norm() - 1.0) > 1e-9)
      throw InputError("pose quaternion is not normalized (|q| = " + std::to_string(rotation.norm()) + ")");
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation.conjugate() * (p - translation); }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  Pose inverse() const
  {
    Pose inv;
    inv.rotation = rotation.conjugate();
    inv.translation = -(inv.rotation * translation);
    inv.frame_id = frame_id;
    return inv;
  }
};

/// Re-expresses a plane given in the child frame in the parent frame of `pose`.
inline Plane transform_plane(const Plane& plane, const Pose& pose)
{
  const Vec3 n = pose.rotate(plane.normal());
  return Plane(n, plane.d() - n.dot(pose.translation));
}

}  // namespace dualglass
