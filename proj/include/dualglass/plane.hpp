#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dualglass/types.hpp"

namespace dualglass {

/// Infinite plane n.x + d = 0 with |n| = 1 and d >= 0.
///
/// Construction normalizes the normal and flips all four coefficients when
/// d < 0, so the sensor origin always lies on the positive side.
class Plane {
 public:
  Plane() = default;
  Plane(const Vec3& n, double d) { assign(n, d); }
  Plane(double a, double b, double c, double d) : Plane(Vec3(a, b, c), d) {}

  /// Plane through `point` with normal `n` (sign fixed by d >= 0).
  static Plane through(const Vec3& point, const Vec3& n)
  {
    const Vec3 u = n.normalized();
    return Plane(u, -u.dot(point));
  }

  /// Raw coefficients without the d >= 0 flip. Used for planes through the
  /// origin where the orientation is meaningful to the caller.
  static Plane raw(const Vec3& n, double d)
  {
    Plane p;
    const double s = n.norm();
    p.n_ = n / s;
    p.d_ = d / s;
    return p;
  }

  const Vec3& normal() const { return n_; }
  double d() const { return d_; }
  double a() const { return n_.x(); }
  double b() const { return n_.y(); }
  double c() const { return n_.z(); }

  double signed_distance(const Vec3& p) const { return n_.dot(p) + d_; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }

  /// Parameter t > 0 where the ray t * dir (from the origin) meets the plane,
  /// or a negative value when the ray runs parallel or away.
  double ray_parameter(const Vec3& dir) const
  {
    const double den = n_.dot(dir);
    if (std::abs(den) < 1e-12) return -1.0;
    return -d_ / den;
  }

  /// Angle between normals in radians, ignoring orientation.
  double angle_to(const Plane& o) const
  {
    return std::acos(std::min(1.0, std::abs(n_.dot(o.n_))));
  }

 private:
  void assign(const Vec3& n, double d)
  {
    const double s = n.norm();
    if (!(s > 0.0)) throw InputError("plane normal has zero length");
    n_ = n / s;
    d_ = d / s;
    if (d_ < 0.0) {
      n_ = -n_;
      d_ = -d_;
    }
  }

  Vec3 n_ = Vec3::UnitZ();
  double d_ = 0.0;
};

/// Householder reflection of a point across a plane: p - 2 (n.p + d) n.
inline Vec3 reflect_point(const Vec3& p, const Plane& plane)
{
  return p - 2.0 * plane.signed_distance(p) * plane.normal();
}

inline std::vector<Vec3> mirror_points(std::span<const Vec3> points, const Plane& plane)
{
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(reflect_point(p, plane));
  return out;
}

/// 4x4 homogeneous form [I - 2nn^T, -2dn; 0, 1] acting on column points.
inline Eigen::Matrix4d householder_matrix(const Plane& plane)
{
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const Vec3& n = plane.normal();
  m.topLeftCorner<3, 3>() -= 2.0 * n * n.transpose();
  m.topRightCorner<3, 1>() = -2.0 * plane.d() * n;
  return m;
}

/// Total-least-squares plane: normal is the eigenvector of the scatter matrix
/// with the smallest eigenvalue. Requires at least three points.
inline Plane fit_plane_tls(std::span<const Vec3> pts)
{
  if (pts.size() < 3) throw InputError("plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Vec3 q = p - centroid;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  return Plane::through(centroid, es.eigenvectors().col(0));
}

}  // namespace dualglass
