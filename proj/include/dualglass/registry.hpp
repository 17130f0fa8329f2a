#pragma once

// Map-frame store of detected panes.
//
// A pane is kept as its plane plus a rectangle in pane-local coordinates:
// u runs horizontally along the plane, v completes a right-handed frame with
// the normal, and the origin is the foot of the perpendicular from the map
// origin (-d n). Registry file, one pane per line:
//
//   pane a b c d left right lower upper count [inliers last_seen]
//
// where (a, b, c, d) is the plane, [left, right] the u extent and
// [lower, upper] the v extent in meters.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dualglass/boundary.hpp"
#include "dualglass/config.hpp"
#include "dualglass/pose.hpp"

namespace dualglass {

struct PaneRect {
  double left = 0.0, right = 0.0, lower = 0.0, upper = 0.0;
};

struct RegisteredPane {
  Plane plane;  ///< map frame
  PaneRect rect;
  int count = 1;       ///< observations merged into this entry
  long inliers = 0;    ///< accumulated inlier count, the merge weight
  long last_seen = -1; ///< scan id
};

/// In-plane basis (u, v) of a plane; u is horizontal unless the plane is.
inline std::pair<Vec3, Vec3> plane_basis(const Plane& p)
{
  const Vec3 n = p.normal();
  Vec3 u = Vec3::UnitZ().cross(n);
  if (u.norm() < 1e-6) u = Vec3::UnitX() - n.x() * n;
  u.normalize();
  return {u, n.cross(u)};
}

inline Eigen::Vector2d plane_coords(const Plane& p, const Vec3& x)
{
  const auto [u, v] = plane_basis(p);
  const Vec3 o = -p.d() * p.normal();
  return {u.dot(x - o), v.dot(x - o)};
}

inline Vec3 plane_point(const Plane& p, double a, double b)
{
  const auto [u, v] = plane_basis(p);
  return -p.d() * p.normal() + a * u + b * v;
}

inline std::array<Vec3, 4> rect_corners(const Plane& p, const PaneRect& r)
{
  return {plane_point(p, r.left, r.lower), plane_point(p, r.right, r.lower), plane_point(p, r.right, r.upper),
          plane_point(p, r.left, r.upper)};
}

/// Bounding rectangle, in `target` coordinates, of points projected onto it.
template <typename Range>
PaneRect rect_of(const Plane& target, const Range& pts)
{
  PaneRect r{1e300, -1e300, 1e300, -1e300};
  for (const Vec3& x : pts) {
    const auto c = plane_coords(target, x);
    r.left = std::min(r.left, c.x());
    r.right = std::max(r.right, c.x());
    r.lower = std::min(r.lower, c.y());
    r.upper = std::max(r.upper, c.y());
  }
  return r;
}

/// Points where the boundary of a sensor-frame pane meets its plane. The
/// azimuth band between the lower and upper ring is sampled along its edges.
inline std::vector<Vec3> pane_outline(const GlassPane& pane, const GridGeometry& g, int samples = 16)
{
  std::vector<Vec3> out;
  const double el_lo = g.elevations[static_cast<std::size_t>(pane.lower_ring)];
  const double el_hi = g.elevations[static_cast<std::size_t>(pane.upper_ring)];
  auto add = [&](double az, double el) {
    const Vec3 d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const double t = pane.plane.ray_parameter(d);
    if (std::isfinite(t) && t > 0.0) out.push_back(t * d);
  };
  for (int i = 0; i <= samples; ++i) {
    const double f = static_cast<double>(i) / samples;
    const double az = pane.left_az + f * (pane.right_az - pane.left_az);
    add(az, el_lo);
    add(az, el_hi);
    add(pane.left_az, el_lo + f * (el_hi - el_lo));
    add(pane.right_az, el_lo + f * (el_hi - el_lo));
  }
  return out;
}

class PaneRegistry {
 public:
  explicit PaneRegistry(RegistryParams params = {}) : params_(params) {}

  const std::vector<RegisteredPane>& panes() const { return panes_; }
  std::size_t size() const { return panes_.size(); }
  const RegistryParams& params() const { return params_; }

  /// Adds a sensor-frame pane observed from `pose` (sensor -> map).
  void register_pane(const GlassPane& pane, const Pose& pose, const GridGeometry& g, long scan_id = -1)
  {
    pose.validate();
    const auto outline = pane_outline(pane, g);
    if (outline.empty()) return;
    RegisteredPane e;
    e.plane = transform_plane(pane.plane, pose);
    std::vector<Vec3> world;
    world.reserve(outline.size());
    for (const auto& x : outline) world.push_back(pose.apply(x));
    e.rect = rect_of(e.plane, world);
    e.inliers = std::max(1, pane.inlier_count);
    e.last_seen = scan_id;
    insert(std::move(e));
  }

  /// Inserts a map-frame entry, merging it with every co-planar overlapping
  /// entry until none remain.
  void insert(RegisteredPane e)
  {
    for (bool merged = true; merged;) {
      merged = false;
      for (std::size_t i = 0; i < panes_.size(); ++i)
        if (mergeable(panes_[i], e)) {
          e = merge(panes_[i], e);
          panes_.erase(panes_.begin() + static_cast<std::ptrdiff_t>(i));
          merged = true;
          break;
        }
    }
    panes_.push_back(std::move(e));
  }

  /// Registry panes seen from `pose`, in the sensor frame, limited to those
  /// whose rectangle comes within lookup_range of the sensor.
  std::vector<GlassPane> lookup_panes(const Pose& pose, const GridGeometry& g) const
  {
    pose.validate();
    std::vector<GlassPane> out;
    const Pose inv = pose.inverse();
    for (const auto& e : panes_) {
      if (distance_to_rect(e, pose.translation) > params_.lookup_range_m) continue;
      GlassPane p;
      p.plane = transform_plane(e.plane, inv);
      p.source = PaneSource::registry;
      p.inlier_count = static_cast<int>(std::min<long>(e.inliers, 1L << 30));
      // Sample the rectangle densely enough that its angular footprint is exact
      // at grid resolution.
      std::vector<int> cols;
      double el_min = 1e300, el_max = -1e300;
      const int n = 24;
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
          if (i != 0 && i != n && j != 0 && j != n) continue;
          const double a = e.rect.left + (e.rect.right - e.rect.left) * i / n;
          const double b = e.rect.lower + (e.rect.upper - e.rect.lower) * j / n;
          const Vec3 x = inv.apply(plane_point(e.plane, a, b));
          if (x.norm() < 1e-9) continue;
          const double az = wrap_2pi(std::atan2(x.y(), x.x()));
          cols.push_back(g.column_of(az));
          const double el = std::atan2(x.z(), std::hypot(x.x(), x.y()));
          el_min = std::min(el_min, el);
          el_max = std::max(el_max, el);
        }
      if (cols.empty()) continue;
      int lower = -1, upper = -1;
      for (int r = 0; r < g.ring_count; ++r) {
        const double el = g.elevations[static_cast<std::size_t>(r)];
        if (el < el_min - 1e-9 || el > el_max + 1e-9) continue;
        if (lower < 0) lower = r;
        upper = r;
      }
      if (lower < 0) continue;
      const auto [start, span] = detail::circular_extent(cols, g.column_count);
      p.lower_ring = lower;
      p.upper_ring = upper;
      p.left_az = g.column_start(start);
      p.right_az = p.left_az + (span + 1) * g.step_azimuth;
      out.push_back(p);
    }
    return out;
  }

  void write(std::ostream& out) const
  {
    char buf[256];
    for (const auto& e : panes_) {
      const Vec3 n = e.plane.normal();
      std::snprintf(buf, sizeof buf, "pane %.9f %.9f %.9f %.9f %.6f %.6f %.6f %.6f %d %ld %ld", n.x(), n.y(), n.z(),
                    e.plane.d(), e.rect.left, e.rect.right, e.rect.lower, e.rect.upper, e.count, e.inliers,
                    e.last_seen);
      out << buf << '\n';
    }
  }

  void write(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write(out);
  }

  static PaneRegistry read(std::istream& in, RegistryParams params = {})
  {
    PaneRegistry reg(params);
    std::string line;
    long lineno = 0, record = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
      std::istringstream ss(line);
      std::string tag;
      if (!(ss >> tag)) continue;
      if (tag != "pane") throw ParseError("expected 'pane'", lineno, record);
      double a, b, c, d;
      RegisteredPane e;
      if (!(ss >> a >> b >> c >> d >> e.rect.left >> e.rect.right >> e.rect.lower >> e.rect.upper >> e.count))
        throw ParseError("truncated registry record", lineno, record);
      if (!(ss >> e.inliers)) e.inliers = e.count;
      if (!(ss >> e.last_seen)) e.last_seen = -1;
      const Vec3 n(a, b, c);
      if (!(n.norm() > 0.0)) throw ParseError("zero plane normal", lineno, record);
      e.plane = Plane(n, d);
      reg.panes_.push_back(e);
      ++record;
    }
    return reg;
  }

  static PaneRegistry read(const std::string& path, RegistryParams params = {})
  {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read(in, params);
  }

 private:
  bool mergeable(const RegisteredPane& a, const RegisteredPane& b) const
  {
    double dot = a.plane.normal().dot(b.plane.normal());
    double db = b.plane.d();
    if (dot < 0.0) {
      dot = -dot;
      db = -db;
    }
    if (rad2deg(std::acos(std::min(1.0, dot))) >= params_.merge_angle_deg) return false;
    if (std::abs(a.plane.d() - db) >= params_.merge_dist_m) return false;
    const PaneRect rb = rect_of(a.plane, rect_corners(b.plane, b.rect));
    const double tol = params_.merge_dist_m;
    return rb.left <= a.rect.right + tol && rb.right >= a.rect.left - tol && rb.lower <= a.rect.upper + tol &&
           rb.upper >= a.rect.lower - tol;
  }

  static RegisteredPane merge(const RegisteredPane& a, const RegisteredPane& b)
  {
    Vec3 nb = b.plane.normal();
    double db = b.plane.d();
    if (a.plane.normal().dot(nb) < 0.0) {
      nb = -nb;
      db = -db;
    }
    const double wa = static_cast<double>(a.inliers), wb = static_cast<double>(b.inliers);
    const Vec3 n = (wa * a.plane.normal() + wb * nb) / (wa + wb);
    const double d = (wa * a.plane.d() + wb * db) / (wa + wb);
    RegisteredPane m;
    m.plane = Plane(n.normalized(), d / n.norm());
    std::vector<Vec3> pts;
    for (const auto& x : rect_corners(a.plane, a.rect)) pts.push_back(x);
    for (const auto& x : rect_corners(b.plane, b.rect)) pts.push_back(x);
    m.rect = rect_of(m.plane, pts);
    m.count = a.count + b.count;
    m.inliers = a.inliers + b.inliers;
    m.last_seen = std::max(a.last_seen, b.last_seen);
    return m;
  }

  static double distance_to_rect(const RegisteredPane& e, const Vec3& x)
  {
    const auto c = plane_coords(e.plane, x);
    const double du = std::max({e.rect.left - c.x(), 0.0, c.x() - e.rect.right});
    const double dv = std::max({e.rect.lower - c.y(), 0.0, c.y() - e.rect.upper});
    const double dn = e.plane.distance(x);
    return std::sqrt(du * du + dv * dv + dn * dn);
  }

  RegistryParams params_;
  std::vector<RegisteredPane> panes_;
};

/// Reads `scan_id tx ty tz qx qy qz qw` lines. Quaternions are renormalized
/// when within 1e-6 of unit length (text precision); otherwise InputError.
inline std::map<long, Pose> read_poses(std::istream& in)
{
  std::map<long, Pose> out;
  std::string line;
  long lineno = 0, record = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ss(line);
    long id;
    if (!(ss >> id)) {
      std::string rest;
      if (std::istringstream(line) >> rest) throw ParseError("bad scan id", lineno, record);
      continue;
    }
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) throw ParseError("truncated pose record", lineno, record);
    Pose p;
    p.translation = Vec3(tx, ty, tz);
    p.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
    const double norm = p.rotation.norm();
    if (!(std::abs(norm - 1.0) <= 1e-6))
      throw ParseError("pose quaternion is not normalized (|q| = " + std::to_string(norm) + ")", lineno, record);
    p.rotation.normalize();
    if (!out.emplace(id, p).second) throw ParseError("duplicate scan id " + std::to_string(id), lineno, record);
    ++record;
  }
  return out;
}

inline std::map<long, Pose> read_poses(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_poses(in);
}

}  // namespace dualglass
