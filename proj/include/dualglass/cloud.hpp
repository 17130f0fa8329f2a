#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "dualglass/types.hpp"

namespace dualglass {

/// A single lidar echo in the sensor frame.
struct RawReturn {
  Vec3 position = Vec3::Zero();  ///< meters
  double intensity = 0.0;        ///< unitless, [0, 255]
  int ring = 0;                  ///< laser channel id
  double azimuth = 0.0;          ///< firing azimuth, radians in [0, 2pi)
  ReturnChannel channel = ReturnChannel::strongest;

  double range() const { return position.norm(); }
};

/// Ring x azimuth layout of a spinning sensor.
struct GridGeometry {
  int ring_count = 32;
  int column_count = 2251;
  double step_azimuth = kTwoPi / 2251.0;  ///< radians, about 2.79 mrad
  /// Per-ring elevation angle in radians, ascending with ring id.
  std::vector<double> elevations = linear_elevations(32, deg2rad(-30.67), deg2rad(10.67));

  static std::vector<double> linear_elevations(int rings, double lo, double hi)
  {
    std::vector<double> e(static_cast<std::size_t>(rings));
    for (int r = 0; r < rings; ++r)
      e[static_cast<std::size_t>(r)] = rings == 1 ? lo : lo + (hi - lo) * r / (rings - 1);
    return e;
  }

  /// column_count = ceil(2pi / step); a step that divides 2pi exactly is not
  /// rounded up by float error.
  static int columns_for_step(double step)
  {
    return static_cast<int>(std::ceil(kTwoPi / step - 1e-6));
  }

  static GridGeometry from_step(int rings, double step, std::vector<double> elev = {})
  {
    GridGeometry g;
    g.ring_count = rings;
    g.step_azimuth = step;
    g.column_count = columns_for_step(step);
    g.elevations = elev.empty() ? linear_elevations(rings, deg2rad(-30.67), deg2rad(10.67))
                                : std::move(elev);
    return g;
  }

  std::size_t cell_count() const
  {
    return static_cast<std::size_t>(ring_count) * static_cast<std::size_t>(column_count);
  }

  std::size_t index(int ring, int col) const
  {
    return static_cast<std::size_t>(ring) * static_cast<std::size_t>(column_count) +
           static_cast<std::size_t>(col);
  }

  int column_of(double azimuth) const
  {
    const int c = static_cast<int>(std::floor(wrap_2pi(azimuth) / step_azimuth));
    return std::clamp(c, 0, column_count - 1);
  }

  double column_start(int col) const { return col * step_azimuth; }
  double column_center(int col) const { return (col + 0.5) * step_azimuth; }

  int wrap_column(int col) const
  {
    col %= column_count;
    return col < 0 ? col + column_count : col;
  }

  /// Nearest ring for an elevation, or nullopt when the elevation is more than
  /// half a ring spacing outside the field of view.
  std::optional<int> ring_of_elevation(double elev) const
  {
    if (elevations.empty()) return std::nullopt;
    const auto it = std::lower_bound(elevations.begin(), elevations.end(), elev);
    int best;
    if (it == elevations.begin()) {
      best = 0;
    } else if (it == elevations.end()) {
      best = ring_count - 1;
    } else {
      const int hi = static_cast<int>(it - elevations.begin());
      best = (elev - elevations[hi - 1] <= *it - elev) ? hi - 1 : hi;
    }
    const double spacing = elevations.size() > 1
                               ? (elevations.back() - elevations.front()) / (ring_count - 1)
                               : 0.05;
    if (std::abs(elev - elevations[static_cast<std::size_t>(best)]) > 0.5 * spacing)
      return std::nullopt;
    return best;
  }

  /// Unit beam direction for a cell (sensor frame).
  Vec3 beam_direction(int ring, int col) const
  {
    const double el = elevations[static_cast<std::size_t>(ring)];
    const double az = column_center(col);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }

  bool same_layout(const GridGeometry& o) const
  {
    return ring_count == o.ring_count && column_count == o.column_count &&
           std::abs(step_azimuth - o.step_azimuth) <= 1e-9 * step_azimuth;
  }
};

struct Cell {
  int ring;
  int col;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Ring x column matrix of optional returns. Absent cells are invalid.
class OrganizedCloud {
 public:
  OrganizedCloud() : OrganizedCloud(GridGeometry{}) {}
  explicit OrganizedCloud(GridGeometry geom)
      : geom_(std::move(geom)), cells_(geom_.cell_count())
  {}

  const GridGeometry& geometry() const { return geom_; }
  int rings() const { return geom_.ring_count; }
  int cols() const { return geom_.column_count; }

  const std::optional<RawReturn>& at(int ring, int col) const { return cells_[geom_.index(ring, col)]; }
  const std::optional<RawReturn>& at(Cell c) const { return at(c.ring, c.col); }

  void set(int ring, int col, RawReturn r) { cells_[geom_.index(ring, col)] = std::move(r); }
  void clear(int ring, int col) { cells_[geom_.index(ring, col)].reset(); }

  std::size_t valid_count() const
  {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); }));
  }

  const std::vector<std::optional<RawReturn>>& cells() const { return cells_; }

  void set_elevations(std::vector<double> e) { geom_.elevations = std::move(e); }

 private:
  GridGeometry geom_;
  std::vector<std::optional<RawReturn>> cells_;
};

namespace detail {

/// Total order used to resolve two returns landing in one cell: higher
/// intensity wins, then nearer range, then coordinates. Independent of
/// arrival order.
inline bool preferred(const RawReturn& a, const RawReturn& b)
{
  if (a.intensity != b.intensity) return a.intensity > b.intensity;
  const double ra = a.range(), rb = b.range();
  if (ra != rb) return ra < rb;
  return std::tie(a.position.x(), a.position.y(), a.position.z()) <
         std::tie(b.position.x(), b.position.y(), b.position.z());
}

}  // namespace detail

/// Bins unordered returns into the ring x azimuth grid. Throws MalformedInput
/// for a ring outside [0, ring_count).
inline OrganizedCloud organize_scan(std::span<const RawReturn> returns, const GridGeometry& geom)
{
  OrganizedCloud cloud(geom);
  for (std::size_t i = 0; i < returns.size(); ++i) {
    RawReturn r = returns[i];
    if (r.ring < 0 || r.ring >= geom.ring_count)
      throw MalformedInput("return " + std::to_string(i) + " has ring " + std::to_string(r.ring) +
                           " outside [0, " + std::to_string(geom.ring_count) + ")");
    r.azimuth = wrap_2pi(r.azimuth);
    const int col = geom.column_of(r.azimuth);
    const auto& cur = cloud.at(r.ring, col);
    if (!cur || detail::preferred(r, *cur)) cloud.set(r.ring, col, r);
  }
  return cloud;
}

/// Paired strongest / last clouds from one revolution.
struct DualScan {
  OrganizedCloud strongest;
  OrganizedCloud last;
  long scan_id = 0;
  double timestamp = 0.0;

  const GridGeometry& geometry() const { return strongest.geometry(); }
  int rings() const { return strongest.rings(); }
  int cols() const { return strongest.cols(); }

  const OrganizedCloud& channel(ReturnChannel c) const
  {
    return c == ReturnChannel::strongest ? strongest : last;
  }

  /// Number of beams where the last return is nearer than the strongest by
  /// more than eps_range.
  std::size_t ordering_violations(double eps_range = 0.01) const
  {
    std::size_t n = 0;
    for (int r = 0; r < rings(); ++r)
      for (int c = 0; c < cols(); ++c) {
        const auto& s = strongest.at(r, c);
        const auto& l = last.at(r, c);
        if (s && l && l->range() < s->range() - eps_range) ++n;
      }
    return n;
  }
};

inline DualScan make_dual_scan(OrganizedCloud strongest, OrganizedCloud last, long scan_id = 0,
                               double timestamp = 0.0)
{
  if (!strongest.geometry().same_layout(last.geometry()))
    throw MalformedInput("strongest and last clouds have different grid geometry");
  return DualScan{std::move(strongest), std::move(last), scan_id, timestamp};
}

/// Splits an interleaved dual-return stream by its channel tags and organizes
/// both halves on the same grid.
inline DualScan split_dual_returns(std::span<const RawReturn> stream, const GridGeometry& geom,
                                   long scan_id = 0, double timestamp = 0.0)
{
  std::vector<RawReturn> s, l;
  s.reserve(stream.size());
  l.reserve(stream.size());
  for (const auto& r : stream) (r.channel == ReturnChannel::strongest ? s : l).push_back(r);
  return make_dual_scan(organize_scan(s, geom), organize_scan(l, geom), scan_id, timestamp);
}

/// Per-ring mean elevation over valid cells of both clouds; rings without data
/// are filled by linear interpolation, or by the default table when no ring
/// has data.
inline std::vector<double> estimate_ring_elevations(const DualScan& scan)
{
  const int n = scan.rings();
  std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(n), 0);
  for (const auto* cloud : {&scan.strongest, &scan.last})
    for (const auto& c : cloud->cells())
      if (c && c->range() > 0.0) {
        sum[static_cast<std::size_t>(c->ring)] += std::asin(std::clamp(c->position.z() / c->range(), -1.0, 1.0));
        ++cnt[static_cast<std::size_t>(c->ring)];
      }
  std::vector<int> known;
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < n; ++r)
    if (cnt[static_cast<std::size_t>(r)] > 0) {
      e[static_cast<std::size_t>(r)] = sum[static_cast<std::size_t>(r)] / cnt[static_cast<std::size_t>(r)];
      known.push_back(r);
    }
  if (known.empty()) return scan.geometry().elevations;
  const auto fallback = GridGeometry::linear_elevations(n, deg2rad(-30.67), deg2rad(10.67));
  for (int r = 0; r < n; ++r) {
    if (cnt[static_cast<std::size_t>(r)] > 0) continue;
    const auto hi = std::upper_bound(known.begin(), known.end(), r);
    if (hi == known.begin()) {
      e[static_cast<std::size_t>(r)] = e[static_cast<std::size_t>(*hi)] +
                                       (fallback[static_cast<std::size_t>(r)] - fallback[static_cast<std::size_t>(*hi)]);
    } else if (hi == known.end()) {
      const int lo = *(hi - 1);
      e[static_cast<std::size_t>(r)] = e[static_cast<std::size_t>(lo)] +
                                       (fallback[static_cast<std::size_t>(r)] - fallback[static_cast<std::size_t>(lo)]);
    } else {
      const int lo = *(hi - 1), up = *hi;
      const double t = double(r - lo) / double(up - lo);
      e[static_cast<std::size_t>(r)] = (1 - t) * e[static_cast<std::size_t>(lo)] + t * e[static_cast<std::size_t>(up)];
    }
  }
  return e;
}

}  // namespace dualglass
