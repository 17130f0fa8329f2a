#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "dualglass/cloud.hpp"
#include "dualglass/detect.hpp"
#include "dualglass/plane.hpp"

namespace dualglass {

enum class PaneSource : std::uint8_t { intensity_peak, dual_return, registry };

/// A bounded pane: an infinite plane limited to an azimuth interval and a ring
/// interval of the scan grid. Azimuths are unwrapped: left_az is in [0, 2pi)
/// and right_az >= left_az may exceed 2pi when the pane straddles the seam.
struct GlassPane {
  Plane plane;
  double left_az = 0.0;
  double right_az = 0.0;
  int lower_ring = 0;
  int upper_ring = 0;
  int inlier_count = 0;
  PaneSource source = PaneSource::dual_return;

  bool contains_azimuth(double az) const
  {
    double a = wrap_2pi(az);
    if (a < left_az) a += kTwoPi;
    return a >= left_az && a <= right_az;
  }

  bool contains(int ring, int col, const GridGeometry& g) const
  {
    return ring >= lower_ring && ring <= upper_ring && contains_azimuth(g.column_center(col));
  }
};

struct BoundaryParams {
  double frame_search_dist_m = 0.10;
  int frame_gap_cols = 5;
};

namespace detail {

/// Rotates a set of columns on the circular grid so that it is contiguous
/// across the largest empty gap. Returns (first column, span in columns).
inline std::pair<int, int> circular_extent(std::vector<int> cols, int ncols)
{
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  if (cols.size() == 1) return {cols.front(), 0};
  int best_gap = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const int next = i + 1 < cols.size() ? cols[i + 1] : cols.front() + ncols;
    const int gap = next - cols[i];
    if (gap > best_gap) {
      best_gap = gap;
      best_i = i;
    }
  }
  const int start = best_i + 1 < cols.size() ? cols[best_i + 1] : cols.front();
  const int end = cols[best_i];
  int span = end - start;
  if (span < 0) span += ncols;
  return {start, span};
}

}  // namespace detail

/// Bounds the plane of a glass fit. Glass-bearing columns are the inlier
/// columns, extended sideways over beams that still diverge. Ring bounds are
/// the lowest and highest rings that carry glass in those columns. Left and
/// right bounds come from frame points: strongest-channel points without
/// divergence, within frame_search_dist of the infinite plane, up to
/// frame_gap columns beyond the outermost glass column; the nearest frame
/// column on each side wins. Without a visible frame the outermost glass
/// column is the bound.
inline std::optional<GlassPane> find_boundary(const Plane& plane, std::span<const Cell> glass_cells,
                                              const DualScan& scan, const GlassEvidence* evidence,
                                              const BoundaryParams& params, PaneSource source,
                                              int inlier_count)
{
  if (glass_cells.empty()) return std::nullopt;
  const GridGeometry& g = scan.geometry();

  std::vector<int> cols;
  cols.reserve(glass_cells.size());
  int lower = g.ring_count, upper = -1;
  for (const auto& c : glass_cells) {
    cols.push_back(c.col);
    lower = std::min(lower, c.ring);
    upper = std::max(upper, c.ring);
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  auto extend_rings = [&](int col) {
    if (!evidence) return;
    const int c = g.wrap_column(col);
    for (int r = 0; r < g.ring_count; ++r)
      if ((r < lower || r > upper) && evidence->has_glass(r, c)) {
        lower = std::min(lower, r);
        upper = std::max(upper, r);
      }
  };
  for (int c : cols) extend_rings(c);

  const auto extent = detail::circular_extent(cols, g.column_count);
  int start = extent.first;
  int end = start + extent.second;  // unwrapped

  auto is_frame_column = [&](int col) {
    const int c = g.wrap_column(col);
    for (int r = lower; r <= upper; ++r) {
      const auto& p = scan.strongest.at(r, c);
      if (!p) continue;
      const auto& l = scan.last.at(r, c);
      const bool divergent = evidence ? evidence->has_glass(r, c)
                                      : (l && std::abs(l->range() - p->range()) > 0.01);
      if (divergent) continue;
      if (plane.distance(p->position) <= params.frame_search_dist_m) return true;
    }
    return false;
  };

  // Glass-bearing columns continue past the inliers wherever the beams still
  // diverge (oblique parts of the pane return no glass echo), with holes of
  // up to frame_gap columns, until a frame column.
  if (evidence) {
    auto divergent_column = [&](int col) {
      const int c = g.wrap_column(col);
      for (int r = lower; r <= upper; ++r)
        if (evidence->has_glass(r, c)) return true;
      return false;
    };
    for (int dir : {-1, +1}) {
      int& edge = dir < 0 ? start : end;
      int reach = edge;
      for (int col = edge + dir; (dir < 0 ? end - col : col - start) < g.column_count; col += dir) {
        if (is_frame_column(col)) break;
        if (divergent_column(col)) {
          reach = col;
          extend_rings(col);
        } else if (std::abs(col - reach) > params.frame_gap_cols) {
          break;
        }
      }
      edge = reach;
    }
  }

  GlassPane pane;
  pane.plane = plane;
  pane.lower_ring = lower;
  pane.upper_ring = upper;
  pane.inlier_count = inlier_count;
  pane.source = source;

  int left_col = start;  // first glass column (unwrapped)
  for (int k = 1; k <= params.frame_gap_cols; ++k)
    if (is_frame_column(start - k)) {
      left_col = start - k + 1;
      break;
    }
  int right_col = end;  // last glass column (unwrapped)
  for (int k = 1; k <= params.frame_gap_cols; ++k)
    if (is_frame_column(end + k)) {
      right_col = end + k - 1;
      break;
    }
  pane.left_az = wrap_2pi(g.column_start(left_col));
  pane.right_az = pane.left_az + (right_col - left_col + 1) * g.step_azimuth;
  return pane;
}

}  // namespace dualglass
