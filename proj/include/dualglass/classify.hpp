#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dualglass/boundary.hpp"
#include "dualglass/cloud.hpp"
#include "dualglass/plane.hpp"

namespace dualglass {

struct ClassifyParams {
  double glass_dist_m = 0.05;
  int trace_window_cells = 1;
  int min_outside_points = 50;
  double range_margin_m = 0.10;  ///< "farther" / "coincident" tolerance along a beam
  double eps_range_m = 0.01;     ///< strongest/last duplicate tolerance
};

/// Which rule assigned a label.
enum class Decision : std::uint8_t { prepass, step1_far_beyond_mirror, step2_trace_through, step3_shares_beam,
                                     step3_mirror_match, unresolved };

struct LabeledCloud {
  GridGeometry geometry;
  long scan_id = 0;
  std::vector<std::optional<Label>> strongest;  ///< per cell
  std::vector<std::optional<Label>> last;
  std::vector<std::optional<Vec3>> mirrored_strongest;  ///< set iff label is R
  std::vector<std::optional<Vec3>> mirrored_last;
  std::vector<Decision> decision_strongest;
  std::vector<Decision> decision_last;
  std::vector<GlassPane> panes;        ///< panes supplied
  std::vector<char> pane_used;         ///< parallel to panes; false when ignored
  std::vector<char> last_alias;        ///< per cell: last return duplicates strongest

  const std::optional<Label>& label(ReturnChannel ch, int ring, int col) const
  {
    return (ch == ReturnChannel::strongest ? strongest : last)[geometry.index(ring, col)];
  }
  const std::optional<Vec3>& mirrored(ReturnChannel ch, int ring, int col) const
  {
    return (ch == ReturnChannel::strongest ? mirrored_strongest : mirrored_last)[geometry.index(ring, col)];
  }
  Decision decision(ReturnChannel ch, int ring, int col) const
  {
    return (ch == ReturnChannel::strongest ? decision_strongest : decision_last)[geometry.index(ring, col)];
  }
};

/// A distinct point of a dual scan: every strongest return plus each last
/// return that differs from its strongest partner.
struct ScanPoint {
  Vec3 position;
  double range;
  int ring;
  int col;
  ReturnChannel channel;
  std::size_t cell;
};

/// Enumerates distinct points; `last_alias[cell]` is true when the last
/// return of that cell duplicates the strongest one.
inline std::vector<ScanPoint> distinct_points(const DualScan& scan, double eps_range, std::vector<char>* last_alias = nullptr)
{
  const auto& g = scan.geometry();
  std::vector<ScanPoint> pts;
  pts.reserve(scan.strongest.valid_count() + scan.strongest.valid_count() / 8);
  if (last_alias) last_alias->assign(g.cell_count(), 0);
  for (int r = 0; r < g.ring_count; ++r)
    for (int c = 0; c < g.column_count; ++c) {
      const std::size_t cell = g.index(r, c);
      const auto& s = scan.strongest.at(r, c);
      const auto& l = scan.last.at(r, c);
      if (s) pts.push_back({s->position, s->range(), r, c, ReturnChannel::strongest, cell});
      if (l) {
        if (s && std::abs(l->range() - s->range()) <= eps_range) {
          if (last_alias) (*last_alias)[cell] = 1;
        } else {
          pts.push_back({l->position, l->range(), r, c, ReturnChannel::last, cell});
        }
      }
    }
  return pts;
}

namespace detail {

inline std::optional<Cell> cell_of_direction(const Vec3& p, const GridGeometry& g)
{
  const double rng = p.norm();
  if (!(rng > 0.0)) return std::nullopt;
  const auto ring = g.ring_of_elevation(std::asin(std::clamp(p.z() / rng, -1.0, 1.0)));
  if (!ring) return std::nullopt;
  return Cell{*ring, g.column_of(std::atan2(p.y(), p.x()))};
}

template <typename F>
void for_cone(const GridGeometry& g, Cell center, int window, F&& f)
{
  for (int dr = -window; dr <= window; ++dr) {
    const int r = center.ring + dr;
    if (r < 0 || r >= g.ring_count) continue;
    for (int dc = -window; dc <= window; ++dc) f(g.index(r, g.wrap_column(center.col + dc)));
  }
}

}  // namespace detail

/// Labels every valid cell of both channels as I, G, R, O or U.
///
/// Pre-pass: a point whose beam runs through a pane boundary is G when it lies
/// within glass_dist of that pane's plane and behind-pane when it lies beyond;
/// everything else is I. The nearest pane along the beam applies. Panes with
/// fewer than min_outside_points behind-pane points are dropped.
///
/// Behind-pane points are then resolved in three steps:
///  1. mirror every I point through the pane; a point farther than every
///     mirrored I point in its direction cone is O (an empty cone counts:
///     nothing inside could have produced a reflection there);
///  2. mirror the point back to the inside; if the sensor saw some non-glass
///     point farther along that mirrored direction, the mirrored location is
///     empty space and the point is O;
///  3. a point sharing its beam cone with a farther known O point is R, as is
///     a point whose mirrored location coincides with an observed inside
///     surface.
/// The nearer return of a differing pair is never O, so steps 1 and 2 skip it.
/// Anything left is U. R points carry their mirrored position.
inline LabeledCloud classify_points(const DualScan& scan, std::span<const GlassPane> panes, const ClassifyParams& params)
{
  const GridGeometry& g = scan.geometry();
  const std::size_t ncell = g.cell_count();
  LabeledCloud out{.geometry = g};
  out.scan_id = scan.scan_id;
  out.strongest.assign(ncell, std::nullopt);
  out.last.assign(ncell, std::nullopt);
  out.mirrored_strongest.assign(ncell, std::nullopt);
  out.mirrored_last.assign(ncell, std::nullopt);
  out.decision_strongest.assign(ncell, Decision::prepass);
  out.decision_last.assign(ncell, Decision::prepass);
  out.panes.assign(panes.begin(), panes.end());
  out.pane_used.assign(panes.size(), 1);

  const auto pts = distinct_points(scan, params.eps_range_m, &out.last_alias);
  const auto& last_alias = out.last_alias;
  const std::size_t np = pts.size();

  // Point index per cell and channel, for cone lookups.
  std::vector<std::int32_t> at_s(ncell, -1), at_l(ncell, -1);
  for (std::size_t i = 0; i < np; ++i)
    (pts[i].channel == ReturnChannel::strongest ? at_s : at_l)[pts[i].cell] = static_cast<std::int32_t>(i);

  enum class Pre : std::uint8_t { inside, glass, behind };
  std::vector<Pre> pre(np, Pre::inside);
  std::vector<std::int32_t> pane_of(np, -1);

  auto assign_panes = [&] {
    for (std::size_t i = 0; i < np; ++i) {
      const auto& p = pts[i];
      const Vec3 dir = p.position / p.range;
      double best_t = std::numeric_limits<double>::infinity();
      int best = -1;
      for (std::size_t k = 0; k < out.panes.size(); ++k) {
        if (!out.pane_used[k] || !out.panes[k].contains(p.ring, p.col, g)) continue;
        const double t = out.panes[k].plane.ray_parameter(dir);
        if (t > 0.0 && t < best_t) {
          best_t = t;
          best = static_cast<int>(k);
        }
      }
      pane_of[i] = best;
      pre[i] = Pre::inside;
      if (best < 0) continue;
      const double sd = out.panes[static_cast<std::size_t>(best)].plane.signed_distance(p.position);
      if (std::abs(sd) <= params.glass_dist_m)
        pre[i] = Pre::glass;
      else if (sd < 0.0)
        pre[i] = Pre::behind;
    }
  };

  for (;;) {
    assign_panes();
    std::vector<int> behind(out.panes.size(), 0);
    for (std::size_t i = 0; i < np; ++i)
      if (pre[i] == Pre::behind) ++behind[static_cast<std::size_t>(pane_of[i])];
    bool changed = false;
    for (std::size_t k = 0; k < out.panes.size(); ++k)
      if (out.pane_used[k] && behind[k] < params.min_outside_points) {
        out.pane_used[k] = 0;
        changed = true;
      }
    if (!changed) break;
  }

  std::vector<Label> label(np, Label::I);
  std::vector<Decision> decision(np, Decision::prepass);
  for (std::size_t i = 0; i < np; ++i) {
    if (pre[i] == Pre::glass) label[i] = Label::G;
    if (pre[i] == Pre::behind) {
      label[i] = Label::U;
      decision[i] = Decision::unresolved;
    }
  }

  // The nearer return of a differing pair is glass or reflection, never an
  // outside obstacle: the steps that find O skip it.
  std::vector<char> nearer_of_pair(np, 0);
  for (std::size_t i = 0; i < np; ++i)
    if (pts[i].channel == ReturnChannel::strongest && at_l[pts[i].cell] >= 0 &&
        pts[static_cast<std::size_t>(at_l[pts[i].cell])].range > pts[i].range)
      nearer_of_pair[i] = 1;

  const int w = params.trace_window_cells;
  const double margin = params.range_margin_m;

  // Step 1: farthest mirrored inside point per cell, per pane.
  for (std::size_t k = 0; k < out.panes.size(); ++k) {
    if (!out.pane_used[k]) continue;
    const auto& pane = out.panes[k];
    std::vector<float> mirror_far(ncell, -1.0f);
    for (std::size_t i = 0; i < np; ++i) {
      if (label[i] != Label::I) continue;
      const Vec3 m = reflect_point(pts[i].position, pane.plane);
      if (pane.plane.signed_distance(m) >= 0.0) continue;
      const auto cell = detail::cell_of_direction(m, g);
      if (!cell || !pane.contains(cell->ring, cell->col, g)) continue;
      auto& slot = mirror_far[g.index(cell->ring, cell->col)];
      slot = std::max(slot, static_cast<float>(m.norm()));
    }
    for (std::size_t i = 0; i < np; ++i) {
      if (pre[i] != Pre::behind || pane_of[i] != static_cast<int>(k) || nearer_of_pair[i]) continue;
      float far = -1.0f;
      detail::for_cone(g, {pts[i].ring, pts[i].col}, w, [&](std::size_t c) { far = std::max(far, mirror_far[c]); });
      if (pts[i].range > far + margin) {
        label[i] = Label::O;
        decision[i] = Decision::step1_far_beyond_mirror;
      }
    }
  }

  std::vector<std::optional<Vec3>> mirrored(np);
  std::vector<std::optional<Cell>> mirror_cell(np);
  for (std::size_t i = 0; i < np; ++i) {
    if (pre[i] != Pre::behind) continue;
    mirrored[i] = reflect_point(pts[i].position, out.panes[static_cast<std::size_t>(pane_of[i])].plane);
    mirror_cell[i] = detail::cell_of_direction(*mirrored[i], g);
  }

  auto cone_any = [&](Cell center, auto&& pred) {
    bool hit = false;
    detail::for_cone(g, center, w, [&](std::size_t c) {
      if (hit) return;
      for (const auto idx : {at_s[c], at_l[c]})
        if (idx >= 0 && pred(static_cast<std::size_t>(idx))) {
          hit = true;
          return;
        }
    });
    return hit;
  };

  // Step 2: a farther non-glass return along the mirrored direction.
  for (std::size_t i = 0; i < np; ++i) {
    if (label[i] != Label::U || !mirror_cell[i] || nearer_of_pair[i]) continue;
    const double reach = mirrored[i]->norm() + margin;
    if (cone_any(*mirror_cell[i], [&](std::size_t j) { return label[j] != Label::G && pts[j].range > reach; })) {
      label[i] = Label::O;
      decision[i] = Decision::step2_trace_through;
    }
  }

  // Step 3: reflections.
  for (std::size_t i = 0; i < np; ++i) {
    if (label[i] != Label::U) continue;
    const double ri = pts[i].range;
    if (cone_any({pts[i].ring, pts[i].col},
                 [&](std::size_t j) { return label[j] == Label::O && pts[j].range > ri + margin; })) {
      label[i] = Label::R;
      decision[i] = Decision::step3_shares_beam;
      continue;
    }
    if (mirror_cell[i]) {
      const double rm = mirrored[i]->norm();
      if (cone_any(*mirror_cell[i],
                   [&](std::size_t j) { return pre[j] == Pre::inside && std::abs(pts[j].range - rm) <= margin; })) {
        label[i] = Label::R;
        decision[i] = Decision::step3_mirror_match;
      }
    }
  }

  for (std::size_t i = 0; i < np; ++i) {
    const auto& p = pts[i];
    const bool strong = p.channel == ReturnChannel::strongest;
    (strong ? out.strongest : out.last)[p.cell] = label[i];
    (strong ? out.decision_strongest : out.decision_last)[p.cell] = decision[i];
    if (label[i] == Label::R) (strong ? out.mirrored_strongest : out.mirrored_last)[p.cell] = mirrored[i];
  }
  for (std::size_t c = 0; c < ncell; ++c)
    if (last_alias[c]) {
      out.last[c] = out.strongest[c];
      out.decision_last[c] = out.decision_strongest[c];
      out.mirrored_last[c] = out.mirrored_strongest[c];
    }
  return out;
}

struct MapPoint {
  Vec3 position;
  Label label;
  double intensity;
  int ring;
  int col;
  ReturnChannel channel;
};

/// Points for mapping: I, G and O as measured, R at the mirrored position,
/// U dropped. Duplicate last returns are emitted once.
inline std::vector<MapPoint> assemble_output(const LabeledCloud& labeled, const DualScan& scan)
{
  std::vector<MapPoint> out;
  const auto& g = labeled.geometry;
  for (int r = 0; r < g.ring_count; ++r)
    for (int c = 0; c < g.column_count; ++c) {
      const auto& s = scan.strongest.at(r, c);
      const auto& l = scan.last.at(r, c);
      for (const auto ch : {ReturnChannel::strongest, ReturnChannel::last}) {
        const auto& ret = ch == ReturnChannel::strongest ? s : l;
        if (!ret) continue;
        if (ch == ReturnChannel::last && labeled.last_alias[g.index(r, c)]) continue;
        const auto& lab = labeled.label(ch, r, c);
        if (!lab || *lab == Label::U) continue;
        Vec3 pos = ret->position;
        if (*lab == Label::R) pos = *labeled.mirrored(ch, r, c);
        out.push_back({pos, *lab, ret->intensity, r, c, ch});
      }
    }
  return out;
}

}  // namespace dualglass
