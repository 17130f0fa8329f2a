#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "dualglass/cloud.hpp"

namespace dualglass {

struct DetectParams {
  double eps_range_m = 0.01;      ///< strongest/last "same point" tolerance
  double gap_threshold_m = 0.3;   ///< max range jump between neighbours in a peak run
  double intensity_low = 40.0;
  double intensity_max = 180.0;
  int min_run_len = 5;
};

/// A rise-then-fall intensity run on the horizontal ring.
struct PeakCandidate {
  int ring = 0;
  int apex_col = 0;
  std::vector<Cell> cells;  ///< run cells in column order, start to end
  std::vector<RawReturn> points;
};

/// Peak run plus the vertical neighbours at the apex column.
struct VerifiedPeak {
  PeakCandidate run;
  std::vector<Cell> vertical_cells;
  std::vector<RawReturn> points;  ///< run points followed by vertical points
};

/// Output of the dual-return divergence detector.
struct GlassEvidence {
  std::vector<RawReturn> glass_candidates;  ///< nearer, strongest-channel member of each differing pair
  std::vector<Cell> candidate_cells;        ///< parallel to glass_candidates
  std::vector<RawReturn> remain_points;     ///< farther member of each differing pair
  std::vector<RawReturn> normal_points;
  std::vector<std::vector<int>> degree_has_glass;  ///< per ring, sorted columns

  bool has_glass(int ring, int col) const
  {
    const auto& cols = degree_has_glass[static_cast<std::size_t>(ring)];
    return std::binary_search(cols.begin(), cols.end(), col);
  }
};

/// The ring whose valid cells have the smallest mean |elevation|.
inline std::optional<int> horizontal_ring(const OrganizedCloud& cloud)
{
  std::optional<int> best;
  double best_val = 0.0;
  for (int r = 0; r < cloud.rings(); ++r) {
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < cloud.cols(); ++c)
      if (const auto& p = cloud.at(r, c); p && p->range() > 0.0) {
        sum += std::abs(std::asin(std::clamp(p->position.z() / p->range(), -1.0, 1.0)));
        ++n;
      }
    if (n == 0) continue;
    const double mean = sum / n;
    if (!best || mean < best_val) {
      best = r;
      best_val = mean;
    }
  }
  return best;
}

/// Finds maximal rise-then-fall intensity runs on the horizontal ring of the
/// strongest cloud. A run starts at a point below intensity_low, climbs
/// (non-decreasing) to an apex at or above intensity_max and descends
/// (non-increasing) to a point below intensity_low. Runs never cross a missing
/// cell or a range jump of gap_threshold or more.
inline std::vector<PeakCandidate> find_intensity_peaks(const OrganizedCloud& strongest, const DetectParams& params)
{
  std::vector<PeakCandidate> out;
  const auto ring_opt = horizontal_ring(strongest);
  if (!ring_opt) return out;
  const int ring = *ring_opt;
  const int ncols = strongest.cols();

  // Split the ring into gap-free segments. When the ring is unbroken all the
  // way around, start at the column of lowest intensity so no run is cut by
  // the seam.
  auto linked = [&](int c0, int c1) {
    const auto& a = strongest.at(ring, c0);
    const auto& b = strongest.at(ring, c1);
    return a && b && std::abs(a->range() - b->range()) < params.gap_threshold_m;
  };
  int origin = -1;
  for (int c = 0; c < ncols; ++c)
    if (!linked(strongest.geometry().wrap_column(c - 1), c)) {
      origin = c;
      break;
    }
  if (origin < 0) {
    origin = 0;
    for (int c = 1; c < ncols; ++c)
      if (strongest.at(ring, c)->intensity < strongest.at(ring, origin)->intensity) origin = c;
  }

  std::vector<std::vector<int>> segments;
  for (int k = 0; k < ncols; ++k) {
    const int c = strongest.geometry().wrap_column(origin + k);
    if (!strongest.at(ring, c)) continue;
    if (segments.empty() || k == 0 || !linked(strongest.geometry().wrap_column(c - 1), c))
      segments.emplace_back();
    segments.back().push_back(c);
  }

  for (const auto& seg : segments) {
    const int n = static_cast<int>(seg.size());
    std::vector<double> I(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) I[static_cast<std::size_t>(i)] = strongest.at(ring, seg[static_cast<std::size_t>(i)])->intensity;
    int i = 0;
    while (i < n) {
      // apex: first index of a local maximum plateau at or above intensity_max
      if (I[i] < params.intensity_max || (i > 0 && I[i - 1] >= I[i])) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 < n && I[j + 1] == I[i]) ++j;
      if (j + 1 < n && I[j + 1] > I[i]) {
        i = j + 1;
        continue;
      }
      int lo = i;
      while (lo > 0 && I[lo] >= params.intensity_low && I[lo - 1] <= I[lo]) --lo;
      int hi = j;
      while (hi + 1 < n && I[hi] >= params.intensity_low && I[hi + 1] <= I[hi]) ++hi;
      const bool rises = I[lo] < params.intensity_low;
      const bool falls = I[hi] < params.intensity_low;
      if (rises && falls && hi - lo + 1 >= params.min_run_len) {
        PeakCandidate pc;
        pc.ring = ring;
        pc.apex_col = seg[static_cast<std::size_t>(i)];
        for (int k = lo; k <= hi; ++k) {
          pc.cells.push_back({ring, seg[static_cast<std::size_t>(k)]});
          pc.points.push_back(*strongest.at(ring, seg[static_cast<std::size_t>(k)]));
        }
        out.push_back(std::move(pc));
        i = hi + 1;
      } else {
        i = j + 1;
      }
    }
  }
  return out;
}

/// Accepts a candidate when the apex column, read across rings apex-2..apex+2,
/// also rises to the candidate ring and falls after it. Rings beyond the grid
/// edge or without a return are skipped; at least one neighbour ring must be
/// checked.
inline std::optional<VerifiedPeak> verify_peak_vertical(const OrganizedCloud& cloud, const PeakCandidate& cand,
                                                        const DetectParams& /*params*/)
{
  const auto& apex = cloud.at(cand.ring, cand.apex_col);
  if (!apex) return std::nullopt;
  VerifiedPeak vp;
  vp.run = cand;
  int checked = 0;
  for (int dir : {-1, +1}) {
    double prev = apex->intensity;
    for (int k = 1; k <= 2; ++k) {
      const int r = cand.ring + dir * k;
      if (r < 0 || r >= cloud.rings()) break;
      const auto& p = cloud.at(r, cand.apex_col);
      if (!p) continue;
      if (p->intensity > prev) return std::nullopt;
      prev = p->intensity;
      vp.vertical_cells.push_back({r, cand.apex_col});
      ++checked;
    }
  }
  if (checked == 0) return std::nullopt;
  vp.points = cand.points;
  for (const auto& c : vp.vertical_cells) vp.points.push_back(*cloud.at(c));
  return vp;
}

/// Compares strongest and last returns beam by beam. Equal ranges (within
/// eps_range_m) are normal points; otherwise the nearer point, which is the
/// strongest-channel return, becomes a glass candidate and the farther one a
/// remain point. A beam valid in one channel only is a normal point of that
/// channel.
inline GlassEvidence detect_dual_divergence(const DualScan& scan, const DetectParams& params)
{
  GlassEvidence ev;
  ev.degree_has_glass.resize(static_cast<std::size_t>(scan.rings()));
  for (int r = 0; r < scan.rings(); ++r)
    for (int c = 0; c < scan.cols(); ++c) {
      const auto& s = scan.strongest.at(r, c);
      const auto& l = scan.last.at(r, c);
      if (!s && !l) continue;
      if (!s || !l) {
        ev.normal_points.push_back(s ? *s : *l);
        continue;
      }
      const double rs = s->range(), rl = l->range();
      if (std::abs(rs - rl) <= params.eps_range_m) {
        ev.normal_points.push_back(*s);
        continue;
      }
      if (rs <= rl) {
        ev.glass_candidates.push_back(*s);
        ev.candidate_cells.push_back({r, c});
        ev.remain_points.push_back(*l);
        ev.degree_has_glass[static_cast<std::size_t>(r)].push_back(c);
      } else {
        // The last return lies nearer than the strongest: a sensor-order
        // violation. The glass echo cannot be a last-only return, so the beam
        // yields no candidate.
        ev.normal_points.push_back(*s);
        ev.remain_points.push_back(*l);
      }
    }
  return ev;
}

}  // namespace dualglass
