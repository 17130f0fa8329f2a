#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dualglass/boundary.hpp"
#include "dualglass/classify.hpp"
#include "dualglass/sim.hpp"

namespace dualglass {

/// Error statistics for one truth class. Sums are kept so that partial
/// results combine exactly with operator+=.
struct ClassStats {
  long total = 0;       ///< truth points of the class
  long labeled = 0;     ///< of those, given the right label
  long within_01 = 0;   ///< right label and error < 0.1 m
  long within_tol = 0;  ///< right label and error < tol
  double sum = 0.0, sum_sq = 0.0;          ///< error over right-label points
  double sum_all = 0.0, sum_sq_all = 0.0;  ///< error over every truth point

  ClassStats& operator+=(const ClassStats& o)
  {
    total += o.total;
    labeled += o.labeled;
    within_01 += o.within_01;
    within_tol += o.within_tol;
    sum += o.sum;
    sum_sq += o.sum_sq;
    sum_all += o.sum_all;
    sum_sq_all += o.sum_sq_all;
    return *this;
  }

  double frac_01() const { return total ? static_cast<double>(within_01) / total : 0.0; }
  double frac_tol() const { return total ? static_cast<double>(within_tol) / total : 0.0; }
  double label_accuracy() const { return total ? static_cast<double>(labeled) / total : 0.0; }
  double mean() const { return labeled ? sum / labeled : 0.0; }
  double stdev() const { return labeled ? std::sqrt(std::max(0.0, sum_sq / labeled - mean() * mean())) : 0.0; }
  double mean_all() const { return total ? sum_all / total : 0.0; }
  double stdev_all() const
  {
    return total ? std::sqrt(std::max(0.0, sum_sq_all / total - mean_all() * mean_all())) : 0.0;
  }
};

/// Per-class metrics, indexed by Label (I, G, R, O). U never occurs as truth.
struct ClassMetrics {
  double tol_m = 0.15;
  std::array<ClassStats, 4> by_class{};

  const ClassStats& operator[](Label l) const { return by_class[static_cast<std::size_t>(l)]; }
  ClassStats& operator[](Label l) { return by_class[static_cast<std::size_t>(l)]; }

  ClassMetrics& operator+=(const ClassMetrics& o)
  {
    for (std::size_t i = 0; i < by_class.size(); ++i) by_class[i] += o.by_class[i];
    return *this;
  }
};

inline constexpr std::array<Label, 4> kTruthClasses = {Label::R, Label::G, Label::O, Label::I};

/// Predicted labels and output positions (mirrored for R) in the same per-cell
/// layout as ground truth.
inline Annotation annotate(const LabeledCloud& labeled, const DualScan& scan)
{
  const auto& g = labeled.geometry;
  Annotation a{.geometry = g};
  a.scan_id = labeled.scan_id;
  a.strongest.resize(g.cell_count());
  a.last.resize(g.cell_count());
  for (int r = 0; r < g.ring_count; ++r)
    for (int c = 0; c < g.column_count; ++c)
      for (const auto ch : {ReturnChannel::strongest, ReturnChannel::last}) {
        const auto& ret = scan.channel(ch).at(r, c);
        const auto& lab = labeled.label(ch, r, c);
        if (!ret || !lab) continue;
        TruthRecord t;
        t.label = *lab;
        t.position = *lab == Label::R ? *labeled.mirrored(ch, r, c) : ret->position;
        (ch == ReturnChannel::strongest ? a.strongest : a.last)[g.index(r, c)] = t;
      }
  return a;
}

/// Scores predictions against truth over the distinct points of `scan`: a
/// last return within eps_range of its strongest partner is counted once.
inline ClassMetrics evaluate_classification(const Annotation& predicted, const Annotation& truth, const DualScan& scan,
                                            double tol = 0.15, double eps_range = 0.01)
{
  if (predicted.scan_id != truth.scan_id)
    throw InputError("scan id mismatch: labels for " + std::to_string(predicted.scan_id) + ", truth for " +
                     std::to_string(truth.scan_id));
  const auto& g = truth.geometry;
  if (predicted.strongest.size() != g.cell_count() || predicted.last.size() != g.cell_count() ||
      scan.geometry().cell_count() != g.cell_count())
    throw MalformedInput("labels, truth and scan cover different grids");

  ClassMetrics m;
  m.tol_m = tol;
  auto score = [&](const std::optional<TruthRecord>& pred, const TruthRecord& t) {
    if (t.label == Label::U) return;
    ClassStats& s = m[t.label];
    ++s.total;
    const double err = pred ? (pred->position - t.position).norm() : std::numeric_limits<double>::infinity();
    if (std::isfinite(err)) {
      s.sum_all += err;
      s.sum_sq_all += err * err;
    }
    if (!pred || pred->label != t.label) return;
    ++s.labeled;
    s.sum += err;
    s.sum_sq += err * err;
    if (err < 0.1) ++s.within_01;
    if (err < tol) ++s.within_tol;
  };
  for (int r = 0; r < g.ring_count; ++r)
    for (int c = 0; c < g.column_count; ++c) {
      const std::size_t i = g.index(r, c);
      if (truth.strongest[i]) score(predicted.strongest[i], *truth.strongest[i]);
      if (!truth.last[i]) continue;
      const auto& s = scan.strongest.at(r, c);
      const auto& l = scan.last.at(r, c);
      if (s && l && std::abs(l->range() - s->range()) <= eps_range) continue;
      score(predicted.last[i], *truth.last[i]);
    }
  return m;
}

inline ClassMetrics evaluate_classification(const LabeledCloud& labeled, const DualScan& scan, const GroundTruth& truth,
                                            double tol = 0.15, double eps_range = 0.01)
{
  return evaluate_classification(annotate(labeled, scan), truth, scan, tol, eps_range);
}

/// Plane-fit results accumulated over scans. One sample is one truth pane in
/// one scan with at least min_truth_points hits.
struct PlaneMetrics {
  long samples = 0;
  long detected = 0;
  long rms_below = 0;  ///< detected samples with RMS < rms_threshold
  double rms_threshold = 0.08;
  double sum_rms = 0.0;
  double sum_angle_deg = 0.0;

  PlaneMetrics& operator+=(const PlaneMetrics& o)
  {
    samples += o.samples;
    detected += o.detected;
    rms_below += o.rms_below;
    sum_rms += o.sum_rms;
    sum_angle_deg += o.sum_angle_deg;
    return *this;
  }

  double mean_rms() const { return detected ? sum_rms / detected : 0.0; }
  double frac_rms_below() const { return detected ? static_cast<double>(rms_below) / detected : 0.0; }
  double mean_angle_deg() const { return detected ? sum_angle_deg / detected : 0.0; }
  double detection_rate() const { return samples ? static_cast<double>(detected) / samples : 0.0; }
};

inline double rms_to_plane(const Plane& p, std::span<const Vec3> pts)
{
  if (pts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : pts) s += p.signed_distance(x) * p.signed_distance(x);
  return std::sqrt(s / static_cast<double>(pts.size()));
}

/// Matches each sufficiently visible truth pane to the detected pane whose
/// boundary covers most of its hit cells (ties: lower RMS) and scores RMS of the
/// noise-free truth glass points to that plane and the normal angle. A truth
/// pane no detected boundary touches is a miss.
inline PlaneMetrics evaluate_planes(std::span<const GlassPane> detected, std::span<const TruthPane> truth,
                                    const GridGeometry& g, std::size_t min_truth_points = 30,
                                    double rms_threshold = 0.08)
{
  PlaneMetrics m;
  m.rms_threshold = rms_threshold;
  for (const auto& tp : truth) {
    if (tp.hit_points.size() < min_truth_points) continue;
    ++m.samples;
    const GlassPane* best = nullptr;
    long best_cover = 0;
    double best_rms = 0.0;
    for (const auto& p : detected) {
      long cover = 0;
      for (const auto& c : tp.hit_cells) cover += p.contains(c.ring, c.col, g) ? 1 : 0;
      if (cover == 0) continue;
      const double rms = rms_to_plane(p.plane, tp.hit_points);
      if (!best || cover > best_cover || (cover == best_cover && rms < best_rms)) {
        best = &p;
        best_cover = cover;
        best_rms = rms;
      }
    }
    if (!best) continue;
    ++m.detected;
    m.sum_rms += best_rms;
    if (best_rms < rms_threshold) ++m.rms_below;
    m.sum_angle_deg += rad2deg(best->plane.angle_to(tp.plane));
  }
  return m;
}

/// Grid bounds of a truth pane from the cells its interior was hit in.
struct TruthBounds {
  double left_az = 0.0, right_az = 0.0;  ///< unwrapped as in GlassPane
  int lower_ring = 0, upper_ring = 0;
};

inline std::optional<TruthBounds> truth_bounds(const TruthPane& tp, const GridGeometry& g)
{
  if (tp.hit_cells.empty()) return std::nullopt;
  std::vector<int> cols;
  TruthBounds b{0.0, 0.0, g.ring_count, -1};
  for (const auto& c : tp.hit_cells) {
    cols.push_back(c.col);
    b.lower_ring = std::min(b.lower_ring, c.ring);
    b.upper_ring = std::max(b.upper_ring, c.ring);
  }
  const auto [start, span] = detail::circular_extent(cols, g.column_count);
  b.left_az = g.column_start(start);
  b.right_az = b.left_az + (span + 1) * g.step_azimuth;
  return b;
}

/// Shortest signed difference a - b of two angles, in (-pi, pi].
inline double angle_diff(double a, double b)
{
  double d = std::fmod(a - b, kTwoPi);
  if (d > kTwoPi / 2) d -= kTwoPi;
  if (d <= -kTwoPi / 2) d += kTwoPi;
  return d;
}

}  // namespace dualglass
