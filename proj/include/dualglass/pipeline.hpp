#pragma once

#include <algorithm>
#include <chrono>
#include <exception>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dualglass/boundary.hpp"
#include "dualglass/classify.hpp"
#include "dualglass/config.hpp"
#include "dualglass/detect.hpp"
#include "dualglass/eval.hpp"
#include "dualglass/ransac.hpp"
#include "dualglass/registry.hpp"

namespace dualglass {

struct PaneCandidate {
  GlassPane pane;
  std::vector<Cell> cells;  ///< glass cells supporting the plane
  std::vector<Vec3> points;
};

struct ScanDetection {
  GlassEvidence evidence;
  std::vector<PeakCandidate> peak_candidates;
  std::vector<VerifiedPeak> peaks;
  std::vector<GlassPane> panes;
  int rejected_occluded = 0;
  int merged_peak = 0;
};

namespace detail {

inline bool coplanar(const Plane& a, const Plane& b, const RegistryParams& rp)
{
  double dot = a.normal().dot(b.normal());
  double db = b.d();
  if (dot < 0.0) {
    dot = -dot;
    db = -db;
  }
  return rad2deg(std::acos(std::min(1.0, dot))) < rp.merge_angle_deg && std::abs(a.d() - db) < rp.merge_dist_m;
}

inline bool azimuth_overlap(const GlassPane& a, const GlassPane& b)
{
  return a.contains_azimuth(b.left_az) || a.contains_azimuth(b.right_az) || b.contains_azimuth(a.left_az) ||
         b.contains_azimuth(a.right_az);
}

/// Widens `a` to cover the grid extent of `b`.
inline void union_bounds(GlassPane& a, const GlassPane& b)
{
  a.lower_ring = std::min(a.lower_ring, b.lower_ring);
  a.upper_ring = std::max(a.upper_ring, b.upper_ring);
  double bl = b.left_az, br = b.right_az;
  // Express b in a's unwrapped frame.
  while (bl < a.left_az - kTwoPi / 2) {
    bl += kTwoPi;
    br += kTwoPi;
  }
  while (bl > a.left_az + kTwoPi / 2) {
    bl -= kTwoPi;
    br -= kTwoPi;
  }
  const double l = std::min(a.left_az, bl), r = std::max(a.right_az, br);
  a.left_az = wrap_2pi(l);
  a.right_az = a.left_az + (r - l);
}

/// Cells in the run's columns whose strongest return lies on the plane,
/// grown ring by ring away from the peak ring.
inline std::vector<Cell> grow_peak_cells(const VerifiedPeak& vp, const Plane& plane, const OrganizedCloud& strongest,
                                         double dist)
{
  std::vector<Cell> out = vp.run.cells;
  for (const auto& c : vp.vertical_cells) out.push_back(c);
  for (const auto& rc : vp.run.cells)
    for (int dir : {-1, +1})
      for (int r = rc.ring + dir; r >= 0 && r < strongest.rings(); r += dir) {
        const auto& p = strongest.at(r, rc.col);
        if (!p || plane.distance(p->position) > dist) break;
        out.push_back({r, rc.col});
      }
  std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
    return a.ring != b.ring ? a.ring < b.ring : a.col < b.col;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Cell& a, const Cell& b) { return a.ring == b.ring && a.col == b.col; }),
            out.end());
  return out;
}

inline Vec3 principal_axis(std::span<const Vec3> pts)
{
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) scatter += (p - c) * (p - c).transpose();
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(scatter).eigenvectors().col(2);
}

/// Plane of a verified peak. The run is a single scan line, so a direct fit is
/// degenerate across rings; the seed plane spans the run direction and the
/// vertical neighbours, and is then refitted to the cells grown from it.
inline std::optional<Plane> peak_plane(const VerifiedPeak& vp, const OrganizedCloud& strongest, double dist,
                                       std::vector<Cell>& cells)
{
  std::vector<Vec3> run, vert{strongest.at(vp.run.ring, vp.run.apex_col)->position};
  for (const auto& p : vp.run.points) run.push_back(p.position);
  for (const auto& c : vp.vertical_cells) vert.push_back(strongest.at(c)->position);
  if (run.size() < 2 || vert.size() < 2) return std::nullopt;
  const Vec3 n = principal_axis(run).cross(principal_axis(vert));
  if (n.norm() < 1e-6) return std::nullopt;
  Vec3 c = Vec3::Zero();
  for (const auto& p : run) c += p;
  Plane plane = Plane::through(c / static_cast<double>(run.size()), n.normalized());
  for (int iter = 0; iter < 2; ++iter) {
    cells = grow_peak_cells(vp, plane, strongest, dist);
    std::vector<Vec3> pts;
    int rmin = strongest.rings(), rmax = -1;
    for (const auto& cell : cells) {
      pts.push_back(strongest.at(cell)->position);
      rmin = std::min(rmin, cell.ring);
      rmax = std::max(rmax, cell.ring);
    }
    if (rmax - rmin < 2) break;
    plane = fit_plane_tls(pts);
  }
  cells = grow_peak_cells(vp, plane, strongest, dist);
  return plane;
}

inline double median_range(std::vector<Vec3> pts)
{
  if (pts.empty()) return 0.0;
  std::vector<double> r;
  r.reserve(pts.size());
  for (const auto& p : pts) r.push_back(p.norm());
  std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2), r.end());
  return r[r.size() / 2];
}

}  // namespace detail

/// Runs both detectors and turns their output into bounded panes.
///
/// Dual-return candidates are split into planes by sequential RANSAC. Each
/// verified intensity peak gives one more plane, fitted to the peak points. A
/// plane co-planar with an overlapping earlier dual-return plane only widens
/// that plane's bounds. A plane whose support lies mostly behind a nearer accepted
/// pane is dropped: seen through glass, it is an outside or reflected surface.
inline ScanDetection detect_panes(const DualScan& scan, const Config& cfg)
{
  ScanDetection det;
  const GridGeometry& g = scan.geometry();
  det.evidence = detect_dual_divergence(scan, cfg.detect);
  det.peak_candidates = find_intensity_peaks(scan.strongest, cfg.detect);
  for (const auto& pc : det.peak_candidates)
    if (auto vp = verify_peak_vertical(scan.strongest, pc, cfg.detect)) det.peaks.push_back(std::move(*vp));

  std::vector<PaneCandidate> cands;
  {
    std::vector<Vec3> pts;
    pts.reserve(det.evidence.glass_candidates.size());
    for (const auto& r : det.evidence.glass_candidates) pts.push_back(r.position);
    std::vector<Plane> extracted;
    for (auto& fit : fit_planes_ransac(pts, cfg.ransac)) {
      // Points just outside the inlier band of earlier planes can line up into
      // a plane that bridges them; such a fit is their noise tail.
      std::size_t tail = 0;
      for (auto i : fit.inliers)
        for (const auto& e : extracted)
          if (e.distance(pts[i]) <= 2.0 * cfg.ransac.inlier_dist) {
            ++tail;
            break;
          }
      extracted.push_back(fit.plane);
      if (2 * tail > fit.inliers.size()) continue;
      PaneCandidate pc;
      for (auto i : fit.inliers) {
        pc.cells.push_back(det.evidence.candidate_cells[i]);
        pc.points.push_back(pts[i]);
      }
      auto pane = find_boundary(fit.plane, pc.cells, scan, &det.evidence, cfg.boundary, PaneSource::dual_return,
                                static_cast<int>(fit.inliers.size()));
      if (!pane) continue;
      // The noise tail of an extracted pane can pass min_inliers as a second,
      // nearly identical plane; it belongs to the first.
      bool merged = false;
      for (auto& prev : cands)
        if (detail::coplanar(prev.pane.plane, pane->plane, cfg.registry) &&
            detail::azimuth_overlap(prev.pane, *pane)) {
          detail::union_bounds(prev.pane, *pane);
          prev.pane.inlier_count += pane->inlier_count;
          merged = true;
          break;
        }
      if (merged) continue;
      pc.pane = *pane;
      cands.push_back(std::move(pc));
    }
  }
  const std::size_t n_dual = cands.size();

  for (const auto& vp : det.peaks) {
    std::vector<Cell> cells;
    const auto plane = detail::peak_plane(vp, scan.strongest, cfg.ransac.inlier_dist, cells);
    if (!plane) continue;
    // Growth along the plane also picks up frame and wall cells; the bounds
    // come from the cells that show glass, when there are any.
    std::vector<Cell> glass_cells;
    for (const auto& c : cells)
      if (det.evidence.has_glass(c.ring, c.col)) glass_cells.push_back(c);
    auto pane = find_boundary(*plane, glass_cells.empty() ? cells : glass_cells, scan, &det.evidence, cfg.boundary,
                              PaneSource::intensity_peak, static_cast<int>(cells.size()));
    if (!pane) continue;
    bool merged = false;
    for (std::size_t i = 0; i < n_dual && !merged; ++i)
      if (detail::coplanar(cands[i].pane.plane, pane->plane, cfg.registry) &&
          detail::azimuth_overlap(cands[i].pane, *pane)) {
        detail::union_bounds(cands[i].pane, *pane);
        merged = true;
      }
    if (merged) {
      ++det.merged_peak;
      continue;
    }
    PaneCandidate pc;
    pc.pane = *pane;
    pc.cells = cells;
    for (const auto& c : cells) pc.points.push_back(scan.strongest.at(c)->position);
    cands.push_back(std::move(pc));
  }

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < cands.size(); ++i) order.emplace_back(detail::median_range(cands[i].points), i);
  std::sort(order.begin(), order.end());
  for (const auto& [rng, i] : order) {
    const auto& pc = cands[i];
    std::size_t hidden = 0;
    for (std::size_t k = 0; k < pc.cells.size(); ++k) {
      const Vec3& p = pc.points[k];
      const double range = p.norm();
      const Vec3 dir = p / range;
      for (const auto& acc : det.panes) {
        if (!acc.contains(pc.cells[k].ring, pc.cells[k].col, g)) continue;
        const double t = acc.plane.ray_parameter(dir);
        if (t > 0.0 && t < range - cfg.classify.glass_dist_m) {
          ++hidden;
          break;
        }
      }
    }
    if (2 * hidden > pc.cells.size()) {
      ++det.rejected_occluded;
      continue;
    }
    det.panes.push_back(pc.pane);
  }
  return det;
}

struct ScanResult {
  long scan_id = 0;
  ScanDetection detection;
  std::vector<GlassPane> panes;  ///< panes handed to the classifier
  bool from_registry = false;
  LabeledCloud labeled;
  double detect_ms = 0.0;
  double classify_ms = 0.0;
};

/// Single-scan pipeline without a registry.
inline ScanResult process_scan(const DualScan& scan, const Config& cfg)
{
  using clock = std::chrono::steady_clock;
  ScanResult res;
  res.scan_id = scan.scan_id;
  const auto t0 = clock::now();
  res.detection = detect_panes(scan, cfg);
  const auto t1 = clock::now();
  res.panes = res.detection.panes;
  res.labeled = classify_points(scan, res.panes, cfg.classify);
  res.labeled.scan_id = scan.scan_id;
  const auto t2 = clock::now();
  res.detect_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  res.classify_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  return res;
}

/// One scan handed to the driver, with optional truth.
struct ScanInput {
  DualScan scan;
  std::optional<GroundTruth> truth;
};

struct RunSummary {
  long scans = 0;
  long panes_detected = 0;
  long registry_fallbacks = 0;
  long verified_peaks = 0;
  long glass_candidates = 0;
  bool has_truth = false;
  bool has_truth_panes = false;
  ClassMetrics classes;
  PlaneMetrics planes;
  std::array<long, 5> label_counts{};  ///< distinct points per predicted label
};

/// Processes `count` scans in order. Loading, detection and classification run
/// on up to `threads` scans at a time; registry lookups and updates happen in
/// scan order, so the outcome does not depend on the thread count. `sink` is
/// called once per scan, in order.
inline RunSummary run_pipeline(std::size_t count, const std::function<ScanInput(std::size_t)>& load,
                               const Config& cfg, const std::map<long, Pose>* poses, PaneRegistry& registry,
                               const std::function<void(const ScanInput&, const ScanResult&)>& sink, int threads = 1)
{
  using clock = std::chrono::steady_clock;
  RunSummary sum;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads));
  auto parallel = [&](std::size_t n, const std::function<void(std::size_t)>& f) {
    if (n <= 1 || batch == 1) {
      for (std::size_t i = 0; i < n; ++i) f(i);
      return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n);
    for (std::size_t i = 0; i < n; ++i)
      pool.emplace_back([&, i] {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  };

  for (std::size_t base = 0; base < count; base += batch) {
    const std::size_t n = std::min(batch, count - base);
    std::vector<ScanInput> in(n);
    std::vector<ScanResult> out(n);
    parallel(n, [&](std::size_t k) {
      in[k] = load(base + k);
      const auto t0 = clock::now();
      out[k].scan_id = in[k].scan.scan_id;
      out[k].detection = detect_panes(in[k].scan, cfg);
      out[k].detect_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    });

    for (std::size_t k = 0; k < n; ++k) {
      auto& r = out[k];
      const GridGeometry& g = in[k].scan.geometry();
      const Pose* pose = nullptr;
      if (poses) {
        const auto it = poses->find(r.scan_id);
        if (it != poses->end()) pose = &it->second;
      }
      r.panes = r.detection.panes;
      if (r.panes.empty() && pose) {
        r.panes = registry.lookup_panes(*pose, g);
        r.from_registry = !r.panes.empty();
      }
      if (pose)
        for (const auto& p : r.detection.panes) registry.register_pane(p, *pose, g, r.scan_id);
    }

    parallel(n, [&](std::size_t k) {
      const auto t0 = clock::now();
      out[k].labeled = classify_points(in[k].scan, out[k].panes, cfg.classify);
      out[k].labeled.scan_id = out[k].scan_id;
      out[k].classify_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    });

    for (std::size_t k = 0; k < n; ++k) {
      const auto& r = out[k];
      ++sum.scans;
      sum.panes_detected += static_cast<long>(r.detection.panes.size());
      sum.registry_fallbacks += r.from_registry ? 1 : 0;
      sum.verified_peaks += static_cast<long>(r.detection.peaks.size());
      sum.glass_candidates += static_cast<long>(r.detection.evidence.glass_candidates.size());
      const auto& lc = r.labeled;
      for (std::size_t i = 0; i < lc.strongest.size(); ++i) {
        if (lc.strongest[i]) ++sum.label_counts[static_cast<std::size_t>(*lc.strongest[i])];
        if (lc.last[i] && !lc.last_alias[i]) ++sum.label_counts[static_cast<std::size_t>(*lc.last[i])];
      }
      if (in[k].truth) {
        sum.has_truth = true;
        sum.classes += evaluate_classification(lc, in[k].scan, *in[k].truth, 0.15, cfg.classify.eps_range_m);
        if (!in[k].truth->panes.empty()) {
          sum.has_truth_panes = true;
          sum.planes += evaluate_planes(r.panes, in[k].truth->panes, lc.geometry,
                                        static_cast<std::size_t>(cfg.ransac.min_inliers));
        }
      }
      sink(in[k], r);
    }
  }
  return sum;
}

/// Plain-text report: Table I and Table II layouts followed by a key=value
/// block. Contains no timing, so equal inputs give equal bytes.
inline std::string format_report(const RunSummary& s, const std::string& title)
{
  std::string out;
  char buf[256];
  auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
  };
  line("dualglass report: %s\n", title.c_str());
  line("scans %ld, panes detected %ld, registry fallbacks %ld\n\n", s.scans, s.panes_detected, s.registry_fallbacks);

  if (s.has_truth) {
    line("Table I. Point cloud classification (correct label, error < %.2f m)\n", s.classes.tol_m);
    line("%-12s %9s %9s %9s %10s %10s %12s %12s\n", "class", "points", "<0.1m", "<0.15m", "mean(m)", "stdev(m)",
         "mean_all(m)", "stdev_all(m)");
    const char* names[] = {"Inside", "Glass", "Reflection", "Outside"};
    for (Label l : kTruthClasses) {
      const auto& c = s.classes[l];
      line("%-12s %9ld %8.2f%% %8.2f%% %10.4f %10.4f %12.4f %12.4f\n", names[static_cast<int>(l)], c.total,
           100.0 * c.frac_01(), 100.0 * c.frac_tol(), c.mean(), c.stdev(), c.mean_all(), c.stdev_all());
    }
    out += "\n";
  }
  if (s.has_truth_panes) {
    const auto& p = s.planes;
    out += "Table II. Plane fitting\n";
    line("%-10s %9s %10s %12s %11s %10s\n", "samples", "detected", "RMS(m)", "RMS<0.08(%)", "angle(deg)",
         "detection");
    line("%-10ld %9ld %10.4f %12.2f %11.3f %9.2f%%\n\n", p.samples, p.detected, p.mean_rms(),
         100.0 * p.frac_rms_below(), p.mean_angle_deg(), 100.0 * p.detection_rate());
  }

  out += "[metrics]\n";
  line("scans=%ld\n", s.scans);
  line("panes_detected=%ld\n", s.panes_detected);
  line("registry_fallbacks=%ld\n", s.registry_fallbacks);
  line("verified_peaks=%ld\n", s.verified_peaks);
  line("glass_candidates=%ld\n", s.glass_candidates);
  for (Label l : {Label::I, Label::G, Label::R, Label::O, Label::U})
    line("labels.%c=%ld\n", label_char(l), s.label_counts[static_cast<std::size_t>(l)]);
  if (s.has_truth)
    for (Label l : kTruthClasses) {
      const auto& c = s.classes[l];
      const char k = label_char(l);
      line("class.%c.points=%ld\n", k, c.total);
      line("class.%c.frac_lt_0.1=%.6f\n", k, c.frac_01());
      line("class.%c.frac_lt_0.15=%.6f\n", k, c.frac_tol());
      line("class.%c.mean_m=%.6f\n", k, c.mean());
      line("class.%c.stdev_m=%.6f\n", k, c.stdev());
      line("class.%c.mean_all_m=%.6f\n", k, c.mean_all());
      line("class.%c.stdev_all_m=%.6f\n", k, c.stdev_all());
    }
  if (s.has_truth_panes) {
    const auto& p = s.planes;
    line("plane.samples=%ld\n", p.samples);
    line("plane.detected=%ld\n", p.detected);
    line("plane.detection_rate=%.6f\n", p.detection_rate());
    line("plane.rms_m=%.6f\n", p.mean_rms());
    line("plane.frac_rms_lt_0.08=%.6f\n", p.frac_rms_below());
    line("plane.angle_deg=%.6f\n", p.mean_angle_deg());
  }
  return out;
}

}  // namespace dualglass
