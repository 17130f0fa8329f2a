// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "support.hpp"

using namespace dgtest;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what)
{
  std::printf("%s %2d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Runs f(i) for i in [0, n) on every available core. Results are written by
/// index, so aggregation order does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f)
{
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) f(i);
    });
  for (auto& t : pool) t.join();
}

std::uint64_t scan_seed(std::uint64_t base, std::size_t i) { return base * 1000003ull + i; }

// ---------------------------------------------------------------------------
// 1. Mirror correctness.

void mirror_property()
{
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> D(0.0, 20.0);
  double worst_inv = 0.0, worst_fix = 0.0;
  long sign_bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const Plane p(Vec3(N(rng), N(rng), N(rng)), D(rng));
    const Vec3 x(10 * N(rng), 10 * N(rng), 10 * N(rng));
    worst_inv = std::max(worst_inv, (reflect_point(reflect_point(x, p), p) - x).norm());
    const Vec3 foot = x - p.signed_distance(x) * p.normal();
    const Vec3 on = foot - p.signed_distance(foot) * p.normal();
    worst_fix = std::max(worst_fix, (reflect_point(on, p) - on).norm());
    const double s0 = p.signed_distance(x), s1 = p.signed_distance(reflect_point(x, p));
    if (std::abs(s0 + s1) > 1e-9 || (std::abs(s0) > 1e-9 && (s0 > 0) == (s1 > 0))) ++sign_bad;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, worst_inv <= 1e-9 && worst_fix <= 1e-12 && sign_bad == 0 && secs < 1.0,
         fmt("mirror: 10000 pairs, max |RR(x)-x| %.2e m, max fixpoint error %.2e m, sign flips violated %ld, %.3f s",
             worst_inv, worst_fix, sign_bad, secs));
}

// ---------------------------------------------------------------------------
// Per-scan records for the simulated criteria.

struct ScanRecord {
  // Plane fitting, one entry per sufficiently visible truth pane.
  long plane_samples = 0, plane_good = 0, plane_detected = 0;
  double angle_sum = 0.0;
  // Classification.
  ClassMetrics classes;
  // Dual-return logic.
  long candidates = 0, candidate_violations = 0;
  // Intensity peaks: truth panes with at least one verified peak on them.
  long panes_visible = 0, panes_with_peak = 0, verified_peaks = 0;
  // Boundary of the first truth pane.
  bool boundary_ok = false;
  // Non-line-of-sight mapping: predicted R points and those on the real surface.
  long r_pred = 0, r_pred_ok = 0;
};

ScanRecord evaluate_scan(const SimResult& sim, const Config& cfg)
{
  ScanRecord rec;
  const auto& g = sim.scan.geometry();
  const auto res = process_scan(sim.scan, cfg);

  for (const auto& tp : sim.truth.panes) {
    const auto m = evaluate_planes(res.panes, std::span(&tp, 1), g, static_cast<std::size_t>(cfg.ransac.min_inliers));
    rec.plane_samples += m.samples;
    rec.plane_detected += m.detected;
    rec.plane_good += m.rms_below;
    rec.angle_sum += m.sum_angle_deg;
  }

  rec.classes = evaluate_classification(res.labeled, sim.scan, sim.truth, 0.15, cfg.classify.eps_range_m);

  const auto& ev = res.detection.evidence;
  rec.candidates = static_cast<long>(ev.glass_candidates.size());
  for (std::size_t i = 0; i < ev.glass_candidates.size(); ++i) {
    const auto& p = ev.glass_candidates[i];
    const auto& c = ev.candidate_cells[i];
    const auto& s = sim.scan.strongest.at(c.ring, c.col);
    const auto& l = sim.scan.last.at(c.ring, c.col);
    const bool ok = p.channel == ReturnChannel::strongest && s && l && s->position == p.position &&
                    std::abs(l->range() - s->range()) > cfg.detect.eps_range_m && s->range() < l->range();
    if (!ok) ++rec.candidate_violations;
  }

  rec.verified_peaks = static_cast<long>(res.detection.peaks.size());
  for (const auto& tp : sim.truth.panes) {
    if (tp.hit_cells.size() < static_cast<std::size_t>(cfg.ransac.min_inliers)) continue;
    ++rec.panes_visible;
    const bool hit = std::any_of(res.detection.peaks.begin(), res.detection.peaks.end(), [&](const VerifiedPeak& vp) {
      const Cell apex{vp.run.ring, vp.run.apex_col};
      return std::find(tp.hit_cells.begin(), tp.hit_cells.end(), apex) != tp.hit_cells.end();
    });
    rec.panes_with_peak += hit ? 1 : 0;
  }

  if (!sim.truth.panes.empty()) {
    const auto& tp = sim.truth.panes[0];
    const auto tb = truth_bounds(tp, g);
    for (const auto& p : res.panes) {
      if (!tb) break;
      const bool covers = std::any_of(tp.hit_cells.begin(), tp.hit_cells.end(),
                                      [&](const Cell& c) { return p.contains(c.ring, c.col, g); });
      if (!covers) continue;
      rec.boundary_ok = std::abs(angle_diff(p.left_az, tb->left_az)) <= 2 * g.step_azimuth &&
                        std::abs(angle_diff(p.right_az, tb->right_az)) <= 2 * g.step_azimuth &&
                        std::abs(p.lower_ring - tb->lower_ring) <= 1 && std::abs(p.upper_ring - tb->upper_ring) <= 1;
      break;
    }
  }

  for (const auto ch : {ReturnChannel::strongest, ReturnChannel::last})
    for (int r = 0; r < g.ring_count; ++r)
      for (int c = 0; c < g.column_count; ++c) {
        if (ch == ReturnChannel::last && res.labeled.last_alias[g.index(r, c)]) continue;
        const auto& lab = res.labeled.label(ch, r, c);
        if (!lab || *lab != Label::R) continue;
        ++rec.r_pred;
        const auto& t = sim.truth.at(ch, r, c);
        if (t && t->label == Label::R && (*res.labeled.mirrored(ch, r, c) - t->position).norm() < 0.15)
          ++rec.r_pred_ok;
      }
  return rec;
}

std::vector<ScanRecord> run_scene(const std::string& name, std::size_t scans, std::uint64_t base, const Config& cfg)
{
  const Scene scene = bundled_scene(name);
  std::vector<ScanRecord> out(scans);
  parallel_for(scans, [&](std::size_t i) {
    const auto sim = simulate_scan(scene, cfg.sim, scan_seed(base, i), static_cast<long>(i));
    out[i] = evaluate_scan(sim, cfg);
  });
  return out;
}

struct PlaneSummary {
  long samples = 0, good = 0, detected = 0;
  double angle_sum = 0.0;
  double frac_good() const { return samples ? static_cast<double>(good) / samples : 0.0; }
  double mean_angle() const { return detected ? angle_sum / detected : 180.0; }
};

PlaneSummary plane_summary(const std::vector<ScanRecord>& recs)
{
  PlaneSummary s;
  for (const auto& r : recs) {
    s.samples += r.plane_samples;
    s.good += r.plane_good;
    s.detected += r.plane_detected;
    s.angle_sum += r.angle_sum;
  }
  return s;
}

// ---------------------------------------------------------------------------
// 5. Sensor model.

Echo echo(double range, double intensity, Label truth)
{
  Echo e;
  e.range = range;
  e.intensity = intensity;
  e.truth = truth;
  return e;
}

void sensor_model()
{
  // An obstacle in front of the pane, a weak pane echo and an object behind it.
  const EchoSet fig{echo(1.5, 200, Label::I), echo(3.0, 30, Label::G), echo(6.0, 80, Label::O)};
  const auto sel = select_returns(fig);
  const bool fig_ok = sel && fig[sel->first].truth == Label::I && fig[sel->second].truth == Label::O;

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  long checked = 0, bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const double r0 = 1.0 + 10.0 * U(rng), r1 = r0 + 0.2 + 10.0 * U(rng);
    const double i1 = 10.0 + 245.0 * U(rng), i0 = 5.0 + (i1 - 5.0) * U(rng) * 0.999;
    const auto s = select_returns({echo(r0, i0, Label::G), echo(r1, i1, Label::O)});
    ++checked;
    if (!s || s->first != 0 || s->second != 1) ++bad;
  }
  report(5, fig_ok && bad == 0,
         fmt("sensor model: three-echo case strongest=%s last=%s; second-strongest substitution %ld/%ld two-echo sets",
             sel ? std::string(1, label_char(fig[sel->first].truth)).c_str() : "-",
             sel ? std::string(1, label_char(fig[sel->second].truth)).c_str() : "-", checked - bad, checked));
}

// ---------------------------------------------------------------------------
// 9. Performance.

void performance(const Config& cfg)
{
  const Scene scene = bundled_scene("classroom");
  const int n = 20;
  std::vector<SimResult> sims;
  for (int i = 0; i < n; ++i) sims.push_back(simulate_scan(scene, cfg.sim, scan_seed(900, i), i));
  process_scan(sims[0].scan, cfg);  // warm-up
  std::vector<double> ms;
  for (const auto& s : sims) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = process_scan(s.scan, cfg);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  double mean = 0.0;
  for (double x : ms) mean += x / n;
  const double worst = *std::max_element(ms.begin(), ms.end());
  report(9, mean < 100.0,
         fmt("performance: classroom scan through detect+classify on one thread, mean %.1f ms, max %.1f ms over %d scans",
             mean, worst, n));
}

// ---------------------------------------------------------------------------
// 10. Determinism.

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism()
{
  const auto base = fs::temp_directory_path() / "dualglass_acceptance";
  fs::remove_all(base);
  std::vector<fs::path> dirs{base / "a", base / "b"};
  bool ran = true;
  for (const auto& d : dirs) {
    const std::string cmd = std::string(DUALGLASS_CLI) + " --out " + d.string() +
                            " --seed 11 run --scene classroom --scans 3 >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    ran = ran && WIFEXITED(st) && WEXITSTATUS(st) == 0;
  }
  long files = 0, differ = 0;
  if (ran)
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      const auto name = e.path().filename();
      if (name == "timing.log") continue;
      ++files;
      if (!fs::exists(dirs[1] / name) || slurp(e.path()) != slurp(dirs[1] / name)) ++differ;
    }
  const bool has_all = fs::exists(dirs[0] / "registry.txt") && fs::exists(dirs[0] / "report.txt") &&
                       fs::exists(dirs[0] / "labeled_00000.drpc");
  report(10, ran && has_all && differ == 0 && files > 0,
         fmt("determinism: two CLI runs, %ld output files compared byte for byte, %ld differ", files, differ));
  fs::remove_all(base);
}

}  // namespace

int main()
{
  const Config cfg;
  mirror_property();

  const auto t0 = std::chrono::steady_clock::now();
  const auto classroom = run_scene("classroom", 300, 1, cfg);
  const auto railing = run_scene("railing", 300, 2, cfg);
  const auto corridor = run_scene("corridor", 300, 3, cfg);
  const auto noglass = run_scene("noglass", 50, 4, cfg);
  const double sim_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    const auto c = plane_summary(classroom), r = plane_summary(railing), f = plane_summary(corridor);
    const bool ok = c.frac_good() >= 0.85 && r.frac_good() >= 0.85 && f.frac_good() >= 0.85 &&
                    c.mean_angle() <= 5.0 && r.mean_angle() <= 5.0 && f.mean_angle() <= 12.0;
    report(2, ok,
           fmt("plane fit: RMS<=0.08 m in classroom %.1f%% / railing %.1f%% / corridor %.1f%% of %ld/%ld/%ld samples; "
               "mean angle %.2f / %.2f / %.2f deg",
               100 * c.frac_good(), 100 * r.frac_good(), 100 * f.frac_good(), c.samples, r.samples, f.samples,
               c.mean_angle(), r.mean_angle(), f.mean_angle()));
  }

  {
    ClassMetrics m;
    for (std::size_t i = 0; i < 100; ++i) m += classroom[i].classes;
    const double I = m[Label::I].frac_tol(), G = m[Label::G].frac_tol(), O = m[Label::O].frac_tol(),
                 R = m[Label::R].frac_tol();
    report(3, I >= 0.99 && G >= 0.95 && O >= 0.90 && R >= 0.80,
           fmt("classification: 100 classroom scans, correct and <0.15 m: inside %.2f%% glass %.2f%% outside %.2f%% "
               "reflection %.2f%%",
               100 * I, 100 * G, 100 * O, 100 * R));
  }

  {
    long cands = 0, bad = 0;
    for (const auto* set : {&classroom, &railing, &corridor, &noglass})
      for (const auto& r : *set) {
        cands += r.candidates;
        bad += r.candidate_violations;
      }
    report(4, bad == 0 && cands > 0,
           fmt("dual-return logic: %ld glass candidates over 950 scans, %ld not the nearer strongest return", cands,
               bad));
  }

  sensor_model();

  {
    long scans_ok = 0, fp = 0;
    for (const auto& r : corridor) scans_ok += r.panes_visible > 0 && r.panes_with_peak == r.panes_visible;
    for (const auto& r : noglass) fp += r.verified_peaks;
    const double frac = static_cast<double>(scans_ok) / static_cast<double>(corridor.size());
    report(6, frac >= 0.90 && fp == 0,
           fmt("intensity peaks: every corridor pane peaked in %.1f%% of %zu scans; %ld verified peaks in %zu no-glass "
               "scans",
               100 * frac, corridor.size(), fp, noglass.size()));
  }

  {
    long ok = 0;
    for (const auto& r : classroom) ok += r.boundary_ok;
    const double frac = static_cast<double>(ok) / static_cast<double>(classroom.size());
    report(7, frac >= 0.90,
           fmt("boundary: classroom pane within 2 columns and 1 ring of truth in %.1f%% of %zu scans", 100 * frac,
               classroom.size()));
  }

  {
    long n = 0, ok = 0;
    for (const auto& r : classroom) {
      n += r.r_pred;
      ok += r.r_pred_ok;
    }
    const double frac = n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
    report(8, frac >= 0.80,
           fmt("non-line-of-sight: %.2f%% of %ld mirrored R points within 0.15 m of the real surface", 100 * frac, n));
  }

  performance(cfg);
  determinism();

  std::printf("(%.1f s simulating and scoring 950 scans)\n", sim_secs);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
