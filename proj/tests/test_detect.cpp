#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace dgtest;

namespace {

// Five rings around the horizon; ring 2 is the horizontal one.
GridGeometry ring_grid(int cols = 200) { return small_grid({-4, -2, 0, 2, 4}, cols); }

/// Horizontal ring with the given intensities from column 1 on, all at one
/// range; column 0 is left empty so the ring is not circular.
OrganizedCloud ring_cloud(const std::vector<double>& I, const std::vector<double>& ranges = {})
{
  const auto g = ring_grid(static_cast<int>(I.size()) + 1);
  OrganizedCloud cloud(g);
  for (std::size_t k = 0; k < I.size(); ++k) {
    const int col = static_cast<int>(k) + 1;
    cloud.set(2, col, beam_return(g, 2, col, ranges.empty() ? 5.0 : ranges[k], I[k]));
  }
  return cloud;
}

struct Run {
  int lo, apex, hi;
};

/// Every (lo, apex, hi) with a strict rise from below intensity_low to an
/// apex at or above intensity_max and a strict fall back below intensity_low,
/// by exhaustive enumeration. Intensities must be pairwise distinct.
std::vector<Run> oracle_runs(const std::vector<double>& I, const DetectParams& p)
{
  const int n = static_cast<int>(I.size());
  std::vector<Run> out;
  for (int a = 0; a < n; ++a) {
    if (I[a] < p.intensity_max) continue;
    for (int lo = 0; lo < a; ++lo)
      for (int hi = a + 1; hi < n; ++hi) {
        bool ok = I[lo] < p.intensity_low && I[hi] < p.intensity_low && hi - lo + 1 >= p.min_run_len;
        for (int k = lo + 1; ok && k <= a; ++k) ok = I[k] > I[k - 1] && I[k] >= p.intensity_low;
        for (int k = a + 1; ok && k <= hi; ++k) ok = I[k] < I[k - 1] && (k == hi || I[k] >= p.intensity_low);
        if (ok) out.push_back({lo, a, hi});
      }
  }
  return out;
}

}  // namespace

TEST(IntensityPeaks, ConstantRingHasNoCandidates)
{
  const auto cloud = ring_cloud(std::vector<double>(100, 50.0));
  EXPECT_TRUE(find_intensity_peaks(cloud, DetectParams{}).empty());
}

TEST(IntensityPeaks, RiseAndFallGivesOneCandidateAtTheApex)
{
  std::vector<double> I(40, 10.0);
  const std::vector<double> run{20, 60, 140, 220, 150, 70, 25};
  std::copy(run.begin(), run.end(), I.begin() + 10);
  const auto cloud = ring_cloud(I);
  const auto peaks = find_intensity_peaks(cloud, DetectParams{});
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_EQ(peaks[0].ring, 2);
  EXPECT_EQ(cloud.at(2, peaks[0].apex_col)->intensity, 220);

  std::vector<double> J(I.begin(), I.end());
  const auto oracle = oracle_runs(J, DetectParams{});
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(peaks[0].apex_col, oracle[0].apex + 1);
  EXPECT_EQ(peaks[0].cells.front().col, oracle[0].lo + 1);
  EXPECT_EQ(peaks[0].cells.back().col, oracle[0].hi + 1);
}

TEST(IntensityPeaks, RangeJumpBreaksTheRun)
{
  std::vector<double> I(40, 10.0), R(40, 5.0);
  const std::vector<double> run{20, 60, 140, 220, 150, 70, 25};
  std::copy(run.begin(), run.end(), I.begin() + 10);
  for (std::size_t k = 13; k < R.size(); ++k) R[k] = 6.0;  // 1.0 m jump between 140 and 220
  EXPECT_TRUE(find_intensity_peaks(ring_cloud(I, R), DetectParams{}).empty());
}

TEST(IntensityPeaks, AgreesWithExhaustiveOracleOnRandomRings)
{
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const DetectParams p;
  for (int trial = 0; trial < 200; ++trial) {
    // A few random hills on a noisy floor; values are distinct by construction.
    std::vector<double> I(120);
    for (std::size_t k = 0; k < I.size(); ++k) I[k] = 5.0 + 30.0 * jitter(rng) + 1e-6 * static_cast<double>(k);
    const int hills = 1 + trial % 4;
    for (int h = 0; h < hills; ++h) {
      const int c = 8 + static_cast<int>(jitter(rng) * 100);
      const double top = 120.0 + 130.0 * jitter(rng);
      const int half = 1 + static_cast<int>(jitter(rng) * 6);
      for (int d = -half; d <= half; ++d) {
        const int k = c + d;
        if (k < 0 || k >= static_cast<int>(I.size())) continue;
        I[static_cast<std::size_t>(k)] =
            std::max(I[static_cast<std::size_t>(k)], top * (1.0 - std::abs(d) / (half + 1.0)) + 1e-3 * jitter(rng));
      }
    }
    const auto got = find_intensity_peaks(ring_cloud(I), p);
    const auto want = oracle_runs(I, p);
    ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].apex_col, want[i].apex + 1);
      EXPECT_EQ(got[i].cells.front().col, want[i].lo + 1);
      EXPECT_EQ(got[i].cells.back().col, want[i].hi + 1);
    }
  }
}

namespace {

OrganizedCloud column_cloud(const std::vector<double>& vertical, int apex_ring)
{
  const auto g = ring_grid(50);
  OrganizedCloud cloud(g);
  for (std::size_t k = 0; k < vertical.size(); ++k) {
    const int r = apex_ring - static_cast<int>(vertical.size() / 2) + static_cast<int>(k);
    if (r >= 0 && r < g.ring_count) cloud.set(r, 20, beam_return(g, r, 20, 5.0, vertical[k]));
  }
  return cloud;
}

PeakCandidate candidate_at(int ring, int col)
{
  PeakCandidate pc;
  pc.ring = ring;
  pc.apex_col = col;
  return pc;
}

}  // namespace

TEST(VerticalCheck, PeakedColumnIsAccepted)
{
  const auto cloud = column_cloud({30, 90, 210, 85, 25}, 2);
  const auto vp = verify_peak_vertical(cloud, candidate_at(2, 20), DetectParams{});
  ASSERT_TRUE(vp);
  EXPECT_EQ(vp->vertical_cells.size(), 4u);
}

TEST(VerticalCheck, MonotoneColumnIsRejected)
{
  const auto cloud = column_cloud({30, 90, 210, 230, 250}, 2);
  EXPECT_FALSE(verify_peak_vertical(cloud, candidate_at(2, 20), DetectParams{}));
}

TEST(VerticalCheck, EdgeRingNeedsOnlyTheNeighboursThatExist)
{
  const auto g = ring_grid(50);
  OrganizedCloud cloud(g);
  cloud.set(0, 20, beam_return(g, 0, 20, 5.0, 210));
  cloud.set(1, 20, beam_return(g, 1, 20, 5.0, 120));
  const auto vp = verify_peak_vertical(cloud, candidate_at(0, 20), DetectParams{});
  ASSERT_TRUE(vp);
  EXPECT_EQ(vp->vertical_cells.size(), 1u);
}

TEST(DualDivergence, IdenticalChannelsGiveNoCandidates)
{
  const auto g = ring_grid(30);
  OrganizedCloud s(g);
  for (int c = 0; c < 30; ++c) s.set(1, c, beam_return(g, 1, c, 4.0, 50));
  OrganizedCloud l = s;
  const auto ev = detect_dual_divergence(make_dual_scan(s, l), DetectParams{});
  EXPECT_TRUE(ev.glass_candidates.empty());
  EXPECT_EQ(ev.normal_points.size(), 30u);
}

TEST(DualDivergence, NearerStrongestReturnIsTheCandidate)
{
  const auto g = ring_grid(30);
  OrganizedCloud s(g), l(g);
  s.set(3, 7, beam_return(g, 3, 7, 2.0, 120, ReturnChannel::strongest));
  l.set(3, 7, beam_return(g, 3, 7, 5.0, 30, ReturnChannel::last));
  const auto ev = detect_dual_divergence(make_dual_scan(s, l), DetectParams{});
  ASSERT_EQ(ev.glass_candidates.size(), 1u);
  EXPECT_NEAR(ev.glass_candidates[0].range(), 2.0, 1e-12);
  EXPECT_EQ(ev.glass_candidates[0].channel, ReturnChannel::strongest);
  ASSERT_EQ(ev.remain_points.size(), 1u);
  EXPECT_NEAR(ev.remain_points[0].range(), 5.0, 1e-12);
  EXPECT_TRUE(ev.has_glass(3, 7));
  EXPECT_FALSE(ev.has_glass(3, 8));
}

TEST(DualDivergence, ClassroomCandidatesLieOnThePane)
{
  const auto sim = simulate(bundled_scene("classroom"), 21);
  const auto ev = detect_dual_divergence(sim.scan, DetectParams{});
  ASSERT_FALSE(ev.glass_candidates.empty());
  const Plane& truth = sim.truth.panes.at(0).plane;
  std::size_t near = 0;
  for (const auto& p : ev.glass_candidates) near += truth.distance(p.position) <= RansacParams{}.inlier_dist;
  EXPECT_GE(static_cast<double>(near), 0.95 * static_cast<double>(ev.glass_candidates.size()));
}
