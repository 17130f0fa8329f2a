#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dualglass/plane.hpp"

namespace dualglass {

struct RansacParams {
  double inlier_dist = 0.05;  ///< meters
  int min_inliers = 30;
  int loop_threshold = 50;  ///< keep extracting planes while more points remain
  int max_iters = 500;      ///< hypotheses per plane
  std::uint64_t seed = 42;
  int max_planes = 16;      ///< cap on extraction rounds
  double confidence = 0.999;
};

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;  ///< indices into the input collection
};

namespace detail {

inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n)
{
  // Plain modulo draw: identical sequence across standard libraries.
  return static_cast<std::size_t>(rng() % n);
}

inline bool sample_plane(const Vec3& a, const Vec3& b, const Vec3& c, Plane& out)
{
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-9 * std::max(1.0, (b - a).norm() * (c - a).norm())) return false;
  out = Plane::through(a, n / len);
  return true;
}

}  // namespace detail

/// Sequential RANSAC: fit the best-supported plane on the remaining points,
/// keep it when it has at least min_inliers, remove its inliers, repeat while
/// more than loop_threshold points remain. Every kept plane is refit by total
/// least squares, alternating with inlier recollection until the set settles.
/// Deterministic for a fixed seed.
inline std::vector<PlaneFit> fit_planes_ransac(std::span<const Vec3> points, const RansacParams& params)
{
  std::vector<PlaneFit> planes;
  if (points.size() < 3) return planes;

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> remaining(points.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  auto collect = [&](const Plane& pl) {
    std::vector<std::size_t> in;
    for (auto idx : remaining)
      if (pl.distance(points[idx]) <= params.inlier_dist) in.push_back(idx);
    return in;
  };

  for (int round = 0; round < params.max_planes &&
                      remaining.size() > static_cast<std::size_t>(std::max(params.loop_threshold, 2));
       ++round) {
    const std::size_t n = remaining.size();
    std::size_t best_count = 0;
    Plane best;
    long needed = params.max_iters;
    for (long it = 0; it < std::min<long>(needed, params.max_iters); ++it) {
      const std::size_t i0 = detail::draw_index(rng, n);
      std::size_t i1 = detail::draw_index(rng, n);
      std::size_t i2 = detail::draw_index(rng, n);
      if (i0 == i1 || i0 == i2 || i1 == i2) continue;
      Plane hyp;
      if (!detail::sample_plane(points[remaining[i0]], points[remaining[i1]], points[remaining[i2]], hyp))
        continue;
      std::size_t count = 0;
      for (auto idx : remaining)
        if (hyp.distance(points[idx]) <= params.inlier_dist) ++count;
      if (count > best_count) {
        best_count = count;
        best = hyp;
        const double w = double(count) / double(n);
        const double p_fail = 1.0 - w * w * w;
        if (p_fail <= 0.0) {
          needed = it + 1;
        } else {
          const double k = std::log(1.0 - params.confidence) / std::log(p_fail);
          needed = std::min<long>(params.max_iters, static_cast<long>(std::ceil(k)) + 1);
        }
      }
    }
    if (best_count == 0) break;

    // Refit until the inlier set settles: a tilted hypothesis cuts the noise
    // band asymmetrically, so one refit stays biased toward it.
    std::vector<std::size_t> inliers = collect(best);
    for (int iter = 0; iter < 5 && inliers.size() >= 3; ++iter) {
      std::vector<Vec3> pts;
      pts.reserve(inliers.size());
      for (auto idx : inliers) pts.push_back(points[idx]);
      best = fit_plane_tls(pts);
      auto next = collect(best);
      const bool settled = next == inliers;
      inliers = std::move(next);
      if (settled) break;
    }
    if (inliers.size() >= static_cast<std::size_t>(params.min_inliers)) planes.push_back({best, inliers});

    std::vector<char> drop(points.size(), 0);
    for (auto idx : inliers) drop[idx] = 1;
    std::erase_if(remaining, [&](std::size_t idx) { return drop[idx] != 0; });
  }
  return planes;
}

}  // namespace dualglass
