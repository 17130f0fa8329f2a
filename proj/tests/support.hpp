#pragma once

#include <string>
#include <vector>

#include "dualglass/dualglass.hpp"

namespace dgtest {

using namespace dualglass;

inline Scene bundled_scene(const std::string& name)
{
  return load_scene(std::string(DUALGLASS_SCENE_DIR) + "/" + name + ".toml");
}

inline SimResult simulate(const Scene& scene, std::uint64_t seed = 1, long id = 0)
{
  return simulate_scan(scene, SimParams{}, seed, id);
}

/// Small grid with rings at the given elevations (degrees) and `cols` columns.
inline GridGeometry small_grid(std::vector<double> elev_deg, int cols)
{
  std::vector<double> e;
  for (double d : elev_deg) e.push_back(deg2rad(d));
  GridGeometry g = GridGeometry::from_step(static_cast<int>(e.size()), kTwoPi / cols, e);
  return g;
}

inline RawReturn beam_return(const GridGeometry& g, int ring, int col, double range, double intensity,
                             ReturnChannel ch = ReturnChannel::strongest)
{
  RawReturn r;
  r.position = range * g.beam_direction(ring, col);
  r.intensity = intensity;
  r.ring = ring;
  r.azimuth = g.column_center(col);
  r.channel = ch;
  return r;
}

/// Axis-aligned rectangle as a scene quad.
inline Quad quad(Vec3 corner, Vec3 eu, Vec3 ev) { return Quad{corner, eu, ev, false}; }

/// Truth pane as the classifier sees a detected one.
inline GlassPane glass_from_truth(const TruthPane& tp, const GridGeometry& g)
{
  const auto b = truth_bounds(tp, g);
  GlassPane p;
  p.plane = tp.plane;
  if (!b) return p;
  p.left_az = b->left_az;
  p.right_az = b->right_az;
  p.lower_ring = b->lower_ring;
  p.upper_ring = b->upper_ring;
  p.inlier_count = static_cast<int>(tp.hit_points.size());
  return p;
}

}  // namespace dgtest
