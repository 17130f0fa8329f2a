#pragma once

// Text files next to the DRPC scans.
//
// Detected panes, one per line (sensor frame, azimuths in radians):
//   pane a b c d left_az right_az lower_ring upper_ring inliers source
// Truth panes of a simulated scan:
//   truth_pane id a b c d
//   hit id ring col x y z        (noise-free glass points)

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dualglass/boundary.hpp"
#include "dualglass/sim.hpp"

namespace dualglass {

inline const char* source_name(PaneSource s)
{
  switch (s) {
    case PaneSource::intensity_peak: return "peak";
    case PaneSource::dual_return: return "dual";
    case PaneSource::registry: return "registry";
  }
  return "?";
}

inline void write_panes(std::ostream& out, const std::vector<GlassPane>& panes)
{
  char buf[256];
  for (const auto& p : panes) {
    const Vec3& n = p.plane.normal();
    std::snprintf(buf, sizeof buf, "pane %.9f %.9f %.9f %.9f %.9f %.9f %d %d %d %s\n", n.x(), n.y(), n.z(),
                  p.plane.d(), p.left_az, p.right_az, p.lower_ring, p.upper_ring, p.inlier_count,
                  source_name(p.source));
    out << buf;
  }
}

inline std::vector<GlassPane> read_panes(std::istream& in)
{
  std::vector<GlassPane> out;
  std::string line, tag, src;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    if (!(ss >> tag) || tag[0] == '#') continue;
    double a, b, c, d;
    GlassPane p;
    if (tag != "pane" || !(ss >> a >> b >> c >> d >> p.left_az >> p.right_az >> p.lower_ring >> p.upper_ring >>
                           p.inlier_count >> src))
      throw ParseError("malformed pane record", lineno, static_cast<long>(out.size()));
    p.plane = Plane(Vec3(a, b, c), d);
    if (src == "peak")
      p.source = PaneSource::intensity_peak;
    else if (src == "dual")
      p.source = PaneSource::dual_return;
    else if (src == "registry")
      p.source = PaneSource::registry;
    else
      throw ParseError("unknown pane source '" + src + "'", lineno, static_cast<long>(out.size()));
    out.push_back(p);
  }
  return out;
}

inline void write_truth_panes(std::ostream& out, const std::vector<TruthPane>& panes)
{
  char buf[256];
  for (const auto& tp : panes) {
    const Vec3& n = tp.plane.normal();
    std::snprintf(buf, sizeof buf, "truth_pane %d %.9f %.9f %.9f %.9f\n", tp.id, n.x(), n.y(), n.z(), tp.plane.d());
    out << buf;
    for (std::size_t k = 0; k < tp.hit_points.size(); ++k) {
      const auto& x = tp.hit_points[k];
      std::snprintf(buf, sizeof buf, "hit %d %d %d %.6f %.6f %.6f\n", tp.id, tp.hit_cells[k].ring,
                    tp.hit_cells[k].col, x.x(), x.y(), x.z());
      out << buf;
    }
  }
}

inline std::vector<TruthPane> read_truth_panes(std::istream& in)
{
  std::vector<TruthPane> out;
  std::map<int, std::size_t> by_id;
  std::string line, tag;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "truth_pane") {
      TruthPane tp;
      double a, b, c, d;
      if (!(ss >> tp.id >> a >> b >> c >> d)) throw ParseError("malformed truth_pane record", lineno, -1);
      tp.plane = Plane(Vec3(a, b, c), d);
      by_id[tp.id] = out.size();
      out.push_back(tp);
    } else if (tag == "hit") {
      int id;
      Cell cell;
      double x, y, z;
      if (!(ss >> id >> cell.ring >> cell.col >> x >> y >> z)) throw ParseError("malformed hit record", lineno, -1);
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw ParseError("hit for unknown pane " + std::to_string(id), lineno, -1);
      out[it->second].hit_points.emplace_back(x, y, z);
      out[it->second].hit_cells.push_back(cell);
    } else {
      throw ParseError("unknown record '" + tag + "'", lineno, -1);
    }
  }
  return out;
}

template <typename T, typename F>
T read_file(const std::string& path, F&& reader)
{
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return reader(in);
}

template <typename F>
void write_file(const std::string& path, F&& writer)
{
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  writer(out);
  if (!out) throw InputError("write failed for '" + path + "'");
}

}  // namespace dualglass
