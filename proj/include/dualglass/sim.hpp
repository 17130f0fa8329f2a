#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dualglass/cloud.hpp"
#include "dualglass/plane.hpp"
#include "dualglass/pose.hpp"

namespace dualglass {

/// Parallelogram (or triangle) spanned by two edges from a corner.
struct Quad {
  Vec3 corner = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  bool triangle = false;

  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }

  std::array<Vec3, 4> corners() const
  {
    return {corner, corner + edge_u, corner + edge_u + edge_v, corner + edge_v};
  }

  /// Ray parameter of the hit, if the ray meets the face at t > t_min.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min = 1e-6) const
  {
    const Vec3 n = edge_u.cross(edge_v);
    const double den = n.dot(dir);
    if (std::abs(den) < 1e-15) return std::nullopt;
    const double t = n.dot(corner - origin) / den;
    if (!(t > t_min)) return std::nullopt;
    const Vec3 w = origin + t * dir - corner;
    const double nn = n.squaredNorm();
    const double a = w.cross(edge_v).dot(n) / nn;
    const double b = edge_u.cross(w).dot(n) / nn;
    if (a < 0.0 || b < 0.0 || a > 1.0 || b > 1.0) return std::nullopt;
    if (triangle && a + b > 1.0) return std::nullopt;
    return t;
  }
};

struct DiffuseSurface {
  Quad shape;
  double albedo = 0.5;
};

/// Rectangular glass pane. The frame is a diffuse coplanar border of
/// frame_width around the pane.
struct PaneSpec {
  Quad shape;
  double frame_width = 0.05;
  double frame_albedo = 0.3;
  double transmittance = 0.8;  ///< tau
  double reflectance = 0.15;   ///< rho, specular
  double diffuse = 0.05;       ///< delta

  std::vector<DiffuseSurface> frame_strips() const
  {
    std::vector<DiffuseSurface> out;
    if (frame_width <= 0.0) return out;
    const Vec3 u = shape.edge_u.normalized() * frame_width;
    const Vec3 v = shape.edge_v.normalized() * frame_width;
    const Vec3& C = shape.corner;
    const Vec3& U = shape.edge_u;
    const Vec3& V = shape.edge_v;
    out.push_back({{C - u - v, U + 2 * u, v}, frame_albedo});
    out.push_back({{C + V - u, U + 2 * u, v}, frame_albedo});
    out.push_back({{C - u, u, V}, frame_albedo});
    out.push_back({{C + U, u, V}, frame_albedo});
    return out;
  }
};

struct Scene {
  std::string name;
  std::vector<PaneSpec> panes;
  std::vector<DiffuseSurface> surfaces;
  Pose sensor_pose;       ///< sensor frame -> world
  double noise_sigma_m = 0.02;
  double p_edge = 0.0;    ///< probability of a split (edge) beam

  void validate() const
  {
    for (std::size_t i = 0; i < panes.size(); ++i) {
      const auto& p = panes[i];
      const auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
      if (p.shape.edge_u.norm() <= 0.0 || p.shape.edge_v.norm() <= 0.0)
        throw InputError("pane " + std::to_string(i) + " has a non-positive extent");
      if (!in01(p.transmittance) || !in01(p.reflectance) || !in01(p.diffuse) ||
          p.transmittance + p.reflectance + p.diffuse > 1.0 + 1e-12)
        throw InputError("pane " + std::to_string(i) + " optical coefficients out of range");
      if (p.frame_width < 0.0 || !in01(p.frame_albedo))
        throw InputError("pane " + std::to_string(i) + " frame parameters out of range");
    }
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      const auto& s = surfaces[i];
      if (!(s.albedo >= 0.0 && s.albedo <= 1.0))
        throw InputError("surface " + std::to_string(i) + " albedo out of range");
      if (!s.shape.corner.allFinite() || !s.shape.edge_u.allFinite() || !s.shape.edge_v.allFinite() ||
          s.shape.edge_u.cross(s.shape.edge_v).norm() <= 0.0)
        throw InputError("surface " + std::to_string(i) + " is degenerate");
    }
    if (!(noise_sigma_m >= 0.0) || !(p_edge >= 0.0 && p_edge <= 1.0))
      throw InputError("noise parameters out of range");
    sensor_pose.validate();
  }
};

/// Sensor and echo model of the simulator.
struct SimParams {
  int rings = 32;
  double elevation_min_deg = -30.67;
  double elevation_max_deg = 10.67;
  int columns = 2251;
  double intensity_scale = 255.0;    ///< I0
  double glass_lobe_power = 8.0;     ///< k in cos^k(theta)
  double glass_cutoff_deg = 45.0;    ///< theta_cut
  double glass_gain = 10.0;          ///< normal-incidence gain of the pane echo
  double detect_threshold = 5.0;
  double falloff_ref_m = 10.0;       ///< no range falloff inside this range
  double min_echo_separation_m = 0.2;

  GridGeometry grid() const
  {
    GridGeometry g;
    g.ring_count = rings;
    g.column_count = columns;
    g.step_azimuth = kTwoPi / columns;
    g.elevations = GridGeometry::linear_elevations(rings, deg2rad(elevation_min_deg), deg2rad(elevation_max_deg));
    return g;
  }

  double falloff(double range) const
  {
    if (range <= falloff_ref_m) return 1.0;
    const double q = falloff_ref_m / range;
    return q * q;
  }

  /// Angular shape of the pane echo: cos^k(theta), zero beyond the cutoff.
  double glass_lobe(double theta) const
  {
    if (theta > deg2rad(glass_cutoff_deg)) return 0.0;
    return std::pow(std::cos(theta), glass_lobe_power);
  }
};

struct Echo {
  double range = 0.0;
  double intensity = 0.0;
  Label truth = Label::I;
  Vec3 truth_position = Vec3::Zero();  ///< world frame, real surface point
  int pane_id = -1;
};

/// Up to three echoes of one beam, sorted by strictly increasing range.
using EchoSet = std::vector<Echo>;

namespace detail {

struct SceneHit {
  double t = 0.0;
  int index = -1;     ///< into CompiledScene::diffuse or Scene::panes
  bool pane = false;
};

/// Quad with the intersection terms precomputed. Same result as
/// Quad::intersect.
struct FastQuad {
  Vec3 corner, n, pa, pb;
  bool triangle = false;

  explicit FastQuad(const Quad& q) : corner(q.corner), triangle(q.triangle)
  {
    n = q.edge_u.cross(q.edge_v);
    const double nn = n.squaredNorm();
    pa = q.edge_v.cross(n) / nn;
    pb = n.cross(q.edge_u) / nn;
  }

  bool hit(const Vec3& origin, const Vec3& dir, double& t_out, double t_min = 1e-6) const
  {
    const double den = n.dot(dir);
    if (std::abs(den) < 1e-15) return false;
    const double t = n.dot(corner - origin) / den;
    if (!(t > t_min)) return false;
    const Vec3 w = origin + t * dir - corner;
    const double a = w.dot(pa), b = w.dot(pb);
    if (a < 0.0 || b < 0.0 || a > 1.0 || b > 1.0 || (triangle && a + b > 1.0)) return false;
    t_out = t;
    return true;
  }
};

struct CompiledScene {
  const Scene* scene = nullptr;
  std::vector<DiffuseSurface> diffuse;  ///< surfaces plus pane frames
  std::vector<FastQuad> diffuse_q, pane_q;

  explicit CompiledScene(const Scene& s) : scene(&s)
  {
    diffuse = s.surfaces;
    for (const auto& p : s.panes)
      for (auto& f : p.frame_strips()) diffuse.push_back(f);
    for (const auto& d : diffuse) diffuse_q.emplace_back(d.shape);
    for (const auto& p : s.panes) pane_q.emplace_back(p.shape);
  }

  std::optional<SceneHit> first_hit(const Vec3& o, const Vec3& d, bool include_panes) const
  {
    std::optional<SceneHit> best;
    double t;
    for (std::size_t i = 0; i < diffuse_q.size(); ++i)
      if (diffuse_q[i].hit(o, d, t) && (!best || t < best->t)) best = SceneHit{t, static_cast<int>(i), false};
    if (include_panes)
      for (std::size_t i = 0; i < pane_q.size(); ++i)
        if (pane_q[i].hit(o, d, t) && (!best || t < best->t)) best = SceneHit{t, static_cast<int>(i), true};
    return best;
  }
};

inline double cos_incidence(const Vec3& dir, const Vec3& normal) { return std::abs(dir.dot(normal)); }

inline EchoSet finalize_echoes(EchoSet echoes, const SimParams& params)
{
  std::erase_if(echoes, [&](const Echo& e) { return e.intensity < params.detect_threshold; });
  std::sort(echoes.begin(), echoes.end(), [](const Echo& a, const Echo& b) { return a.range < b.range; });
  // Echoes closer than the pulse separation fuse; the stronger one survives.
  EchoSet out;
  for (auto& e : echoes) {
    if (!out.empty() && e.range - out.back().range < params.min_echo_separation_m) {
      if (e.intensity > out.back().intensity) out.back() = e;
      continue;
    }
    out.push_back(e);
  }
  return out;
}

inline EchoSet trace_compiled(const CompiledScene& cs, const Vec3& origin, const Vec3& dir, const SimParams& params)
{
  EchoSet echoes;
  const auto hit = cs.first_hit(origin, dir, true);
  if (!hit) return echoes;
  const double I0 = params.intensity_scale;

  if (!hit->pane) {
    const auto& s = cs.diffuse[static_cast<std::size_t>(hit->index)];
    const double inten = I0 * s.albedo * cos_incidence(dir, s.shape.normal()) * params.falloff(hit->t);
    echoes.push_back({hit->t, std::min(inten, 255.0), Label::I, origin + hit->t * dir, -1});
    return finalize_echoes(std::move(echoes), params);
  }

  const auto& pane = cs.scene->panes[static_cast<std::size_t>(hit->index)];
  const Vec3 n = pane.shape.normal();
  const Vec3 p0 = origin + hit->t * dir;
  const double theta = std::acos(std::min(1.0, cos_incidence(dir, n)));

  const double g = params.glass_lobe(theta);
  if (g > 0.0) {
    const double inten = I0 * pane.diffuse * params.glass_gain * g * params.falloff(hit->t);
    echoes.push_back({hit->t, std::min(inten, 255.0), Label::G, p0, hit->index});
  }

  if (auto th = cs.first_hit(p0, dir, false)) {
    const auto& s = cs.diffuse[static_cast<std::size_t>(th->index)];
    const double r = hit->t + th->t;
    const double inten = I0 * pane.transmittance * pane.transmittance * s.albedo *
                         cos_incidence(dir, s.shape.normal()) * params.falloff(r);
    echoes.push_back({r, std::min(inten, 255.0), Label::O, p0 + th->t * dir, hit->index});
  }

  const Vec3 refl = dir - 2.0 * dir.dot(n) * n;
  if (auto sh = cs.first_hit(p0, refl, false)) {
    const auto& s = cs.diffuse[static_cast<std::size_t>(sh->index)];
    const double r = hit->t + sh->t;
    const double inten = I0 * pane.reflectance * pane.reflectance * s.albedo *
                         cos_incidence(refl, s.shape.normal()) * params.falloff(r);
    echoes.push_back({r, std::min(inten, 255.0), Label::R, p0 + sh->t * refl, hit->index});
  }
  return finalize_echoes(std::move(echoes), params);
}

}  // namespace detail

/// Echoes of one beam (world frame origin and unit direction).
inline EchoSet trace_beam(const Scene& scene, const Vec3& origin, const Vec3& dir, const SimParams& params)
{
  return detail::trace_compiled(detail::CompiledScene(scene), origin, dir.normalized(), params);
}

/// Indices of the strongest and last echo. Last is the farthest echo; strongest
/// is the most intense one unless that is the last, in which case the
/// second-strongest is reported. A single echo fills both channels.
inline std::optional<std::pair<std::size_t, std::size_t>> select_returns(const EchoSet& echoes)
{
  if (echoes.empty()) return std::nullopt;
  const std::size_t last = echoes.size() - 1;
  if (echoes.size() == 1) return std::make_pair(last, last);
  std::size_t strongest = 0;
  for (std::size_t i = 1; i < echoes.size(); ++i)
    if (echoes[i].intensity > echoes[strongest].intensity) strongest = i;
  if (strongest == last) {
    strongest = 0;
    for (std::size_t i = 1; i < last; ++i)
      if (echoes[i].intensity > echoes[strongest].intensity) strongest = i;
  }
  return std::make_pair(strongest, last);
}

struct TruthRecord {
  Label label = Label::I;
  Vec3 position = Vec3::Zero();  ///< sensor frame; for R the real surface point
  int pane_id = -1;
};

/// A scene pane expressed in the sensor frame, with the noise-free points
/// where beams first strike its interior.
struct TruthPane {
  int id = -1;
  Plane plane;
  std::array<Vec3, 4> corners;
  std::vector<Vec3> hit_points;
  std::vector<Cell> hit_cells;
};

struct GroundTruth {
  GridGeometry geometry;
  long scan_id = 0;
  std::vector<std::optional<TruthRecord>> strongest;  ///< per cell
  std::vector<std::optional<TruthRecord>> last;
  std::vector<TruthPane> panes;

  const std::optional<TruthRecord>& at(ReturnChannel ch, int ring, int col) const
  {
    return (ch == ReturnChannel::strongest ? strongest : last)[geometry.index(ring, col)];
  }
};

/// Per-cell annotation of both channels. Truth carries the true class and
/// position; classifier output carries the predicted class and the output
/// position (mirrored for R).
using Annotation = GroundTruth;

struct SimResult {
  DualScan scan;
  GroundTruth truth;
};

/// Casts every beam of the grid, selects dual returns and adds Gaussian range
/// noise. Each ring draws from its own seeded stream, so results do not depend
/// on evaluation order.
inline SimResult simulate_scan(const Scene& scene, const SimParams& params, std::uint64_t seed, long scan_id = 0)
{
  scene.validate();
  const GridGeometry grid = params.grid();
  const detail::CompiledScene cs(scene);
  const Pose& pose = scene.sensor_pose;
  const Vec3 origin = pose.translation;

  OrganizedCloud strongest(grid), last(grid);
  GroundTruth truth{.geometry = grid, .scan_id = scan_id};
  truth.strongest.resize(grid.cell_count());
  truth.last.resize(grid.cell_count());
  const Pose inv = pose.inverse();
  for (std::size_t i = 0; i < scene.panes.size(); ++i) {
    TruthPane tp;
    tp.id = static_cast<int>(i);
    const auto wc = scene.panes[i].shape.corners();
    for (int k = 0; k < 4; ++k) tp.corners[static_cast<std::size_t>(k)] = inv.apply(wc[static_cast<std::size_t>(k)]);
    tp.plane = Plane::through(tp.corners[0], (tp.corners[1] - tp.corners[0]).cross(tp.corners[3] - tp.corners[0]));
    truth.panes.push_back(std::move(tp));
  }

  for (int r = 0; r < grid.ring_count; ++r) {
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(r), 0x5eedu};
    std::mt19937_64 rng(sseq);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int c = 0; c < grid.column_count; ++c) {
      const Vec3 ds = grid.beam_direction(r, c);
      const Vec3 dw = pose.rotate(ds);
      EchoSet echoes = detail::trace_compiled(cs, origin, dw, params);

      if (const auto fh = cs.first_hit(origin, dw, true); fh && fh->pane) {
        auto& tp = truth.panes[static_cast<std::size_t>(fh->index)];
        tp.hit_points.push_back(fh->t * ds);
        tp.hit_cells.push_back({r, c});
      }

      if (scene.p_edge > 0.0 && echoes.size() == 1 && echoes[0].truth == Label::I && unit(rng) < scene.p_edge) {
        // Split footprint: half the beam grazes whatever lies half a column away.
        const double az = grid.column_center(c) + 0.5 * grid.step_azimuth;
        const double el = grid.elevations[static_cast<std::size_t>(r)];
        const Vec3 d2 = pose.rotate(Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)));
        const EchoSet other = detail::trace_compiled(cs, origin, d2, params);
        if (!other.empty() && std::abs(other.front().range - echoes[0].range) >= params.min_echo_separation_m) {
          Echo e = other.front();
          e.truth = Label::I;
          e.pane_id = -1;
          echoes[0].intensity *= 0.5;
          e.intensity *= 0.5;
          echoes.push_back(e);
          echoes = detail::finalize_echoes(std::move(echoes), params);
        }
      }

      const auto sel = select_returns(echoes);
      if (!sel) continue;
      std::vector<double> jitter(echoes.size());
      for (auto& j : jitter) j = scene.noise_sigma_m * noise(rng);

      auto emit = [&](std::size_t k, ReturnChannel ch) {
        const Echo& e = echoes[k];
        const double range = std::max(1e-3, e.range + jitter[k]);
        RawReturn ret;
        ret.position = range * ds;
        ret.intensity = e.intensity;
        ret.ring = r;
        ret.azimuth = grid.column_center(c);
        ret.channel = ch;
        (ch == ReturnChannel::strongest ? strongest : last).set(r, c, ret);
        TruthRecord tr{e.truth, inv.apply(e.truth_position), e.pane_id};
        (ch == ReturnChannel::strongest ? truth.strongest : truth.last)[grid.index(r, c)] = tr;
      };
      emit(sel->first, ReturnChannel::strongest);
      emit(sel->second, ReturnChannel::last);
    }
  }
  return {DualScan{std::move(strongest), std::move(last), scan_id, 0.1 * static_cast<double>(scan_id)}, std::move(truth)};
}

}  // namespace dualglass
