#pragma once

#include <string>

#include "dualglass/sim.hpp"
#include "dualglass/toml_lite.hpp"

namespace dualglass {

namespace detail {

inline Vec3 vec3_key(const toml::Table& t, const std::string& key, const std::string& where)
{
  const auto a = toml::get_array(t, key, where);
  if (a.size() != 3) throw ConfigError(where + "." + key + ": expected 3 numbers");
  return {a[0], a[1], a[2]};
}

inline void check_keys(const toml::Table& t, std::initializer_list<const char*> allowed, const std::string& where)
{
  for (const auto& [k, v] : t.values) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key " + where + "." + k);
  }
}

inline double num_or(const toml::Table& t, const std::string& key, double dflt, const std::string& where)
{
  return t.has(key) ? toml::get_number(t, key, where) : dflt;
}

inline Quad quad_from(const toml::Table& t, const std::string& where)
{
  for (const char* k : {"corner", "edge_u", "edge_v"})
    if (!t.has(k)) throw ConfigError(where + ": missing '" + k + "'");
  Quad q{vec3_key(t, "corner", where), vec3_key(t, "edge_u", where), vec3_key(t, "edge_v", where), false};
  if (t.has("shape")) {
    const auto s = toml::get_string(t, "shape", where);
    if (s == "triangle")
      q.triangle = true;
    else if (s != "rect")
      throw ConfigError(where + ".shape: expected \"rect\" or \"triangle\"");
  }
  return q;
}

}  // namespace detail

/// Six axis-aligned faces of a box.
inline std::vector<DiffuseSurface> box_faces(const Vec3& lo, const Vec3& hi, double albedo)
{
  const Vec3 e = hi - lo;
  const Vec3 ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
  return {{{lo, ey, ez}, albedo},      {{lo + ex, ey, ez}, albedo}, {{lo, ex, ez}, albedo},
          {{lo + ey, ex, ez}, albedo}, {{lo, ex, ey}, albedo},      {{lo + ez, ex, ey}, albedo}};
}

/// Reads a scene description:
///   name = "..."
///   [sensor] position = [x, y, z], yaw_deg = a | quaternion = [qx, qy, qz, qw]
///   [noise]  sigma_r_m, p_edge
///   [[pane]] corner, edge_u, edge_v, frame_width, frame_albedo,
///            transmittance, reflectance, diffuse
///   [[surface]] corner, edge_u, edge_v, albedo, shape = "rect" | "triangle"
///   [[box]] min, max, albedo
inline Scene scene_from_document(const toml::Document& doc)
{
  Scene scene;
  for (const auto& [name, t] : doc.tables) {
    if (name.empty()) {
      detail::check_keys(t, {"name"}, "scene");
      if (t.has("name")) scene.name = toml::get_string(t, "name", "scene");
    } else if (name == "sensor") {
      detail::check_keys(t, {"position", "yaw_deg", "quaternion"}, "sensor");
      if (t.has("position")) scene.sensor_pose.translation = detail::vec3_key(t, "position", "sensor");
      if (t.has("yaw_deg") && t.has("quaternion")) throw ConfigError("sensor: give yaw_deg or quaternion, not both");
      if (t.has("yaw_deg"))
        scene.sensor_pose.rotation =
            Eigen::Quaterniond(Eigen::AngleAxisd(deg2rad(toml::get_number(t, "yaw_deg", "sensor")), Vec3::UnitZ()));
      if (t.has("quaternion")) {
        const auto q = toml::get_array(t, "quaternion", "sensor");
        if (q.size() != 4) throw ConfigError("sensor.quaternion: expected 4 numbers");
        scene.sensor_pose.rotation = Eigen::Quaterniond(q[3], q[0], q[1], q[2]);
      }
    } else if (name == "noise") {
      detail::check_keys(t, {"sigma_r_m", "p_edge"}, "noise");
      scene.noise_sigma_m = detail::num_or(t, "sigma_r_m", scene.noise_sigma_m, "noise");
      scene.p_edge = detail::num_or(t, "p_edge", scene.p_edge, "noise");
    } else {
      throw ConfigError("unknown scene section [" + name + "]");
    }
  }
  for (const auto& [name, arr] : doc.arrays) {
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& t = arr[i];
      const std::string where = name + "[" + std::to_string(i) + "]";
      if (name == "pane") {
        detail::check_keys(t, {"corner", "edge_u", "edge_v", "frame_width", "frame_albedo", "transmittance",
                               "reflectance", "diffuse"},
                           where);
        PaneSpec p;
        p.shape = detail::quad_from(t, where);
        p.frame_width = detail::num_or(t, "frame_width", p.frame_width, where);
        p.frame_albedo = detail::num_or(t, "frame_albedo", p.frame_albedo, where);
        p.transmittance = detail::num_or(t, "transmittance", p.transmittance, where);
        p.reflectance = detail::num_or(t, "reflectance", p.reflectance, where);
        p.diffuse = detail::num_or(t, "diffuse", p.diffuse, where);
        scene.panes.push_back(p);
      } else if (name == "surface") {
        detail::check_keys(t, {"corner", "edge_u", "edge_v", "albedo", "shape"}, where);
        scene.surfaces.push_back({detail::quad_from(t, where), detail::num_or(t, "albedo", 0.5, where)});
      } else if (name == "box") {
        detail::check_keys(t, {"min", "max", "albedo"}, where);
        for (auto& f : box_faces(detail::vec3_key(t, "min", where), detail::vec3_key(t, "max", where),
                                 detail::num_or(t, "albedo", 0.5, where)))
          scene.surfaces.push_back(f);
      } else {
        throw ConfigError("unknown scene block [[" + name + "]]");
      }
    }
  }
  try {
    scene.validate();
  } catch (const InputError& e) {
    throw ConfigError(std::string("invalid scene: ") + e.what());
  }
  return scene;
}

inline Scene load_scene(const std::string& path) { return scene_from_document(toml::parse_file(path)); }

}  // namespace dualglass
