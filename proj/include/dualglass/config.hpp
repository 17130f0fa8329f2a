#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "dualglass/boundary.hpp"
#include "dualglass/classify.hpp"
#include "dualglass/detect.hpp"
#include "dualglass/ransac.hpp"
#include "dualglass/sim.hpp"
#include "dualglass/toml_lite.hpp"

namespace dualglass {

struct RegistryParams {
  double merge_angle_deg = 5.0;
  double merge_dist_m = 0.1;
  double lookup_range_m = 50.0;
};

/// Every tunable of the pipeline. Each value has exactly one key in the
/// config file.
struct Config {
  DetectParams detect;
  RansacParams ransac;
  BoundaryParams boundary;
  ClassifyParams classify;
  SimParams sim;
  RegistryParams registry;
};

namespace detail {

struct Binding {
  std::function<void(double)> set;
  std::function<double()> get;
};

inline std::map<std::string, std::map<std::string, Binding>> config_bindings(Config& c)
{
  auto num = [](double& x) { return Binding{[&x](double v) { x = v; }, [&x] { return x; }}; };
  auto integer = [](int& x) {
    return Binding{[&x](double v) {
                     if (v != static_cast<double>(static_cast<int>(v))) throw ConfigError("expected an integer");
                     x = static_cast<int>(v);
                   },
                   [&x] { return static_cast<double>(x); }};
  };
  auto seed = [](std::uint64_t& x) {
    return Binding{[&x](double v) {
                     if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
                       throw ConfigError("expected a non-negative integer");
                     x = static_cast<std::uint64_t>(v);
                   },
                   [&x] { return static_cast<double>(x); }};
  };
  return {
      {"detect",
       {{"eps_range_m", num(c.detect.eps_range_m)},
        {"gap_threshold_m", num(c.detect.gap_threshold_m)},
        {"intensity_low", num(c.detect.intensity_low)},
        {"intensity_max", num(c.detect.intensity_max)},
        {"min_run_len", integer(c.detect.min_run_len)}}},
      {"geometry",
       {{"ransac_inlier_dist_m", num(c.ransac.inlier_dist)},
        {"min_inliers", integer(c.ransac.min_inliers)},
        {"loop_threshold", integer(c.ransac.loop_threshold)},
        {"max_iters", integer(c.ransac.max_iters)},
        {"max_planes", integer(c.ransac.max_planes)},
        {"seed", seed(c.ransac.seed)},
        {"frame_search_dist_m", num(c.boundary.frame_search_dist_m)},
        {"frame_gap_cols", integer(c.boundary.frame_gap_cols)}}},
      {"classify",
       {{"glass_dist_m", num(c.classify.glass_dist_m)},
        {"trace_window_cells", integer(c.classify.trace_window_cells)},
        {"min_outside_points", integer(c.classify.min_outside_points)},
        {"range_margin_m", num(c.classify.range_margin_m)}}},
      {"sim",
       {{"rings", integer(c.sim.rings)},
        {"columns", integer(c.sim.columns)},
        {"elevation_min_deg", num(c.sim.elevation_min_deg)},
        {"elevation_max_deg", num(c.sim.elevation_max_deg)},
        {"intensity_scale", num(c.sim.intensity_scale)},
        {"glass_lobe_power", num(c.sim.glass_lobe_power)},
        {"glass_cutoff_deg", num(c.sim.glass_cutoff_deg)},
        {"glass_gain", num(c.sim.glass_gain)},
        {"detect_threshold", num(c.sim.detect_threshold)},
        {"falloff_ref_m", num(c.sim.falloff_ref_m)},
        {"min_echo_separation_m", num(c.sim.min_echo_separation_m)}}},
      {"registry",
       {{"merge_angle_deg", num(c.registry.merge_angle_deg)},
        {"merge_dist_m", num(c.registry.merge_dist_m)},
        {"lookup_range_m", num(c.registry.lookup_range_m)}}},
  };
}

}  // namespace detail

/// Applies a parsed document on top of the defaults. Unknown sections or
/// keys, and values of the wrong type, raise ConfigError.
inline Config config_from_document(const toml::Document& doc)
{
  Config cfg;
  auto bindings = detail::config_bindings(cfg);
  if (!doc.arrays.empty()) throw ConfigError("unexpected [[" + doc.arrays.begin()->first + "]] in config");
  for (const auto& [section, table] : doc.tables) {
    if (section.empty()) {
      if (!table.values.empty()) throw ConfigError("key '" + table.values.begin()->first + "' outside any section");
      continue;
    }
    const auto sec = bindings.find(section);
    if (sec == bindings.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : table.values) {
      const auto b = sec->second.find(key);
      if (b == sec->second.end()) throw ConfigError("unknown config key " + section + "." + key);
      const auto* d = std::get_if<double>(&value);
      if (!d) throw ConfigError(section + "." + key + ": expected a number");
      try {
        b->second.set(*d);
      } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
      }
    }
  }
  const auto& cl = cfg.classify;
  if (cfg.detect.eps_range_m < 0 || cfg.ransac.inlier_dist <= 0 || cfg.ransac.max_iters <= 0 ||
      cl.glass_dist_m <= 0 || cl.trace_window_cells < 0 || cfg.sim.rings <= 0 || cfg.sim.columns <= 0)
    throw ConfigError("config value out of range");
  cfg.classify.eps_range_m = cfg.detect.eps_range_m;
  return cfg;
}

inline Config load_config(const std::string& path) { return config_from_document(toml::parse_file(path)); }

/// Writes the full config, defaults included, in the file syntax.
inline std::string dump_config(Config cfg)
{
  std::string out;
  for (auto& [section, keys] : detail::config_bindings(cfg)) {
    out += "[" + section + "]\n";
    for (auto& [key, b] : keys) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g", b.get());
      out += key + " = " + buf + "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace dualglass
