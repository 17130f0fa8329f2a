// dualglass: glass detection and reflection removal for dual-return lidar.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualglass/dualglass.hpp"

namespace fs = std::filesystem;
using namespace dualglass;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string poses_path;
  std::string out_dir = ".";
  int threads = 1;
};

Config load_common_config(const Common& c)
{
  return c.config_path.empty() ? Config{} : load_config(c.config_path);
}

std::optional<std::map<long, Pose>> load_poses(const Common& c)
{
  if (c.poses_path.empty()) return std::nullopt;
  return read_poses(c.poses_path);
}

std::string numbered(const std::string& stem, long id, const char* ext)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05ld%s", stem.c_str(), id, ext);
  return buf;
}

/// A scene argument is a path, or the name of a bundled scene.
Scene resolve_scene(const std::string& arg)
{
  if (fs::exists(arg)) return load_scene(arg);
  const fs::path bundled = fs::path(DUALGLASS_SCENE_DIR) / (arg + ".toml");
  if (fs::exists(bundled)) return load_scene(bundled.string());
  throw InputError("no scene file '" + arg + "'");
}

std::uint64_t scan_seed(std::uint64_t seed, std::size_t i) { return seed * 1000003ull + i; }

SimResult simulate_indexed(Scene scene, const Config& cfg, const Common& c,
                           const std::optional<std::map<long, Pose>>& poses, std::size_t i)
{
  const long id = static_cast<long>(i);
  if (poses) {
    const auto it = poses->find(id);
    if (it == poses->end()) throw InputError("no pose for scan " + std::to_string(id));
    scene.sensor_pose = it->second;
  }
  return simulate_scan(scene, cfg.sim, scan_seed(c.seed, i), id);
}

void ensure_dir(const std::string& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create '" + dir + "': " + ec.message());
}

int cmd_simulate(const Common& c, const std::string& scene_arg, int scans)
{
  const Config cfg = load_common_config(c);
  const Scene scene = resolve_scene(scene_arg);
  const auto poses = load_poses(c);
  ensure_dir(c.out_dir);
  for (int i = 0; i < scans; ++i) {
    const auto sim = simulate_indexed(scene, cfg, c, poses, static_cast<std::size_t>(i));
    const fs::path out(c.out_dir);
    write_drpc((out / numbered("scan", i, ".drpc")).string(), sim.scan, &sim.truth);
    write_file((out / numbered("truth", i, ".panes")).string(),
               [&](std::ostream& o) { write_truth_panes(o, sim.truth.panes); });
  }
  std::cout << "simulated " << scans << " scan(s) of '" << scene.name << "' into " << c.out_dir << "\n";
  return 0;
}

int cmd_detect(const Common& c, const std::vector<std::string>& inputs)
{
  const Config cfg = load_common_config(c);
  ensure_dir(c.out_dir);
  for (const auto& path : inputs) {
    const auto file = read_drpc(path);
    const auto det = detect_panes(file.scan, cfg);
    const auto out = (fs::path(c.out_dir) / numbered("panes", file.scan.scan_id, ".txt")).string();
    write_file(out, [&](std::ostream& o) { write_panes(o, det.panes); });
    std::cout << path << ": " << det.panes.size() << " pane(s), " << det.peaks.size() << " verified peak(s), "
              << det.evidence.glass_candidates.size() << " glass candidate(s)\n";
  }
  return 0;
}

void write_scan_outputs(const Common& c, const ScanInput& in, const ScanResult& r)
{
  const fs::path out(c.out_dir);
  const Annotation pred = annotate(r.labeled, in.scan);
  write_drpc((out / numbered("labeled", r.scan_id, ".drpc")).string(), in.scan, &pred);
  write_file((out / numbered("panes", r.scan_id, ".txt")).string(),
             [&](std::ostream& o) { write_panes(o, r.panes); });
}

int run_files(const Common& c, const std::vector<std::string>& inputs, const std::string& registry_in,
              bool with_report)
{
  const Config cfg = load_common_config(c);
  const auto poses = load_poses(c);
  ensure_dir(c.out_dir);
  PaneRegistry registry = registry_in.empty() ? PaneRegistry(cfg.registry) : PaneRegistry::read(registry_in, cfg.registry);
  std::ofstream timing((fs::path(c.out_dir) / "timing.log").string());
  auto load = [&](std::size_t i) {
    auto f = read_drpc(inputs[i]);
    ScanInput in{std::move(f.scan), std::move(f.annotation)};
    // Truth panes travel next to the scan as truth_NNNNN.panes.
    if (in.truth) {
      const auto tp = fs::path(inputs[i]).parent_path() / numbered("truth", in.scan.scan_id, ".panes");
      if (fs::exists(tp)) in.truth->panes = read_file<std::vector<TruthPane>>(tp.string(), [](std::istream& s) {
        return read_truth_panes(s);
      });
    }
    return in;
  };
  auto sink = [&](const ScanInput& in, const ScanResult& r) {
    write_scan_outputs(c, in, r);
    timing << "scan " << r.scan_id << " detect_ms " << r.detect_ms << " classify_ms " << r.classify_ms << "\n";
  };
  const auto sum =
      run_pipeline(inputs.size(), load, cfg, poses ? &*poses : nullptr, registry, sink, c.threads);
  registry.write((fs::path(c.out_dir) / "registry.txt").string());
  if (with_report) {
    const std::string report = format_report(sum, "files");
    write_file((fs::path(c.out_dir) / "report.txt").string(), [&](std::ostream& o) { o << report; });
    std::cout << report;
  } else {
    std::cout << "classified " << sum.scans << " scan(s), " << sum.panes_detected << " pane(s) detected\n";
  }
  return 0;
}

int run_scene(const Common& c, const std::string& scene_arg, int scans)
{
  const Config cfg = load_common_config(c);
  const Scene scene = resolve_scene(scene_arg);
  const auto poses = load_poses(c);
  ensure_dir(c.out_dir);
  PaneRegistry registry(cfg.registry);
  std::ofstream timing((fs::path(c.out_dir) / "timing.log").string());
  auto load = [&](std::size_t i) {
    auto sim = simulate_indexed(scene, cfg, c, poses, i);
    return ScanInput{std::move(sim.scan), std::move(sim.truth)};
  };
  auto sink = [&](const ScanInput& in, const ScanResult& r) {
    write_scan_outputs(c, in, r);
    timing << "scan " << r.scan_id << " detect_ms " << r.detect_ms << " classify_ms " << r.classify_ms << "\n";
  };
  const auto sum =
      run_pipeline(static_cast<std::size_t>(scans), load, cfg, poses ? &*poses : nullptr, registry, sink, c.threads);
  registry.write((fs::path(c.out_dir) / "registry.txt").string());
  const std::string report = format_report(sum, scene.name);
  write_file((fs::path(c.out_dir) / "report.txt").string(), [&](std::ostream& o) { o << report; });
  std::cout << report;
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& truth_files, const std::vector<std::string>& label_files,
             const std::vector<std::string>& pane_files, const std::vector<std::string>& truth_pane_files)
{
  const Config cfg = load_common_config(c);
  if (truth_files.size() != label_files.size()) throw InputError("--truth and --labels need the same number of files");
  if (!pane_files.empty() && pane_files.size() != truth_pane_files.size())
    throw InputError("--panes and --truth-panes need the same number of files");
  RunSummary sum;
  for (std::size_t i = 0; i < truth_files.size(); ++i) {
    const auto truth = read_drpc(truth_files[i]);
    const auto labels = read_drpc(label_files[i]);
    if (!truth.annotation) throw InputError(truth_files[i] + " carries no labels");
    if (!labels.annotation) throw InputError(label_files[i] + " carries no labels");
    ++sum.scans;
    sum.has_truth = true;
    sum.classes += evaluate_classification(*labels.annotation, *truth.annotation, truth.scan, 0.15,
                                           cfg.classify.eps_range_m);
    const auto& pred = *labels.annotation;
    const auto& g = labels.scan.geometry();
    for (int r = 0; r < g.ring_count; ++r)
      for (int col = 0; col < g.column_count; ++col) {
        const std::size_t k = g.index(r, col);
        const auto& s = labels.scan.strongest.at(r, col);
        const auto& l = labels.scan.last.at(r, col);
        if (pred.strongest[k]) ++sum.label_counts[static_cast<std::size_t>(pred.strongest[k]->label)];
        if (pred.last[k] && !(s && l && std::abs(s->range() - l->range()) <= cfg.classify.eps_range_m))
          ++sum.label_counts[static_cast<std::size_t>(pred.last[k]->label)];
      }
  }
  for (std::size_t i = 0; i < pane_files.size(); ++i) {
    const auto panes = read_file<std::vector<GlassPane>>(pane_files[i], [](std::istream& s) { return read_panes(s); });
    const auto tps =
        read_file<std::vector<TruthPane>>(truth_pane_files[i], [](std::istream& s) { return read_truth_panes(s); });
    sum.has_truth_panes = true;
    sum.panes_detected += static_cast<long>(panes.size());
    sum.planes += evaluate_planes(panes, tps, cfg.sim.grid(), static_cast<std::size_t>(cfg.ransac.min_inliers));
  }
  const std::string report = format_report(sum, "eval");
  ensure_dir(c.out_dir);
  write_file((fs::path(c.out_dir) / "report.txt").string(), [&](std::ostream& o) { o << report; });
  std::cout << report;
  return 0;
}

/// Labeled cloud to ASCII PLY: I, G and O as measured, R at the mirrored
/// position, U dropped.
int cmd_export(const Common& c, const std::string& input, const std::string& output)
{
  (void)c;
  const auto file = read_drpc(input);
  if (!file.annotation) throw InputError(input + " carries no labels");
  const auto& a = *file.annotation;
  const auto& g = file.scan.geometry();
  struct P {
    Vec3 x;
    double i;
    char l;
  };
  std::vector<P> pts;
  for (int r = 0; r < g.ring_count; ++r)
    for (int col = 0; col < g.column_count; ++col) {
      const auto& s = file.scan.strongest.at(r, col);
      const auto& l = file.scan.last.at(r, col);
      const bool alias = s && l && std::abs(s->range() - l->range()) <= 0.01;
      for (const auto ch : {ReturnChannel::strongest, ReturnChannel::last}) {
        if (ch == ReturnChannel::last && alias) continue;
        const auto& ret = ch == ReturnChannel::strongest ? s : l;
        const auto& t = a.at(ch, r, col);
        if (!ret || !t || t->label == Label::U) continue;
        pts.push_back({t->position, ret->intensity, label_char(t->label)});
      }
    }
  write_file(output, [&](std::ostream& o) {
    o << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\n"
         "property uchar label\nend_header\n";
    char buf[128];
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.3f %d\n", p.x.x(), p.x.y(), p.x.z(), p.i,
                    static_cast<int>(label_from_char(p.l).value()));
      o << buf;
    }
  });
  std::cout << "exported " << pts.size() << " point(s) to " << output << " (label: 0=I 1=G 2=R 3=O)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Glass detection and reflection removal for dual-return lidar scans"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--config", c.config_path, "TOML config file");
  app.add_option("--seed", c.seed, "Simulation seed");
  app.add_option("--poses", c.poses_path, "Pose file: scan_id tx ty tz qx qy qz qw per line");
  app.add_option("--out", c.out_dir, "Output directory");
  app.add_option("--threads", c.threads, "Scans processed concurrently")->check(CLI::PositiveNumber);

  std::string scene;
  int scans = 1;
  std::vector<std::string> inputs, truth_files, label_files, pane_files, truth_pane_files;
  std::string registry_in, input, output;

  auto* sim = app.add_subcommand("simulate", "Simulate dual-return scans of a scene with truth labels");
  sim->add_option("--scene", scene, "Scene file or bundled scene name")->required();
  sim->add_option("--scans", scans, "Number of scans")->check(CLI::PositiveNumber);

  auto* det = app.add_subcommand("detect", "Detect glass panes in DRPC scans");
  det->add_option("inputs", inputs, "DRPC files")->required();

  auto* cls = app.add_subcommand("classify", "Detect and classify DRPC scans into labeled DRPC files");
  cls->add_option("inputs", inputs, "DRPC files")->required();
  cls->add_option("--registry", registry_in, "Registry file to start from");

  auto* ev = app.add_subcommand("eval", "Score labeled scans against truth");
  ev->add_option("--truth", truth_files, "Truth DRPC files")->required();
  ev->add_option("--labels", label_files, "Labeled DRPC files, same order")->required();
  ev->add_option("--panes", pane_files, "Detected pane files");
  ev->add_option("--truth-panes", truth_pane_files, "Truth pane files, same order");

  auto* run = app.add_subcommand("run", "End to end: simulate a scene or read scans, detect, classify, report");
  auto* run_scene_opt = run->add_option("--scene", scene, "Scene file or bundled scene name");
  run->add_option("--scans", scans, "Number of simulated scans")->check(CLI::PositiveNumber);
  run->add_option("inputs", inputs, "DRPC files")->excludes(run_scene_opt);

  auto* exp = app.add_subcommand("export", "Write a labeled DRPC file as ASCII PLY");
  exp->add_option("input", input, "Labeled DRPC file")->required();
  exp->add_option("output", output, "PLY file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(c, scene, scans);
    if (*det) return cmd_detect(c, inputs);
    if (*cls) return run_files(c, inputs, registry_in, false);
    if (*ev) return cmd_eval(c, truth_files, label_files, pane_files, truth_pane_files);
    if (*run) {
      if (!scene.empty()) return run_scene(c, scene, scans);
      if (inputs.empty()) throw InputError("run needs --scene or DRPC files");
      return run_files(c, inputs, "", true);
    }
    if (*exp) return cmd_export(c, input, output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
