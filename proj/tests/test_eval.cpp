#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace dgtest;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args)
{
  const std::string cmd = std::string(DUALGLASS_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path scratch(const std::string& name)
{
  const auto p = fs::temp_directory_path() / ("dualglass_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_same(const ClassStats& a, const ClassStats& b)
{
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.within_01, b.within_01);
  EXPECT_EQ(a.within_tol, b.within_tol);
  EXPECT_NEAR(a.sum, b.sum, 1e-9);
  EXPECT_NEAR(a.sum_sq, b.sum_sq, 1e-9);
}

Config config_of(const std::string& text) { return config_from_document(toml::parse_string(text)); }

}  // namespace

TEST(EvalClassification, TruthAgainstItselfIsPerfect)
{
  const auto sim = simulate(bundled_scene("classroom"), 51);
  const auto m = evaluate_classification(sim.truth, sim.truth, sim.scan);
  for (const Label l : kTruthClasses) {
    EXPECT_GT(m[l].total, 0);
    EXPECT_DOUBLE_EQ(m[l].frac_tol(), 1.0);
    EXPECT_DOUBLE_EQ(m[l].mean(), 0.0);
  }
}

TEST(EvalClassification, WrongLabelsScoreZero)
{
  const auto sim = simulate(bundled_scene("noglass"), 52);
  auto pred = sim.truth;
  for (auto& t : pred.strongest)
    if (t) t->label = Label::O;
  for (auto& t : pred.last)
    if (t) t->label = Label::O;
  const auto m = evaluate_classification(pred, sim.truth, sim.scan);
  EXPECT_EQ(m[Label::I].total, 72032);
  EXPECT_EQ(m[Label::I].labeled, 0);
  EXPECT_EQ(m[Label::O].total, 0);
}

TEST(EvalClassification, InfiniteToleranceIsLabelAccuracy)
{
  const auto sim = simulate(bundled_scene("classroom"), 53);
  const auto res = process_scan(sim.scan, Config{});
  const auto m = evaluate_classification(res.labeled, sim.scan, sim.truth, 1e300, 0.01);
  for (const Label l : kTruthClasses) EXPECT_DOUBLE_EQ(m[l].frac_tol(), m[l].label_accuracy());
}

TEST(EvalClassification, AggregationIsAssociative)
{
  const Scene scene = bundled_scene("classroom");
  std::vector<ClassMetrics> parts;
  for (int i = 0; i < 3; ++i) {
    const auto sim = simulate(scene, 60 + static_cast<std::uint64_t>(i), i);
    parts.push_back(evaluate_classification(process_scan(sim.scan, Config{}).labeled, sim.scan, sim.truth));
  }
  ClassMetrics left = parts[0];
  left += parts[1];
  left += parts[2];
  ClassMetrics tail = parts[1];
  tail += parts[2];
  ClassMetrics right = parts[0];
  right += tail;
  for (const Label l : kTruthClasses) expect_same(left[l], right[l]);
}

TEST(EvalClassification, ScanIdMismatchIsRejected)
{
  const auto sim = simulate(bundled_scene("noglass"), 54, 7);
  auto other = sim.truth;
  other.scan_id = 8;
  EXPECT_THROW(evaluate_classification(other, sim.truth, sim.scan), InputError);
}

TEST(EvalPlanes, ExactAndRotatedPlanes)
{
  const auto sim = simulate(bundled_scene("classroom"), 55);
  const auto& tp = sim.truth.panes[0];
  const auto& g = sim.scan.geometry();
  GlassPane exact = glass_from_truth(tp, g);
  auto m = evaluate_planes(std::span(&exact, 1), sim.truth.panes, g);
  EXPECT_EQ(m.samples, 1);
  EXPECT_EQ(m.detected, 1);
  EXPECT_LE(m.mean_rms(), 1e-9);
  EXPECT_LE(m.mean_angle_deg(), 1e-6);

  // Tilt by 3 degrees about a vertical axis through the pane centre.
  Vec3 c = Vec3::Zero();
  for (const auto& x : tp.corners) c += x / 4.0;
  const Vec3 n = Eigen::AngleAxisd(deg2rad(3.0), Vec3::UnitZ()) * tp.plane.normal();
  GlassPane tilted = exact;
  tilted.plane = Plane::through(c, n);
  m = evaluate_planes(std::span(&tilted, 1), sim.truth.panes, g);
  EXPECT_NEAR(m.mean_angle_deg(), 3.0, 1e-9);
  EXPECT_GT(m.mean_rms(), 0.01);

  // A pane that covers none of the truth cells is a miss.
  GlassPane away = exact;
  away.left_az = exact.left_az + 3.0;
  away.right_az = exact.right_az + 3.0;
  m = evaluate_planes(std::span(&away, 1), sim.truth.panes, g);
  EXPECT_EQ(m.samples, 1);
  EXPECT_EQ(m.detected, 0);
}

TEST(Config, DefaultFileMatchesBuiltInDefaults)
{
  const Config file = load_config(std::string(DUALGLASS_SCENE_DIR) + "/../config/default.toml");
  EXPECT_EQ(dump_config(file), dump_config(Config{}));
}

TEST(Config, OverridesApply)
{
  const auto c = config_of("[classify]\nrange_margin_m = 0.2\n[geometry]\nseed = 9\n");
  EXPECT_DOUBLE_EQ(c.classify.range_margin_m, 0.2);
  EXPECT_EQ(c.ransac.seed, 9u);
}

TEST(Config, InvalidDocumentsAreConfigErrors)
{
  EXPECT_THROW(config_of("[detect]\nnope = 1\n"), ConfigError);
  EXPECT_THROW(config_of("[nope]\nx = 1\n"), ConfigError);
  EXPECT_THROW(config_of("[detect]\nmin_run_len = 2.5\n"), ConfigError);
  EXPECT_THROW(config_of("[detect]\nmin_run_len = \"five\"\n"), ConfigError);
  EXPECT_THROW(config_of("[geometry]\nransac_inlier_dist_m = -1\n"), ConfigError);
  EXPECT_THROW(config_of("x = 1\n"), ConfigError);
}

TEST(Cli, ExitCodes)
{
  const auto dir = scratch("exit");
  std::ofstream(dir / "bad.toml") << "[detect]\nfoo = 1\n";
  EXPECT_EQ(run_cli("--config " + (dir / "bad.toml").string() + " run --scene noglass"), 3);
  EXPECT_EQ(run_cli("--out " + dir.string() + " detect " + (dir / "missing.drpc").string()), 2);
  EXPECT_EQ(run_cli("run --scene no_such_scene"), 2);
  EXPECT_EQ(run_cli("--bogus"), 2);
  std::ofstream(dir / "junk.drpc") << "DRPC 1\nrings 32\n";
  EXPECT_EQ(run_cli("--out " + dir.string() + " detect " + (dir / "junk.drpc").string()), 2);
}

TEST(Cli, NoGlassRunDetectsNothing)
{
  const auto dir = scratch("noglass");
  ASSERT_EQ(run_cli("--out " + dir.string() + " --seed 3 run --scene noglass --scans 2"), 0);
  std::ifstream reg(dir / "registry.txt");
  ASSERT_TRUE(reg);
  std::stringstream ss;
  ss << reg.rdbuf();
  EXPECT_TRUE(ss.str().empty());
  std::ifstream rep(dir / "report.txt");
  std::stringstream rs;
  rs << rep.rdbuf();
  EXPECT_NE(rs.str().find("panes_detected=0"), std::string::npos);
  EXPECT_NE(rs.str().find("labels.O=0"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, SimulateClassifyEvalRoundTrip)
{
  const auto dir = scratch("pipeline");
  const std::string out = " --out " + dir.string();
  ASSERT_EQ(run_cli(out + " --seed 5 simulate --scene classroom --scans 1"), 0);
  std::vector<fs::path> drpc;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".drpc") drpc.push_back(e.path());
  ASSERT_EQ(drpc.size(), 1u);
  const auto lab = dir / "labeled";
  ASSERT_EQ(run_cli("--out " + lab.string() + " classify " + drpc[0].string()), 0);
  std::vector<fs::path> labeled;
  for (const auto& e : fs::directory_iterator(lab))
    if (e.path().extension() == ".drpc") labeled.push_back(e.path());
  ASSERT_EQ(labeled.size(), 1u);
  const auto ev = dir / "eval";
  ASSERT_EQ(run_cli("--out " + ev.string() + " eval --truth " + drpc[0].string() + " --labels " +
                    labeled[0].string()),
            0);
  std::ifstream rep(ev / "report.txt");
  std::stringstream rs;
  rs << rep.rdbuf();
  EXPECT_NE(rs.str().find("class.G.points="), std::string::npos);
  ASSERT_EQ(run_cli("export " + labeled[0].string() + " " + (dir / "out.ply").string()), 0);
  std::ifstream ply(dir / "out.ply");
  std::string magic;
  ply >> magic;
  EXPECT_EQ(magic, "ply");
  fs::remove_all(dir);
}
