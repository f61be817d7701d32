#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbv/config.hpp"
#include "nbv/error.hpp"
#include "nbv/harness.hpp"
#include "support.hpp"

namespace nbv {
namespace {

namespace fs = std::filesystem;

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in, "test.conf");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nbv_harness_" + name);
  fs::remove_all(p);
  return p;
}

// Small enough to train and evaluate in seconds.
KeyValueConfig tiny(const std::string& kind, const fs::path& out) {
  KeyValueConfig c = parse(
      "env.gt_points = 1500\n"
      "env.depth_size = 48\n"
      "env.voxels_per_diagonal = 64\n"
      "env.max_steps = 8\n"
      "train.architecture = mlp:16\n"
      "train.total_steps = 40\n"
      "train.warmup_steps = 16\n"
      "train.batch_size = 8\n"
      "train.validate_every = 2\n"
      "train.checkpoint_replay = false\n");
  c.set("experiment.kind", kind);
  c.set("experiment.out", out.string());
  return c;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return files;
}

TEST(KeyValueConfig, ParsesValuesCommentsAndLists) {
  const KeyValueConfig c = parse(
      "# header\n"
      "\n"
      "a.x = 1.5   # trailing\n"
      "a.n=7\n"
      "a.flag = yes\n"
      "a.list = 1, 2 ,3\n"
      "a.s = hello world\n");
  EXPECT_DOUBLE_EQ(c.get_double("a.x", 0), 1.5);
  EXPECT_EQ(c.get_int("a.n", 0), 7);
  EXPECT_TRUE(c.get_bool("a.flag", false));
  EXPECT_EQ(c.get_list("a.list", {}), (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_EQ(c.get_string("a.s", ""), "hello world");
  EXPECT_EQ(c.get_double("missing", 4.0), 4.0);
  EXPECT_EQ(c.canonical(), "a.flag = yes\na.list = 1, 2 ,3\na.n = 7\na.s = hello world\na.x = 1.5\n");
}

TEST(KeyValueConfig, ErrorsNameTheLine) {
  try {
    parse("a = 1\nb\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.conf:2"), std::string::npos) << e.what();
  }
  try {
    parse("a = 1\n\na = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.conf:3"), std::string::npos) << e.what();
  }
  const KeyValueConfig c = parse("x = 1\ny = abc\nz = 2.5\nw = maybe\n");
  try {
    c.get_double("y", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.conf:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(c.get_int("z", 0), ConfigError);
  EXPECT_THROW(c.get_bool("w", false), ConfigError);
  EXPECT_THROW(c.check_known({"x", "y", "z"}), ConfigError);
  EXPECT_THROW(parse(" = 3\n"), ConfigError);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(SetupLabel, LabelRoundTrip) {
  EXPECT_EQ((nbv::Setup{2, 45}).label(), "2x45");
  EXPECT_EQ((nbv::Setup{3, 22.5}).label(), "3x22.5");
  EXPECT_EQ(nbv::Setup::parse("3x22.5"), (nbv::Setup{3, 22.5}));
  EXPECT_THROW(nbv::Setup::parse("3-45"), ConfigError);
  EXPECT_THROW(nbv::Setup::parse("0x45"), ConfigError);
  EXPECT_THROW(nbv::Setup::parse("2x45deg"), ConfigError);
}

TEST(ExperimentSpec, KindDefaults) {
  const ExperimentSpec single = ExperimentSpec::from_config(parse("experiment.kind = single_house\n"));
  EXPECT_EQ(single.env.reward.terminal_coverage, 96.0);
  EXPECT_EQ(single.house, testing::reference_house());
  EXPECT_EQ(single.setups, std::vector<nbv::Setup>{nbv::Setup{}});
  const ExperimentSpec multi = ExperimentSpec::from_config(parse("experiment.kind = multi_house\n"));
  EXPECT_EQ(multi.env.reward.terminal_coverage, 92.0);
  EXPECT_EQ(multi.house_count, 22);
  EXPECT_EQ(multi.split_mode, SplitMode::kRandom);
}

TEST(ExperimentSpec, CanonicalConfigRoundTrips) {
  const ExperimentSpec a = ExperimentSpec::from_config(parse(
      "experiment.kind = single_house\n"
      "experiment.seeds = 0, 3, 4\n"
      "experiment.setups = 2x45, 3x22.5\n"
      "house.seed = 17\n"
      "env.terminal_coverage = 95\n"
      "train.lr = 3e-4\n"));
  EXPECT_EQ(a.seeds, (std::vector<std::uint64_t>{0, 3, 4}));
  EXPECT_EQ(a.setups.size(), 2u);
  EXPECT_EQ(a.house, sample_spec(17));
  const ExperimentSpec b = ExperimentSpec::from_config(a.to_config());
  EXPECT_EQ(a.to_config().canonical(), b.to_config().canonical());
  EXPECT_EQ(a.config_hash(), b.config_hash());
  ExperimentSpec c = a;
  c.train.lr = 1e-3;
  EXPECT_NE(a.config_hash(), c.config_hash());
}

TEST(ExperimentSpec, ShippedConfigsAreValid) {
  const fs::path root = NBV_SOURCE_DIR;
  int n = 0;
  for (const auto& e : fs::directory_iterator(root / "configs")) {
    if (e.path().extension() != ".conf") continue;
    ++n;
    const KeyValueConfig c = KeyValueConfig::load(e.path());
    ASSERT_NO_THROW(c.check_known(known_config_keys())) << e.path();
    const ExperimentSpec spec = ExperimentSpec::from_config(c);
    EXPECT_NO_THROW(spec.validate()) << e.path();
    if (spec.kind == ExperimentKind::kNonHouse) {
      const Mesh m = load_mesh(root / spec.mesh);
      EXPECT_TRUE(watertight_check(m).is_watertight) << spec.mesh;
      EXPECT_GT(signed_volume(m), 0.0) << spec.mesh;
    }
  }
  EXPECT_GE(n, 4);
}

TEST(ExperimentSpec, Errors) {
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.kind = bridge\n")), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("env.terminal_coverag = 90\n")), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.kind = non_house\n")), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.kind = non_house\ntarget.mesh = /no/such.mesh\n")),
               ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.policy = /no/such.bin\n")), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.kind = multi_house\nexperiment.setups = 2x45,3x45\n")),
               ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("house.roof_style = dome\n")), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_config(parse("experiment.planners = circ1, spiral\n")), ConfigError);
}

TEST(NormalizeTargetMesh, ScalesAndGrounds) {
  const Mesh m = normalize_target_mesh(testing::box_mesh(Vec3(3, 4, 5), Vec3(4, 6, 7)), 30.0);
  const Aabb box = bounding_box(m);
  EXPECT_NEAR(box.diagonal(), 30.0, 1e-9);
  EXPECT_NEAR(box.min.z(), 0.0, 1e-12);
  EXPECT_NEAR(box.center().x(), 0.0, 1e-12);
  EXPECT_NEAR(box.center().y(), 0.0, 1e-12);
  EXPECT_NEAR(signed_volume(m), signed_volume(testing::box_mesh(Vec3(3, 4, 5), Vec3(4, 6, 7))) * std::pow(10.0, 3),
              1e-6);
}

TEST(EpisodeScore, SolvedBeatsUnsolvedAndFewerStepsWin) {
  EpisodeLog solved7, solved9, open;
  solved7.solved = true;
  solved7.steps = 7;
  solved9.solved = true;
  solved9.steps = 9;
  open.steps = 50;
  open.coverage = 99.0;
  EXPECT_GT(episode_score(solved7, 50), episode_score(solved9, 50));
  EXPECT_GT(episode_score(solved9, 50), episode_score(open, 50));
  EpisodeLog lower = open;
  lower.coverage = 40.0;
  EXPECT_GT(episode_score(open, 50), episode_score(lower, 50));
}

TEST(RunExperiment, SingleHouseWritesTraceableDeterministicOutputs) {
  const fs::path a = scratch("single_a"), b = scratch("single_b");
  const ExperimentResult ra = run_experiment(ExperimentSpec::from_config(tiny("single_house", a)));
  for (const char* f : {"config.txt", "report_index.json", "report.json", "report.txt", "manifest.json",
                        "house.mesh", "logs/2x45/circ1.jsonl", "logs/2x45/policy_seed0.jsonl",
                        "logs/2x45/budget/circ2_seed0.jsonl", "clouds/2x45/gt.ply", "clouds/2x45/circ3.ply",
                        "train/2x45/seed0/curve.csv", "train/2x45/seed0/agent.bin"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const auto& row = ra.report.at("rows").at(0);
  EXPECT_EQ(row.at("setup"), "2x45");
  for (const char* p : {"circ1", "circ2", "circ3", "policy"}) EXPECT_TRUE(row.at("steps").contains(p)) << p;
  EXPECT_LE(row.at("steps").at("policy").get<double>(), 8.0);

  // The report is a function of the persisted logs and index.
  const std::string json_before = slurp(a / "report.json"), text_before = slurp(a / "report.txt");
  build_report(a);
  EXPECT_EQ(slurp(a / "report.json"), json_before);
  EXPECT_EQ(slurp(a / "report.txt"), text_before);

  // A rerun elsewhere only differs in the output path recorded in config.txt.
  run_experiment(ExperimentSpec::from_config(tiny("single_house", b)));
  auto ta = tree(a), tb = tree(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, bytes] : ta) {
    if (name == "config.txt" || name == "manifest.json") continue;
    EXPECT_TRUE(bytes == tb[name]) << name;
  }
  EXPECT_NE(ta["config.txt"], tb["config.txt"]);
}

TEST(RunExperiment, ManifestListsEveryArtifact) {
  const fs::path a = scratch("manifest");
  KeyValueConfig c = tiny("single_house", a);
  c.set("experiment.planners", "circ2");
  const ExperimentSpec spec = ExperimentSpec::from_config(c);
  run_experiment(spec);
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(m.at("config_hash"), spec.config_hash());
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) n += e.is_regular_file() ? 1 : 0;
  EXPECT_EQ(m.at("artifacts").size(), n - 1);
  for (const auto& art : m.at("artifacts")) {
    EXPECT_EQ(art.at("fnv1a"), hex64(fnv1a(slurp(a / art.at("path").get<std::string>()))));
    EXPECT_EQ(art.at("config_hash"), spec.config_hash());
  }
}

TEST(RunExperiment, MultiHouseSolvedRatioTable) {
  const fs::path a = scratch("multi");
  KeyValueConfig c = tiny("multi_house", a);
  c.set("houses.count", "4");
  c.set("houses.test_fraction", "0.25");
  c.set("experiment.export_clouds", "false");
  const ExperimentResult r = run_experiment(ExperimentSpec::from_config(c));
  const auto& rows = r.report.at("rows");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].at("set"), "train");
  EXPECT_EQ(rows[0].at("houses"), 3);
  EXPECT_EQ(rows[1].at("set"), "test");
  EXPECT_EQ(rows[1].at("houses"), 1);
  for (const auto& row : rows) {
    const double ratio = row.at("policy_solved_ratio");
    EXPECT_GE(ratio, 0.0);
    EXPECT_LE(ratio, 1.0);
  }
  EXPECT_TRUE(fs::exists(a / "houses" / "test_00.mesh"));
  const std::string before = slurp(a / "report.txt");
  build_report(a);
  EXPECT_EQ(slurp(a / "report.txt"), before);
}

TEST(RunExperiment, NonHouseCalibratesRangeAndWritesCoverageCurve) {
  const fs::path a = scratch("nonhouse");
  fs::create_directories(a.parent_path());
  const fs::path mesh = fs::temp_directory_path() / "nbv_harness_block.mesh";
  save_mesh(testing::box_mesh(Vec3(0, 0, 0), Vec3(2, 1, 3)), mesh);
  KeyValueConfig c = tiny("non_house", a);
  c.set("target.mesh", mesh.string());
  c.set("target.diagonal", "80");
  c.set("target.random_runs", "2");
  const ExperimentResult r = run_experiment(ExperimentSpec::from_config(c));
  ASSERT_TRUE(r.report.contains("calibration"));
  const std::string csv = slurp(a / "coverage_per_step.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,policy,circ1,circ2,circ3,random");
  // Each row: step index plus one value per column; step 0 is the first view.
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 9);  // steps 0..8

  // The chosen range reaches the ceiling on the probe sweep.
  std::string cal = slurp(a / "calibration.csv");
  EXPECT_NE(cal.find("max_range,coverage"), std::string::npos);
  const double range = std::stod(r.report.at("calibration").at("max_range").get<std::string>());
  EnvConfig env = ExperimentSpec::from_config(c).env;
  env.limits = PoseLimits::discrete(2, 22.5);
  const Mesh target = normalize_target_mesh(load_mesh(mesh), 80);
  std::vector<std::pair<double, double>> probes;
  EXPECT_NEAR(calibrate_max_range(target, env, 90.0, &probes), range, 1e-9);
  double at_range = -1.0;
  for (const auto& [rg, cov] : probes) {
    if (rg == range) at_range = cov;
  }
  EXPECT_GE(at_range, 90.0);
}

TEST(RunExperiment, FailureNamesStageAndKeepsOutputs) {
  const fs::path a = scratch("failure");
  const fs::path mesh = fs::temp_directory_path() / "nbv_harness_huge.mesh";
  save_mesh(testing::unit_cube(), mesh);
  KeyValueConfig c = tiny("non_house", a);
  c.set("target.mesh", mesh.string());
  c.set("target.diagonal", "400");  // reaches past the closest orbit
  try {
    run_experiment(ExperimentSpec::from_config(c));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'range calibration'"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(fs::exists(a / "config.txt"));
  EXPECT_TRUE(fs::exists(a / "target.mesh"));
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
}

}  // namespace
}  // namespace nbv
