// nbvscan: command-line entry for house generation, baselines, training,
// evaluation, experiments, coverage and view export.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nbv/config.hpp"
#include "nbv/coverage.hpp"
#include "nbv/error.hpp"
#include "nbv/harness.hpp"
#include "nbv/housegen.hpp"
#include "nbv/learn/trainer.hpp"
#include "nbv/planners.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nbv;

namespace {

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  KeyValueConfig c = KeyValueConfig::load(path);
  c.check_known(known_config_keys());
  return c;
}

std::string config_hash(const KeyValueConfig& c) { return hex64(fnv1a(c.canonical())); }

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Manifest for commands whose --out names a single file: <out>.manifest.json.
void write_file_manifest(const fs::path& out, const std::vector<fs::path>& files, const std::string& hash) {
  json artifacts = json::array();
  for (const fs::path& f : files) {
    const std::string b = file_bytes(f);
    artifacts.push_back({{"path", f.filename().generic_string()},
                         {"bytes", b.size()},
                         {"fnv1a", hex64(fnv1a(b))},
                         {"config_hash", hash}});
  }
  std::ofstream m(out.string() + ".manifest.json");
  m << json{{"config_hash", hash}, {"artifacts", artifacts}}.dump(2) << "\n";
}

std::vector<fs::path> mesh_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".mesh") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .mesh files in " + dir.string());
  return files;
}

std::vector<std::shared_ptr<const ScanTarget>> load_targets(const fs::path& dir, const EnvConfig& cfg) {
  std::vector<std::shared_ptr<const ScanTarget>> targets;
  for (const fs::path& f : mesh_files(dir)) targets.push_back(make_target(load_mesh(f), cfg, f.stem().string()));
  return targets;
}

int cmd_housegen(std::uint64_t seed, int count, const fs::path& out) {
  fs::create_directories(out);
  std::ofstream list(out / "houses.txt");
  list << "# seed geometry_key palette\n";
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const HouseSpec spec = sample_spec(s);
    save_mesh(generate_house(spec), out / ("house_" + std::to_string(s) + ".mesh"));
    list << s << " " << geometry_key(spec) << " " << spec.albedo_palette << "\n";
  }
  list.close();
  KeyValueConfig c;
  c.set("housegen.seed", std::to_string(seed));
  c.set("housegen.count", std::to_string(count));
  write_manifest(out, config_hash(c));
  return 0;
}

int cmd_baseline(const std::string& kind, const fs::path& house, const std::string& config, std::uint64_t seed,
                 const fs::path& out) {
  const KeyValueConfig c = load_config(config);
  const EnvConfig cfg = env_config_from(c);
  ScanEnv env(cfg, {make_target(load_mesh(house), cfg, house.stem().string())});
  env.reset(0);
  const PlannerKind k = parse_planner_kind(kind);
  const EpisodeLog log = k == PlannerKind::kRandom ? run_random(env, seed)
                                                   : run_planner(env, plan_actions(k, cfg.limits, cfg.start_pose()));
  std::ofstream o(out);
  if (!o) throw Error("cannot write " + out.string());
  log.write_jsonl(o);
  o.close();
  write_file_manifest(out, {out}, config_hash(c));
  std::cout << json{{"planner", kind}, {"steps", log.steps}, {"distance", log.distance},
                    {"coverage", log.coverage}, {"solved", log.solved}}.dump()
            << "\n";
  return 0;
}

int cmd_train(const std::string& config, const fs::path& houses, const fs::path& out, bool resume) {
  const KeyValueConfig c = load_config(config);
  const EnvConfig cfg = env_config_from(c);
  learn::TrainConfig tc = train_config_from(c);
  tc.checkpoint_path = out;
  const auto targets = load_targets(houses, cfg);
  ScanEnv env(cfg, targets);
  ScanEnv val_env(cfg, targets);

  std::unique_ptr<learn::Trainer> trainer;
  if (resume) {
    std::ifstream in(out, std::ios::binary);
    if (!in) throw Error("cannot resume: no checkpoint at " + out.string());
    trainer = std::make_unique<learn::Trainer>(env, in);
    trainer->set_total_steps(tc.total_steps);
    trainer->set_checkpoint_path(out);
  } else {
    trainer = std::make_unique<learn::Trainer>(env, tc);
  }
  trainer->set_validator([&](const learn::Agent& a) {
    double s = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) s += episode_score(learn::run_policy(a, val_env, t), cfg.max_steps);
    return s / static_cast<double>(targets.size());
  });
  trainer->train();
  trainer->save_checkpoint(out);
  const fs::path curve = out.string() + ".curve.csv";
  std::ofstream cs(curve);
  learn::write_curve_csv(cs, trainer->curve());
  cs.close();
  const fs::path agent = out.string() + ".agent";
  learn::save_agent(trainer->best_agent(), agent);
  write_file_manifest(out, {out, curve, agent}, config_hash(c));
  std::cout << json{{"env_steps", trainer->total_steps()}, {"episodes", trainer->episodes()},
                    {"stopped_early", trainer->stopped_early()}}.dump()
            << "\n";
  return 0;
}

int cmd_eval(const fs::path& ckpt, const std::string& config, const fs::path& houses, const fs::path& report) {
  const KeyValueConfig c = load_config(config);
  const EnvConfig cfg = env_config_from(c);
  const auto targets = load_targets(houses, cfg);
  ScanEnv env(cfg, targets);
  const learn::Agent agent = learn::load_agent(ckpt);
  std::vector<std::size_t> ids(targets.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const learn::EvalMetrics m = learn::evaluate(agent, env, ids);
  json episodes = json::array();
  for (std::size_t i = 0; i < m.logs.size(); ++i) {
    const EpisodeLog& l = m.logs[i];
    episodes.push_back({{"target", l.target}, {"steps", l.steps}, {"distance", l.distance},
                        {"coverage", l.coverage}, {"solved", l.solved}});
  }
  const json r = {{"episodes", m.episodes},         {"solved", m.solved},
                  {"solved_ratio", m.solved_ratio}, {"median_steps", m.median_steps},
                  {"median_distance", m.median_distance}, {"coverage_curve", m.coverage_curve},
                  {"per_episode", episodes}};
  std::ofstream o(report);
  if (!o) throw Error("cannot write " + report.string());
  o << r.dump(2) << "\n";
  o.close();
  write_file_manifest(report, {report}, config_hash(c));
  std::cout << "solved " << m.solved << "/" << m.episodes << ", median steps " << m.median_steps << "\n";
  return 0;
}

int cmd_experiment(const std::string& config, const std::string& out, bool report_only) {
  KeyValueConfig c = load_config(config);
  if (!out.empty()) c.set("experiment.out", out);
  const ExperimentSpec spec = ExperimentSpec::from_config(c);
  json report;
  if (report_only) {
    report = build_report(spec.out);
    write_manifest(spec.out, spec.config_hash());
  } else {
    report = run_experiment(spec).report;
  }
  std::ifstream txt(spec.out / "report.txt");
  std::cout << txt.rdbuf();
  return 0;
}

int cmd_coverage(const fs::path& gt, const fs::path& recon, double tau) {
  const PointCloud g = load_ply(gt);
  const PointCloud r = load_ply(recon);
  const CoverageResult res = surface_coverage(g, r, tau > 0.0 ? tau : default_tau(g));
  std::cout << json{{"coverage_percent", res.coverage_percent}, {"n_obs", res.n_obs}, {"n_gt", res.n_gt},
                    {"tau", res.tau}}.dump()
            << "\n";
  return 0;
}

// Replays a logged episode and writes the views it saw and its reconstruction.
int cmd_export(const fs::path& house, const fs::path& log_path, const std::string& config, const fs::path& out) {
  const KeyValueConfig c = load_config(config);
  const EnvConfig cfg = env_config_from(c);
  std::ifstream li(log_path);
  if (!li) throw Error("cannot read " + log_path.string());
  const EpisodeLog log = EpisodeLog::read_jsonl(li);
  const auto target = make_target(load_mesh(house), cfg, house.stem().string());
  ScanEnv env(cfg, {target});
  env.reset(0);
  if (!(env.pose() == log.initial_pose)) throw Error("export: log starts at a different pose than the config");
  fs::create_directories(out / "views");
  auto dump = [&](int t) {
    const Extrinsics cam = pose_to_camera(env.pose(), target->center);
    char name[32];
    std::snprintf(name, sizeof name, "step_%03d", t);
    std::ofstream g(out / "views" / (std::string(name) + ".pgm"));
    write_pgm(g, quantize8(render_gray(target->accel, cam, cfg.state_camera, cfg.light)));
    std::ofstream d(out / "views" / (std::string(name) + ".depth"), std::ios::binary);
    write_depth_dump(d, render_depth(target->accel, cam, cfg.depth_camera));
  };
  dump(0);
  for (const StepRecord& r : log.records) {
    if (r.action >= 0) {
      env.step(r.action);
    } else {
      env.step(Eigen::VectorXd(r.delta));
    }
    dump(r.t);
  }
  if (std::abs(env.coverage() - log.coverage) > 1e-9) {
    throw Error("export: replay reached coverage " + std::to_string(env.coverage()) + ", log says " +
                std::to_string(log.coverage));
  }
  save_ply(env.reconstruction(), out / "reconstruction.ply");
  save_ply(target->gt, out / "gt.ply");
  write_manifest(out, config_hash(c));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-best-view scanning: houses, baselines, learning and experiments"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int count = 1;
  std::string out, config, kind, house, houses, ckpt, report, gt, recon, log;
  double tau = 0.0;
  bool resume = false, report_only = false;

  auto* hg = app.add_subcommand("housegen", "Write seeded house meshes and a list of their keys");
  hg->add_option("--seed", seed, "First seed");
  hg->add_option("--count", count, "Number of houses")->check(CLI::PositiveNumber);
  hg->add_option("--out", out, "Output directory")->required();

  auto* bl = app.add_subcommand("baseline", "Run one baseline planner and write its episode log");
  bl->add_option("--kind", kind, "circ1, circ2, circ3 or random")->required();
  bl->add_option("--house", house, "Mesh file")->required()->check(CLI::ExistingFile);
  bl->add_option("--config", config, "Key/value config (env.* keys)")->check(CLI::ExistingFile);
  bl->add_option("--seed", seed, "Seed for the random planner");
  bl->add_option("--out", out, "Episode log (JSON lines)")->required();

  auto* tr = app.add_subcommand("train", "Train a DQN or DDPG agent on a directory of meshes");
  tr->add_option("--config", config, "Key/value config (env.* and train.* keys)")->check(CLI::ExistingFile);
  tr->add_option("--houses", houses, "Directory of .mesh files")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_flag("--resume", resume, "Continue from the checkpoint at --out up to train.total_steps");

  auto* ev = app.add_subcommand("eval", "Greedy evaluation of an agent on a directory of meshes");
  ev->add_option("--ckpt", ckpt, "Checkpoint or agent file")->required()->check(CLI::ExistingFile);
  ev->add_option("--config", config, "Key/value config (env.* keys)")->check(CLI::ExistingFile);
  ev->add_option("--houses", houses, "Directory of .mesh files")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report, "Report JSON")->required();

  auto* ex = app.add_subcommand("experiment", "Run a configured experiment end to end");
  ex->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", out, "Output directory (overrides experiment.out)");
  ex->add_flag("--report-only", report_only, "Rebuild the report from the logs already under --out");

  auto* cv = app.add_subcommand("coverage", "Surface coverage of a reconstruction against ground truth");
  cv->add_option("--gt", gt, "Ground-truth PLY")->required()->check(CLI::ExistingFile);
  cv->add_option("--recon", recon, "Reconstruction PLY")->required()->check(CLI::ExistingFile);
  cv->add_option("--tau", tau, "Distance threshold (default 1% of the ground-truth diagonal)");

  auto* xp = app.add_subcommand("export", "Replay an episode log and write its views and reconstruction");
  xp->add_option("--house", house, "Mesh file")->required()->check(CLI::ExistingFile);
  xp->add_option("--log", log, "Episode log")->required()->check(CLI::ExistingFile);
  xp->add_option("--config", config, "Key/value config (env.* keys)")->check(CLI::ExistingFile);
  xp->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*hg) return cmd_housegen(seed, count, out);
    if (*bl) return cmd_baseline(kind, house, config, seed, out);
    if (*tr) return cmd_train(config, houses, out, resume);
    if (*ev) return cmd_eval(ckpt, config, houses, report);
    if (*ex) return cmd_experiment(config, out, report_only);
    if (*cv) return cmd_coverage(gt, recon, tau);
    if (*xp) return cmd_export(house, log, config, out);
  } catch (const nbv::FormatError& e) {
    std::cerr << "nbvscan: " << e.what() << "\n";
    return 3;
  } catch (const nbv::ConfigError& e) {
    std::cerr << "nbvscan: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nbvscan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
