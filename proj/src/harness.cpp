#include "nbv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "nbv/error.hpp"

namespace nbv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSingleHouse: return "single_house";
    case ExperimentKind::kMultiHouse: return "multi_house";
    case ExperimentKind::kNonHouse: return "non_house";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "single_house") return ExperimentKind::kSingleHouse;
  if (s == "multi_house") return ExperimentKind::kMultiHouse;
  if (s == "non_house") return ExperimentKind::kNonHouse;
  throw ConfigError("unknown experiment kind '" + s + "' (single_house, multi_house, non_house)");
}

std::string Setup::label() const { return std::to_string(distance_levels) + "x" + format_number(azimuth_step); }

Setup Setup::parse(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("setup '" + s + "' should look like 2x45");
  Setup out;
  try {
    std::size_t used = 0;
    out.distance_levels = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const std::string az = s.substr(x + 1);
    out.azimuth_step = std::stod(az, &used);
    if (used != az.size()) throw std::invalid_argument(s);
  } catch (const std::logic_error&) {
    throw ConfigError("setup '" + s + "' should look like 2x45");
  }
  if (out.distance_levels < 1 || !(out.azimuth_step > 0.0 && out.azimuth_step <= 180.0)) {
    throw ConfigError("setup '" + s + "' is out of range");
  }
  return out;
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "experiment.kind", "experiment.seeds", "experiment.planners", "experiment.setups", "experiment.policy",
      "experiment.stop_at_baseline", "experiment.export_clouds", "experiment.out",
      "house.seed", "house.width", "house.depth", "house.storeys", "house.wall_height", "house.roof_style",
      "house.roof_overhang", "house.roof_rise", "house.palette", "house.attachments",
      "houses.count", "houses.seed", "houses.split", "houses.test_fraction",
      "target.mesh", "target.diagonal", "target.coverage_ceiling", "target.random_runs",
      "env.distance_levels", "env.azimuth_step", "env.terminal_coverage", "env.k_c", "env.k_x",
      "env.step_penalty", "env.terminal_bonus", "env.max_steps", "env.stack_k", "env.gt_points", "env.gt_seed",
      "env.tau_fraction", "env.voxels_per_diagonal", "env.truncation_voxels", "env.max_weight", "env.depth_size",
      "env.fov", "env.max_range", "env.randomize_initial_azimuth", "env.seed",
      "train.algorithm", "train.architecture", "train.gamma", "train.lr", "train.batch_size",
      "train.replay_capacity", "train.warmup_steps", "train.eps_start", "train.eps_end", "train.eps_decay_steps",
      "train.target_sync", "train.tau_soft", "train.noise_sigma", "train.update_every", "train.total_steps",
      "train.seed", "train.checkpoint_every", "train.validate_every", "train.checkpoint_replay"};
  return keys;
}

namespace {

std::string number_text(double v) { return std::isfinite(v) ? format_number(v) : (v > 0 ? "inf" : "-inf"); }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string attachment_text(const Attachment& a) {
  return to_string(a.kind) + ":" + format_number(a.offset) + ":" + format_number(a.width) + ":" +
         format_number(a.depth) + ":" + format_number(a.height);
}

Attachment parse_attachment(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty() || (parts.size() != 1 && parts.size() != 5)) {
    throw ConfigError("attachment '" + s + "' should be kind or kind:offset:width:depth:height");
  }
  Attachment a;
  try {
    a.kind = parse_attachment_kind(parts[0]);
  } catch (const Error& e) {
    throw ConfigError("attachment '" + s + "': " + e.what());
  }
  if (parts.size() == 5) {
    try {
      a.offset = std::stod(parts[1]);
      a.width = std::stod(parts[2]);
      a.depth = std::stod(parts[3]);
      a.height = std::stod(parts[4]);
    } catch (const std::logic_error&) {
      throw ConfigError("attachment '" + s + "' has a non-numeric field");
    }
  }
  return a;
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "random") return SplitMode::kRandom;
  if (s == "geometry") return SplitMode::kGeometry;
  throw ConfigError("unknown split '" + s + "' (random, geometry)");
}

std::string split_text(SplitMode m) { return m == SplitMode::kRandom ? "random" : "geometry"; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string log_text(const EpisodeLog& log) {
  std::ostringstream ss;
  log.write_jsonl(ss);
  return ss.str();
}

EpisodeLog read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read log " + path.string());
  return EpisodeLog::read_jsonl(in);
}

double subset_coverage(const std::vector<bool>& observed, const std::vector<std::size_t>& subset) {
  if (subset.empty()) return 0.0;
  std::size_t n = 0;
  for (std::size_t i : subset) n += observed[i] ? 1 : 0;
  return 100.0 * static_cast<double>(n) / static_cast<double>(subset.size());
}

json house_json(const HouseSpec& h) {
  json attachments = json::array();
  for (const Attachment& a : h.attachments) attachments.push_back(attachment_text(a));
  return {{"width", h.width},
          {"depth", h.depth},
          {"storeys", h.storeys},
          {"wall_height", h.wall_height},
          {"roof_style", to_string(h.roof_style)},
          {"roof_overhang", h.roof_overhang},
          {"roof_rise", h.roof_rise},
          {"attachments", attachments},
          {"palette", h.albedo_palette},
          {"geometry_key", geometry_key(h)}};
}

EnvConfig setup_env(const EnvConfig& base, const Setup& s) {
  EnvConfig c = base;
  c.limits = PoseLimits::discrete(s.distance_levels, s.azimuth_step);
  c.initial_pose.reset();
  c.validate();
  return c;
}

bool is_circ(PlannerKind k) { return k != PlannerKind::kRandom; }

// Relative path text used inside the index.
std::string rel(const fs::path& p) { return p.generic_string(); }

struct Run {
  const ExperimentSpec& spec;
  fs::path out;
  json index;
  std::string stage = "setup";

  void save_log(const std::string& relpath, const EpisodeLog& log) { write_text(out / relpath, log_text(log)); }

  void save_cloud(const std::string& relpath, const PointCloud& cloud) {
    if (!spec.export_clouds) return;
    fs::create_directories((out / relpath).parent_path());
    save_ply(cloud, out / relpath);
  }

  // Trains one seed (or loads the configured policy) against `train_env`,
  // validating with `validate` on a separate environment.
  learn::Agent obtain_policy(Environment& train_env, std::uint64_t seed, const std::string& dir,
                             std::optional<double> stop_score, const learn::Validator& validate, json& info) {
    if (!spec.policy.empty()) {
      info = {{"source", "loaded"}, {"path", spec.policy.generic_string()}};
      return learn::load_agent(spec.policy);
    }
    learn::TrainConfig tc = spec.train;
    tc.seed = seed;
    tc.stop_score = spec.stop_at_baseline ? stop_score : std::nullopt;
    tc.checkpoint_path = out / dir / "checkpoint.bin";
    fs::create_directories(out / dir);
    learn::Trainer trainer(train_env, tc);
    trainer.set_validator(validate);
    trainer.train();
    std::ostringstream curve;
    learn::write_curve_csv(curve, trainer.curve());
    write_text(out / dir / "curve.csv", curve.str());
    learn::save_agent(trainer.best_agent(), out / dir / "agent.bin");
    info = {{"source", "trained"},
            {"dir", dir},
            {"env_steps", trainer.total_steps()},
            {"episodes", trainer.episodes()},
            {"updates", trainer.updates()},
            {"stopped_early", trainer.stopped_early()}};
    if (trainer.best_score()) info["best_score"] = *trainer.best_score();
    if (tc.stop_score) info["stop_score"] = *tc.stop_score;
    return trainer.best_agent();
  }

  // Shared by the single-house and non-house experiments.
  void run_single_target(const Mesh& mesh, const std::string& name, const EnvConfig& env_base) {
    json setups = json::array();
    for (const Setup& setup : spec.setups) {
      const std::string label = setup.label();
      stage = "target " + label;
      const EnvConfig cfg = setup_env(env_base, setup);
      const auto target = make_target(mesh, cfg, name);
      const std::vector<std::size_t> under = under_roof_points(*target);
      ScanEnv eval(cfg, {target});
      json entry = {{"label", label},
                    {"distance_levels", setup.distance_levels},
                    {"azimuth_step", setup.azimuth_step},
                    {"max_steps", cfg.max_steps},
                    {"terminal_coverage", cfg.reward.terminal_coverage},
                    {"under_roof_points", under.size()}};
      save_cloud("clouds/" + label + "/gt.ply", target->gt);

      stage = "baselines " + label;
      json baselines = json::array();
      std::optional<int> best_circ;
      std::vector<PlannerKind> planners = spec.planners;
      const bool random_listed = std::count(planners.begin(), planners.end(), PlannerKind::kRandom) > 0;
      const int random_runs = spec.kind == ExperimentKind::kNonHouse || random_listed ? spec.random_runs : 0;
      std::erase(planners, PlannerKind::kRandom);
      for (PlannerKind p : planners) {
        eval.reset(0);
        const EpisodeLog log = run_planner(eval, plan_actions(p, cfg.limits, cfg.start_pose()));
        const std::string base = label + "/" + to_string(p);
        save_log("logs/" + base + ".jsonl", log);
        save_cloud("clouds/" + base + ".ply", eval.reconstruction());
        baselines.push_back({{"planner", to_string(p)},
                             {"log", "logs/" + base + ".jsonl"},
                             {"under_roof", subset_coverage(eval.observed(), under)}});
        if (log.solved && (!best_circ || log.steps < *best_circ)) best_circ = log.steps;
      }
      for (int r = 0; r < random_runs; ++r) {
        eval.reset(0);
        const EpisodeLog log = run_random(eval, static_cast<std::uint64_t>(r));
        const std::string base = label + "/random_run" + std::to_string(r);
        save_log("logs/" + base + ".jsonl", log);
        baselines.push_back({{"planner", "random"},
                             {"run", r},
                             {"log", "logs/" + base + ".jsonl"},
                             {"under_roof", subset_coverage(eval.observed(), under)}});
      }
      entry["baselines"] = baselines;

      json policies = json::array();
      for (std::uint64_t seed : spec.seeds) {
        stage = "policy " + label + " seed " + std::to_string(seed);
        EnvConfig tcfg = cfg;
        tcfg.seed = seed;
        ScanEnv train_env(tcfg, {target});
        ScanEnv val_env(cfg, {target});
        const learn::Validator validate = [&](const learn::Agent& a) {
          return episode_score(learn::run_policy(a, val_env, 0), cfg.max_steps);
        };
        std::optional<double> stop;
        if (best_circ) stop = -static_cast<double>(*best_circ);
        json info;
        const learn::Agent agent = obtain_policy(train_env, seed, "train/" + label + "/seed" + std::to_string(seed),
                                                 stop, validate, info);
        const EpisodeLog log = learn::run_policy(agent, eval, 0);
        const std::string base = label + "/policy_seed" + std::to_string(seed);
        save_log("logs/" + base + ".jsonl", log);
        save_cloud("clouds/" + base + ".ply", eval.reconstruction());
        json p = {{"seed", seed},
                  {"log", "logs/" + base + ".jsonl"},
                  {"under_roof", subset_coverage(eval.observed(), under)},
                  {"train", info}};
        // Circular plans cut to the policy's step count, for the occlusion comparison.
        json budget = json::array();
        for (PlannerKind c : planners) {
          std::vector<int> plan = plan_actions(c, cfg.limits, cfg.start_pose());
          if (plan.size() > static_cast<std::size_t>(log.steps)) plan.resize(static_cast<std::size_t>(log.steps));
          eval.reset(0);
          const EpisodeLog cut = run_planner(eval, plan);
          const std::string cb = label + "/budget/" + to_string(c) + "_seed" + std::to_string(seed);
          save_log("logs/" + cb + ".jsonl", cut);
          budget.push_back({{"planner", to_string(c)},
                            {"log", "logs/" + cb + ".jsonl"},
                            {"under_roof", subset_coverage(eval.observed(), under)}});
        }
        p["same_budget"] = budget;
        policies.push_back(p);
      }
      entry["policy"] = policies;
      setups.push_back(entry);
    }
    index["setups"] = setups;
  }

  void single_house() {
    stage = "house";
    const Mesh mesh = generate_house(spec.house);
    save_mesh(mesh, out / "house.mesh");
    index["house"] = house_json(spec.house);
    run_single_target(mesh, "house", spec.env);
  }

  void non_house() {
    stage = "target mesh";
    const Mesh mesh = normalize_target_mesh(load_mesh(spec.mesh), spec.target_diagonal);
    save_mesh(mesh, out / "target.mesh");
    EnvConfig env = spec.env;
    json cal = {{"ceiling", spec.coverage_ceiling}};
    if (!std::isfinite(env.depth_camera.max_range)) {
      stage = "range calibration";
      std::vector<std::pair<double, double>> probes;
      env.depth_camera.max_range =
          calibrate_max_range(mesh, setup_env(env, spec.setups.front()), spec.coverage_ceiling, &probes);
      std::string csv = "max_range,coverage\n";
      for (const auto& [r, c] : probes) csv += number_text(r) + "," + number_text(c) + "\n";
      write_text(out / "calibration.csv", csv);
      cal["probes"] = probes.size();
    }
    cal["max_range"] = number_text(env.depth_camera.max_range);
    index["calibration"] = cal;
    run_single_target(mesh, fs::path(spec.mesh).stem().string(), env);
  }

  void multi_house() {
    stage = "houses";
    const Setup& setup = spec.setups.front();
    const EnvConfig cfg = setup_env(spec.env, setup);
    std::vector<HouseSpec> specs;
    for (int i = 0; i < spec.house_count; ++i) specs.push_back(sample_spec(spec.house_seed + static_cast<std::uint64_t>(i)));
    const DatasetSplit split = split_dataset(specs, spec.split_mode, spec.test_fraction, spec.house_seed);

    fs::create_directories(out / "houses");
    std::vector<std::shared_ptr<const ScanTarget>> targets;
    std::vector<std::size_t> train_ids, test_ids;
    json houses = json::array();
    auto add = [&](const HouseSpec& h, const std::string& set, std::size_t k) {
      char name[32];
      std::snprintf(name, sizeof name, "%s_%02zu", set.c_str(), k);
      const Mesh mesh = generate_house(h);
      save_mesh(mesh, out / "houses" / (std::string(name) + ".mesh"));
      (set == "train" ? train_ids : test_ids).push_back(targets.size());
      targets.push_back(make_target(mesh, cfg, name));
      json hj = house_json(h);
      hj["name"] = name;
      hj["set"] = set;
      houses.push_back(hj);
    };
    for (std::size_t k = 0; k < split.train.size(); ++k) add(split.train[k], "train", k);
    for (std::size_t k = 0; k < split.test.size(); ++k) add(split.test[k], "test", k);
    index["split"] = split_text(spec.split_mode);
    index["max_steps"] = cfg.max_steps;
    index["terminal_coverage"] = cfg.reward.terminal_coverage;
    index["setup"] = setup.label();

    ScanEnv eval(cfg, targets);
    stage = "baselines";
    json baselines = json::array();
    for (PlannerKind p : spec.planners) {
      for (std::size_t t = 0; t < targets.size(); ++t) {
        eval.reset(t);
        const EpisodeLog log = is_circ(p) ? run_planner(eval, plan_actions(p, cfg.limits, cfg.start_pose()))
                                          : run_random(eval, t);
        const std::string path = "logs/baselines/" + targets[t]->name + "_" + to_string(p) + ".jsonl";
        save_log(path, log);
        baselines.push_back({{"planner", to_string(p)}, {"house", targets[t]->name}, {"log", path}});
      }
    }
    index["baselines"] = baselines;

    std::vector<std::shared_ptr<const ScanTarget>> train_targets;
    for (std::size_t i : train_ids) train_targets.push_back(targets[i]);
    json policies = json::array();
    for (std::uint64_t seed : spec.seeds) {
      stage = "policy seed " + std::to_string(seed);
      EnvConfig tcfg = cfg;
      tcfg.seed = seed;
      ScanEnv train_env(tcfg, train_targets);
      ScanEnv val_env(cfg, train_targets);
      const learn::Validator validate = [&](const learn::Agent& a) {
        double solved = 0.0, cov = 0.0;
        for (std::size_t t = 0; t < train_targets.size(); ++t) {
          const EpisodeLog log = learn::run_policy(a, val_env, t);
          solved += log.solved ? 1.0 : 0.0;
          cov += log.coverage;
        }
        return solved + cov / (100.0 * static_cast<double>(train_targets.size()) + 1.0);
      };
      json info;
      const learn::Agent agent = obtain_policy(train_env, seed, "train/seed" + std::to_string(seed),
                                               static_cast<double>(train_targets.size()), validate, info);
      json logs = json::array();
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const EpisodeLog log = learn::run_policy(agent, eval, t);
        const std::string path = "logs/policy_seed" + std::to_string(seed) + "/" + targets[t]->name + ".jsonl";
        save_log(path, log);
        save_cloud("clouds/policy_seed" + std::to_string(seed) + "/" + targets[t]->name + ".ply",
                   eval.reconstruction());
        logs.push_back({{"house", targets[t]->name}, {"log", path}});
      }
      policies.push_back({{"seed", seed}, {"train", info}, {"logs", logs}});
    }
    index["houses"] = houses;
    index["policy"] = policies;
  }
};

// ---- report building -------------------------------------------------------

std::string table_text(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string steps_cell(double steps, bool solved) {
  return (steps == std::floor(steps) ? std::to_string(static_cast<long>(steps)) : fixed(steps, 1)) +
         (solved ? "" : "*");
}

json single_target_report(const fs::path& dir, const json& index, std::string& text, std::string& csv) {
  json rows = json::array();
  std::vector<std::vector<std::string>> table;
  std::vector<std::vector<std::string>> seed_table{
      {"setup", "seed", "steps", "distance", "coverage", "under-roof", "best circ same budget"}};
  std::vector<std::string> header{"setup"};
  bool header_done = false;
  bool csv_done = false;
  std::vector<std::vector<double>> csv_columns;
  std::vector<std::string> csv_names;

  for (const json& s : index.at("setups")) {
    json row = {{"setup", s.at("label")},
                {"distance_levels", s.at("distance_levels")},
                {"azimuth_step", s.at("azimuth_step")},
                {"terminal_coverage", s.at("terminal_coverage")}};
    json steps = json::object(), distance = json::object(), solved = json::object(), coverage = json::object();
    std::vector<std::string> names;
    std::map<std::string, std::vector<EpisodeLog>> by_planner;
    std::map<std::string, double> circ_under;
    for (const json& b : s.at("baselines")) {
      const std::string p = b.at("planner");
      if (!by_planner.count(p)) names.push_back(p);
      by_planner[p].push_back(read_log(dir / b.at("log").get<std::string>()));
      if (p != "random") circ_under[p] = b.at("under_roof").get<double>();
    }
    std::optional<std::string> best;
    for (const std::string& p : names) {
      const auto& logs = by_planner[p];
      std::vector<double> st, di, co;
      std::size_t ns = 0;
      for (const auto& l : logs) {
        st.push_back(l.steps);
        di.push_back(l.distance);
        co.push_back(l.coverage);
        ns += l.solved ? 1 : 0;
      }
      steps[p] = learn::median(st);
      distance[p] = learn::median(di);
      coverage[p] = learn::median(co);
      solved[p] = 2 * ns > logs.size();
      if (p != "random" && logs.front().solved &&
          (!best || logs.front().steps < by_planner[*best].front().steps)) {
        best = p;
      }
    }

    std::vector<EpisodeLog> policy_logs;
    std::vector<double> pst, pdi, pco, pur, cur;
    json seeds = json::array();
    std::size_t policy_solved = 0, occlusion_wins = 0;
    for (const json& p : s.at("policy")) {
      const EpisodeLog log = read_log(dir / p.at("log").get<std::string>());
      double best_budget = 0.0;
      std::string best_budget_planner;
      for (const json& b : p.at("same_budget")) {
        // Fails when the budget run's log is missing.
        read_log(dir / b.at("log").get<std::string>());
        if (best_budget_planner.empty() || b.at("under_roof").get<double>() > best_budget) {
          best_budget = b.at("under_roof").get<double>();
          best_budget_planner = b.at("planner").get<std::string>();
        }
      }
      const double ur = p.at("under_roof").get<double>();
      const bool win = ur >= 90.0 && ur > best_budget;
      occlusion_wins += win ? 1 : 0;
      policy_solved += log.solved ? 1 : 0;
      json sj = {{"seed", p.at("seed")},
                 {"steps", log.steps},
                 {"distance", log.distance},
                 {"coverage", log.coverage},
                 {"solved", log.solved},
                 {"under_roof", ur},
                 {"train", p.at("train")}};
      if (!best_budget_planner.empty()) {
        sj["best_circ_same_budget"] = {{"planner", best_budget_planner}, {"under_roof", best_budget}};
      }
      seeds.push_back(sj);
      seed_table.push_back({s.at("label").get<std::string>(), std::to_string(p.at("seed").get<std::uint64_t>()),
                            steps_cell(log.steps, log.solved), fixed(log.distance, 1), fixed(log.coverage, 2),
                            fixed(ur, 2), best_budget_planner.empty() ? "-" : best_budget_planner + " " + fixed(best_budget, 2)});
      pst.push_back(log.steps);
      pdi.push_back(log.distance);
      pco.push_back(log.coverage);
      pur.push_back(ur);
      if (!best_budget_planner.empty()) cur.push_back(best_budget);
      policy_logs.push_back(log);
    }
    const bool have_policy = !policy_logs.empty();
    if (have_policy) {
      steps["policy"] = learn::median(pst);
      distance["policy"] = learn::median(pdi);
      coverage["policy"] = learn::median(pco);
      solved["policy"] = 2 * policy_solved > policy_logs.size();
    }
    row["steps"] = steps;
    row["distance"] = distance;
    row["coverage"] = coverage;
    row["solved"] = solved;
    row["policy_seeds"] = seeds;
    if (best) {
      row["best_circ"] = {{"planner", *best}, {"steps", by_planner[*best].front().steps}};
      if (have_policy) row["policy_not_worse_than_best_circ"] = learn::median(pst) <= by_planner[*best].front().steps;
    } else {
      row["best_circ"] = nullptr;
    }
    if (have_policy) {
      row["under_roof"] = {{"policy_median", learn::median(pur)},
                           {"best_circ_same_budget_median", cur.empty() ? json(nullptr) : json(learn::median(cur))},
                           {"seeds_policy_at_least_90_and_higher", occlusion_wins},
                           {"seeds", policy_logs.size()}};
    }
    rows.push_back(row);

    if (!header_done) {
      for (const auto& p : names) header.push_back("steps " + p);
      if (have_policy) header.push_back("steps policy");
      for (const auto& p : names) header.push_back("dist " + p);
      if (have_policy) header.push_back("dist policy");
      table.push_back(header);
      header_done = true;
    }
    std::vector<std::string> line{s.at("label").get<std::string>()};
    for (const auto& p : names) line.push_back(steps_cell(steps[p].get<double>(), solved[p].get<bool>()));
    if (have_policy) line.push_back(steps_cell(steps["policy"].get<double>(), solved["policy"].get<bool>()));
    for (const auto& p : names) line.push_back(fixed(distance[p].get<double>(), 1));
    if (have_policy) line.push_back(fixed(distance["policy"].get<double>(), 1));
    table.push_back(line);

    // Mean coverage per step, step 0 being the initial view.
    if (!csv_done) {
      csv_done = true;
      auto add_curve = [&](const std::string& col, const std::vector<EpisodeLog>& logs) {
        if (logs.empty()) return;
        std::vector<double> c{0.0};
        for (const auto& l : logs) c[0] += l.initial_coverage / static_cast<double>(logs.size());
        for (double v : coverage_curve(logs)) c.push_back(v);
        csv_names.push_back(col);
        csv_columns.push_back(c);
      };
      add_curve("policy", policy_logs);
      for (const auto& p : names) add_curve(p, by_planner[p]);
      std::size_t n = 0;
      for (const auto& c : csv_columns) n = std::max(n, c.size());
      csv = "step";
      for (const auto& nme : csv_names) csv += "," + nme;
      csv += "\n";
      for (std::size_t t = 0; t < n; ++t) {
        csv += std::to_string(t);
        for (const auto& c : csv_columns) csv += "," + number_text(c[std::min(t, c.size() - 1)]);
        csv += "\n";
      }
    }
  }
  text += "steps and distance (units); * = not solved within the step budget; policy = median over seeds\n";
  text += table_text(table);
  if (seed_table.size() > 1) {
    text += "\npolicy per seed (coverage in percent)\n";
    text += table_text(seed_table);
  }
  return rows;
}

json multi_house_report(const fs::path& dir, const json& index, std::string& text) {
  std::map<std::string, std::string> set_of;
  for (const json& h : index.at("houses")) set_of[h.at("name")] = h.at("set");
  std::vector<std::string> planner_names;
  std::map<std::string, std::map<std::string, bool>> planner_solved;  // planner -> house -> solved
  for (const json& b : index.at("baselines")) {
    const std::string p = b.at("planner");
    if (!planner_solved.count(p)) planner_names.push_back(p);
    planner_solved[p][b.at("house")] = read_log(dir / b.at("log").get<std::string>()).solved;
  }
  json rows = json::array();
  std::vector<std::vector<std::string>> table{{"split", "set", "houses", "policy"}};
  for (const auto& p : planner_names) table[0].push_back(p);
  table[0].push_back("circ (any)");
  for (const std::string set : {"train", "test"}) {
    std::size_t n = 0;
    for (const auto& [h, s] : set_of) n += s == set ? 1 : 0;
    json row = {{"split", index.at("split")}, {"set", set}, {"houses", n}};
    std::vector<std::string> line{index.at("split").get<std::string>(), set, std::to_string(n)};
    std::vector<double> ratios;
    json seeds = json::array();
    for (const json& p : index.at("policy")) {
      std::size_t solved = 0;
      for (const json& l : p.at("logs")) {
        if (set_of[l.at("house")] != set) continue;
        solved += read_log(dir / l.at("log").get<std::string>()).solved ? 1 : 0;
      }
      seeds.push_back({{"seed", p.at("seed")}, {"solved", solved}, {"train", p.at("train")}});
      ratios.push_back(n ? static_cast<double>(solved) / static_cast<double>(n) : 0.0);
    }
    row["policy_seeds"] = seeds;
    if (!ratios.empty()) {
      const double r = learn::median(ratios);
      row["policy_solved_ratio"] = r;
      line.push_back(fixed(100.0 * r, 1) + "%");
    } else {
      line.push_back("-");
    }
    json pr = json::object();
    std::map<std::string, bool> any;
    for (const auto& p : planner_names) {
      std::size_t solved = 0;
      for (const auto& [h, ok] : planner_solved[p]) {
        if (set_of[h] != set) continue;
        solved += ok ? 1 : 0;
        if (p != "random") any[h] = any[h] || ok;
      }
      pr[p] = n ? static_cast<double>(solved) / static_cast<double>(n) : 0.0;
      line.push_back(std::to_string(solved) + "/" + std::to_string(n));
    }
    std::size_t any_solved = 0;
    for (const auto& [h, ok] : any) any_solved += ok ? 1 : 0;
    row["planner_solved_ratio"] = pr;
    row["circ_any_solved_ratio"] = n ? static_cast<double>(any_solved) / static_cast<double>(n) : 0.0;
    line.push_back(std::to_string(any_solved) + "/" + std::to_string(n));
    rows.push_back(row);
    table.push_back(line);
  }
  text += "ratio of solved houses (terminal coverage " + format_number(index.at("terminal_coverage").get<double>()) +
          "%, " + std::to_string(index.at("max_steps").get<int>()) + " step budget; policy = median over seeds)\n";
  text += table_text(table);
  return rows;
}

}  // namespace

learn::TrainConfig train_config_from(const KeyValueConfig& c, learn::TrainConfig t) {
  t.algorithm = c.get_string("train.algorithm", t.algorithm);
  t.architecture = c.get_string("train.architecture", t.architecture);
  t.gamma = c.get_double("train.gamma", t.gamma);
  t.lr = c.get_double("train.lr", t.lr);
  t.batch_size = static_cast<int>(c.get_int("train.batch_size", t.batch_size));
  t.replay_capacity = c.get_uint("train.replay_capacity", t.replay_capacity);
  t.warmup_steps = c.get_int("train.warmup_steps", t.warmup_steps);
  t.eps_start = c.get_double("train.eps_start", t.eps_start);
  t.eps_end = c.get_double("train.eps_end", t.eps_end);
  t.eps_decay_steps = c.get_int("train.eps_decay_steps", t.eps_decay_steps);
  t.target_sync = c.get_int("train.target_sync", t.target_sync);
  t.tau_soft = c.get_double("train.tau_soft", t.tau_soft);
  t.noise_sigma = c.get_double("train.noise_sigma", t.noise_sigma);
  t.update_every = static_cast<int>(c.get_int("train.update_every", t.update_every));
  t.total_steps = c.get_int("train.total_steps", t.total_steps);
  t.seed = c.get_uint("train.seed", t.seed);
  t.checkpoint_every = static_cast<int>(c.get_int("train.checkpoint_every", t.checkpoint_every));
  t.validate_every = static_cast<int>(c.get_int("train.validate_every", t.validate_every));
  t.checkpoint_replay = c.get_bool("train.checkpoint_replay", t.checkpoint_replay);
  t.validate();
  return t;
}

EnvConfig env_config_from(const KeyValueConfig& c, EnvConfig e) {
  const int levels = static_cast<int>(
      c.get_int("env.distance_levels", static_cast<long>(e.limits.psi_levels().size())));
  const double az = c.get_double("env.azimuth_step", e.limits.dtheta);
  if (c.has("env.distance_levels") || c.has("env.azimuth_step")) {
    if (levels < 1) throw ConfigError("env.distance_levels must be at least 1");
    e.limits = PoseLimits::discrete(levels, az);
  }
  e.reward.terminal_coverage = c.get_double("env.terminal_coverage", e.reward.terminal_coverage);
  e.reward.k_c = c.get_double("env.k_c", e.reward.k_c);
  e.reward.k_x = c.get_double("env.k_x", e.reward.k_x);
  e.reward.step_penalty = c.get_double("env.step_penalty", e.reward.step_penalty);
  e.reward.terminal_bonus = c.get_double("env.terminal_bonus", e.reward.terminal_bonus);
  e.max_steps = static_cast<int>(c.get_int("env.max_steps", e.max_steps));
  e.stack_k = static_cast<int>(c.get_int("env.stack_k", e.stack_k));
  e.gt_points = c.get_uint("env.gt_points", e.gt_points);
  e.gt_seed = c.get_uint("env.gt_seed", e.gt_seed);
  e.tau_fraction = c.get_double("env.tau_fraction", e.tau_fraction);
  e.voxels_per_diagonal = static_cast<int>(c.get_int("env.voxels_per_diagonal", e.voxels_per_diagonal));
  e.truncation_voxels = c.get_double("env.truncation_voxels", e.truncation_voxels);
  e.max_weight = c.get_double("env.max_weight", e.max_weight);
  const int size = static_cast<int>(c.get_int("env.depth_size", e.depth_camera.width));
  e.depth_camera.width = e.depth_camera.height = size;
  e.depth_camera.fov_y_deg = e.state_camera.fov_y_deg = c.get_double("env.fov", e.depth_camera.fov_y_deg);
  e.depth_camera.max_range = c.get_double("env.max_range", e.depth_camera.max_range);
  e.randomize_initial_azimuth = c.get_bool("env.randomize_initial_azimuth", e.randomize_initial_azimuth);
  e.seed = c.get_uint("env.seed", e.seed);
  e.validate();
  return e;
}

HouseSpec reference_house_spec() {
  HouseSpec h;
  h.roof_style = RoofStyle::kGabled;
  h.roof_overhang = 5.0;
  h.storeys = 2;
  h.wall_height = 30.0;
  h.roof_rise = 14.0;
  return h;
}

HouseSpec house_spec_from(const KeyValueConfig& c, HouseSpec h) {
  if (c.has("house.seed")) h = sample_spec(c.get_uint("house.seed", 0));
  h.width = c.get_double("house.width", h.width);
  h.depth = c.get_double("house.depth", h.depth);
  h.storeys = static_cast<int>(c.get_int("house.storeys", h.storeys));
  h.wall_height = c.get_double("house.wall_height", h.wall_height);
  if (c.has("house.roof_style")) {
    try {
      h.roof_style = parse_roof_style(c.get_string("house.roof_style", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("house.roof_style: ") + e.what());
    }
  }
  h.roof_overhang = c.get_double("house.roof_overhang", h.roof_overhang);
  h.roof_rise = c.get_double("house.roof_rise", h.roof_rise);
  h.albedo_palette = static_cast<int>(c.get_int("house.palette", h.albedo_palette));
  if (c.has("house.attachments")) {
    h.attachments.clear();
    for (const std::string& a : c.get_list("house.attachments", {})) h.attachments.push_back(parse_attachment(a));
  }
  validate(h);
  return h;
}

Mesh normalize_target_mesh(const Mesh& mesh, double diagonal) {
  if (mesh.empty()) throw Error("target mesh is empty");
  const Aabb box = bounding_box(mesh);
  const double scale = diagonal > 0.0 ? diagonal / box.diagonal() : 1.0;
  const Vec3 anchor(box.center().x(), box.center().y(), box.min.z());
  std::vector<Vec3> v;
  v.reserve(mesh.num_vertices());
  for (const Vec3& p : mesh.vertices()) v.push_back((p - anchor) * scale);
  return Mesh(std::move(v), mesh.faces(), mesh.face_albedo());
}

ExperimentSpec ExperimentSpec::from_config(const KeyValueConfig& c) {
  c.check_known(known_config_keys());
  ExperimentSpec s;
  s.kind = parse_experiment_kind(c.get_string("experiment.kind", "single_house"));
  // Kind defaults, overridable by any key below.
  EnvConfig env;
  learn::TrainConfig train;
  switch (s.kind) {
    case ExperimentKind::kSingleHouse:
      train.validate_every = 10;
      break;
    case ExperimentKind::kMultiHouse:
      env.reward.terminal_coverage = 92.0;
      train.validate_every = 50;
      break;
    case ExperimentKind::kNonHouse:
      env.reward.terminal_coverage = 85.0;
      s.setups = {Setup{2, 22.5}};
      train.validate_every = 10;
      break;
  }
  s.env = env_config_from(c, env);
  s.train = train_config_from(c, train);

  if (c.has("experiment.setups")) {
    s.setups.clear();
    for (const auto& x : c.get_list("experiment.setups", {})) s.setups.push_back(Setup::parse(x));
  } else if (c.has("env.distance_levels") || c.has("env.azimuth_step")) {
    s.setups = {Setup{static_cast<int>(s.env.limits.psi_levels().size()), s.env.limits.dtheta}};
  }
  if (c.has("experiment.planners")) {
    s.planners.clear();
    for (const auto& p : c.get_list("experiment.planners", {})) s.planners.push_back(parse_planner_kind(p));
  }
  if (c.has("experiment.seeds")) {
    s.seeds.clear();
    for (const auto& x : c.get_list("experiment.seeds", {})) {
      KeyValueConfig one;
      one.set("experiment.seeds", x);
      s.seeds.push_back(one.get_uint("experiment.seeds", 0));
    }
  }
  s.policy = c.get_string("experiment.policy", "");
  s.stop_at_baseline = c.get_bool("experiment.stop_at_baseline", s.stop_at_baseline);
  s.export_clouds = c.get_bool("experiment.export_clouds", s.export_clouds);
  s.out = c.get_string("experiment.out", s.out.string());

  s.house = house_spec_from(c, s.house);
  s.house_count = static_cast<int>(c.get_int("houses.count", s.house_count));
  s.house_seed = c.get_uint("houses.seed", s.house_seed);
  if (c.has("houses.split")) s.split_mode = parse_split_mode(c.get_string("houses.split", ""));
  s.test_fraction = c.get_double("houses.test_fraction", s.test_fraction);

  s.mesh = c.get_string("target.mesh", "");
  // A relative mesh path in a config file is relative to that file.
  if (!s.mesh.empty() && s.mesh.is_relative() && fs::is_regular_file(c.source())) {
    s.mesh = (fs::path(c.source()).parent_path() / s.mesh).lexically_normal();
  }
  s.target_diagonal = c.get_double("target.diagonal", s.target_diagonal);
  s.coverage_ceiling = c.get_double("target.coverage_ceiling", s.coverage_ceiling);
  s.random_runs = static_cast<int>(c.get_int("target.random_runs", s.random_runs));
  s.validate();
  return s;
}

KeyValueConfig ExperimentSpec::to_config() const {
  KeyValueConfig c;
  c.set("experiment.kind", to_string(kind));
  std::vector<std::string> items;
  for (std::uint64_t s : seeds) items.push_back(std::to_string(s));
  c.set("experiment.seeds", join(items));
  items.clear();
  for (PlannerKind p : planners) items.push_back(to_string(p));
  c.set("experiment.planners", join(items));
  items.clear();
  for (const Setup& s : setups) items.push_back(s.label());
  c.set("experiment.setups", join(items));
  c.set("experiment.policy", policy.generic_string());
  c.set("experiment.stop_at_baseline", stop_at_baseline ? "true" : "false");
  c.set("experiment.export_clouds", export_clouds ? "true" : "false");
  c.set("experiment.out", out.generic_string());

  c.set("house.width", format_number(house.width));
  c.set("house.depth", format_number(house.depth));
  c.set("house.storeys", std::to_string(house.storeys));
  c.set("house.wall_height", format_number(house.wall_height));
  c.set("house.roof_style", to_string(house.roof_style));
  c.set("house.roof_overhang", format_number(house.roof_overhang));
  c.set("house.roof_rise", format_number(house.roof_rise));
  c.set("house.palette", std::to_string(house.albedo_palette));
  items.clear();
  for (const Attachment& a : house.attachments) items.push_back(attachment_text(a));
  c.set("house.attachments", join(items));

  c.set("houses.count", std::to_string(house_count));
  c.set("houses.seed", std::to_string(house_seed));
  c.set("houses.split", split_text(split_mode));
  c.set("houses.test_fraction", format_number(test_fraction));

  c.set("target.mesh", mesh.generic_string());
  c.set("target.diagonal", format_number(target_diagonal));
  c.set("target.coverage_ceiling", format_number(coverage_ceiling));
  c.set("target.random_runs", std::to_string(random_runs));

  c.set("env.distance_levels", std::to_string(env.limits.psi_levels().size()));
  c.set("env.azimuth_step", format_number(env.limits.dtheta));
  c.set("env.terminal_coverage", format_number(env.reward.terminal_coverage));
  c.set("env.k_c", format_number(env.reward.k_c));
  c.set("env.k_x", format_number(env.reward.k_x));
  c.set("env.step_penalty", format_number(env.reward.step_penalty));
  c.set("env.terminal_bonus", format_number(env.reward.terminal_bonus));
  c.set("env.max_steps", std::to_string(env.max_steps));
  c.set("env.stack_k", std::to_string(env.stack_k));
  c.set("env.gt_points", std::to_string(env.gt_points));
  c.set("env.gt_seed", std::to_string(env.gt_seed));
  c.set("env.tau_fraction", format_number(env.tau_fraction));
  c.set("env.voxels_per_diagonal", std::to_string(env.voxels_per_diagonal));
  c.set("env.truncation_voxels", format_number(env.truncation_voxels));
  c.set("env.max_weight", format_number(env.max_weight));
  c.set("env.depth_size", std::to_string(env.depth_camera.width));
  c.set("env.fov", format_number(env.depth_camera.fov_y_deg));
  c.set("env.max_range", number_text(env.depth_camera.max_range));
  c.set("env.randomize_initial_azimuth", env.randomize_initial_azimuth ? "true" : "false");
  c.set("env.seed", std::to_string(env.seed));

  c.set("train.algorithm", train.algorithm);
  c.set("train.architecture", train.architecture);
  c.set("train.gamma", format_number(train.gamma));
  c.set("train.lr", format_number(train.lr));
  c.set("train.batch_size", std::to_string(train.batch_size));
  c.set("train.replay_capacity", std::to_string(train.replay_capacity));
  c.set("train.warmup_steps", std::to_string(train.warmup_steps));
  c.set("train.eps_start", format_number(train.eps_start));
  c.set("train.eps_end", format_number(train.eps_end));
  c.set("train.eps_decay_steps", std::to_string(train.eps_decay_steps));
  c.set("train.target_sync", std::to_string(train.target_sync));
  c.set("train.tau_soft", format_number(train.tau_soft));
  c.set("train.noise_sigma", format_number(train.noise_sigma));
  c.set("train.update_every", std::to_string(train.update_every));
  c.set("train.total_steps", std::to_string(train.total_steps));
  c.set("train.seed", std::to_string(train.seed));
  c.set("train.checkpoint_every", std::to_string(train.checkpoint_every));
  c.set("train.validate_every", std::to_string(train.validate_every));
  c.set("train.checkpoint_replay", train.checkpoint_replay ? "true" : "false");
  return c;
}

std::string ExperimentSpec::config_hash() const {
  // Where the outputs go does not change what they contain.
  KeyValueConfig c = to_config();
  c.erase("experiment.out");
  // The mesh enters by content so moving the checkout keeps the hash.
  if (!mesh.empty() && fs::is_regular_file(mesh)) {
    std::ifstream in(mesh, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    c.set("target.mesh", "fnv1a:" + hex64(fnv1a(bytes.str())));
  }
  return hex64(fnv1a(c.canonical()));
}

void ExperimentSpec::validate() const {
  env.validate();
  train.validate();
  if (setups.empty()) throw ConfigError("experiment: no setups");
  if (seeds.empty() && policy.empty()) throw ConfigError("experiment: no seeds");
  if (!policy.empty() && !fs::exists(policy)) throw ConfigError("experiment: policy " + policy.string() + " not found");
  if (!policy.empty() && seeds.size() != 1) throw ConfigError("experiment: a loaded policy takes exactly one seed");
  for (const Setup& s : setups) setup_env(env, s);
  switch (kind) {
    case ExperimentKind::kSingleHouse:
      nbv::validate(house);
      break;
    case ExperimentKind::kMultiHouse:
      if (setups.size() != 1) throw ConfigError("experiment: multi_house takes one setup");
      if (house_count < 2) throw ConfigError("experiment: houses.count must be at least 2");
      if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("experiment: test_fraction in (0, 1)");
      break;
    case ExperimentKind::kNonHouse:
      if (setups.size() != 1) throw ConfigError("experiment: non_house takes one setup");
      if (mesh.empty()) throw ConfigError("experiment: non_house needs target.mesh");
      if (!fs::exists(mesh)) throw ConfigError("experiment: mesh " + mesh.string() + " not found");
      if (!(coverage_ceiling > 0.0 && coverage_ceiling <= 100.0)) {
        throw ConfigError("experiment: coverage_ceiling in (0, 100]");
      }
      if (random_runs < 1) throw ConfigError("experiment: random_runs must be positive");
      break;
  }
}

double episode_score(const EpisodeLog& log, int max_steps) {
  if (log.solved) return -static_cast<double>(log.steps);
  return -static_cast<double>(max_steps) - 1.0 + log.coverage / 100.0;
}

double calibrate_max_range(const Mesh& mesh, EnvConfig config, double ceiling,
                           std::vector<std::pair<double, double>>* probes) {
  config.reward.terminal_coverage = 100.0;
  const std::vector<int> plan = plan_actions(PlannerKind::kCirc1, config.limits, config.start_pose());
  config.max_steps = static_cast<int>(plan.size());
  config.depth_camera.max_range = std::numeric_limits<double>::infinity();
  const auto target = make_target(mesh, config, "calibration");
  auto sweep = [&](double range) {
    EnvConfig c = config;
    c.depth_camera.max_range = range;
    ScanEnv env(c, {target});
    env.reset(0);
    run_planner(env, plan);
    if (probes) probes->emplace_back(range, env.coverage());
    return env.coverage();
  };
  const double radius = 0.5 * target->bounds.diagonal();
  // No hit lies farther than the orbit plus the target radius.
  double hi = config.limits.psi_max + radius;
  double lo = std::max(1e-3, config.limits.psi_min - radius);
  if (sweep(hi) < ceiling) return std::numeric_limits<double>::infinity();
  for (int i = 0; i < 14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sweep(mid) >= ceiling ? hi : lo) = mid;
  }
  return hi;
}

void write_manifest(const fs::path& out_dir, const std::string& config_hash) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string r = rel(fs::relative(e.path(), out_dir));
    if (r != "manifest.json") files.push_back(r);
  }
  std::sort(files.begin(), files.end());
  json artifacts = json::array();
  for (const std::string& f : files) {
    const std::string bytes = read_text(out_dir / f);
    artifacts.push_back(
        {{"path", f}, {"bytes", bytes.size()}, {"fnv1a", hex64(fnv1a(bytes))}, {"config_hash", config_hash}});
  }
  const json m = {{"config_hash", config_hash}, {"artifacts", artifacts}};
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

json build_report(const fs::path& out_dir) {
  const json index = json::parse(read_text(out_dir / "report_index.json"));
  const std::string kind = index.at("kind");
  json report = {{"kind", kind}, {"config_hash", index.at("config_hash")}};
  std::string text = kind + " experiment\n";
  std::string csv;
  if (kind == "multi_house") {
    report["rows"] = multi_house_report(out_dir, index, text);
  } else {
    if (index.contains("calibration")) {
      report["calibration"] = index.at("calibration");
      text += "depth max range " + index.at("calibration").at("max_range").get<std::string>() +
              " (full-sweep coverage target " +
              format_number(index.at("calibration").at("ceiling").get<double>()) + "%)\n";
    }
    if (index.contains("house")) report["house"] = index.at("house");
    report["rows"] = single_target_report(out_dir, index, text, csv);
  }
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  write_text(out_dir / "report.txt", text);
  if (kind == "non_house") write_text(out_dir / "coverage_per_step.csv", csv);
  return report;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Run run{spec, spec.out, json::object()};
  const std::string hash = spec.config_hash();
  try {
    fs::create_directories(spec.out);
    write_text(spec.out / "config.txt", spec.to_config().canonical());
    run.index = {{"kind", to_string(spec.kind)}, {"config_hash", hash}};
    switch (spec.kind) {
      case ExperimentKind::kSingleHouse: run.single_house(); break;
      case ExperimentKind::kMultiHouse: run.multi_house(); break;
      case ExperimentKind::kNonHouse: run.non_house(); break;
    }
    run.stage = "report";
    write_text(spec.out / "report_index.json", run.index.dump(2) + "\n");
    ExperimentResult result{spec.out, build_report(spec.out)};
    write_manifest(spec.out, hash);
    return result;
  } catch (const std::exception& e) {
    try {
      if (fs::exists(spec.out)) write_manifest(spec.out, hash);
    } catch (const std::exception&) {
    }
    throw Error("experiment stage '" + run.stage + "' failed: " + e.what());
  }
}

}  // namespace nbv
