#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbv/config.hpp"
#include "nbv/env.hpp"
#include "nbv/housegen.hpp"
#include "nbv/learn/trainer.hpp"
#include "nbv/planners.hpp"

namespace nbv {

enum class ExperimentKind { kSingleHouse, kMultiHouse, kNonHouse };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& s);

/// One row of the single-house table: a discrete pose grid.
struct Setup {
  int distance_levels = 2;
  double azimuth_step = 45.0;

  /// "2x45", "3x22.5"
  std::string label() const;
  static Setup parse(const std::string& s);
  bool operator==(const Setup&) const = default;
};

/// Every key accepted by experiment configs; see docs/config.md.
const std::set<std::string>& known_config_keys();

/// Reads env.* keys on top of `base`.
EnvConfig env_config_from(const KeyValueConfig& c, EnvConfig base = {});
/// Reads train.* keys on top of `base`.
learn::TrainConfig train_config_from(const KeyValueConfig& c, learn::TrainConfig base = {});
/// Reads house.* keys on top of `base`; `house.seed` samples a spec instead.
HouseSpec house_spec_from(const KeyValueConfig& c, HouseSpec base);

/// Gabled two-storey house with a 5 unit overhang, used by the single-house
/// experiment unless the config names another.
HouseSpec reference_house_spec();

/// Scales a mesh so its bounding-box diagonal equals `diagonal` (skipped
/// when not positive), then centers it on the z axis with its base on z = 0.
Mesh normalize_target_mesh(const Mesh& mesh, double diagonal);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kSingleHouse;
  EnvConfig env;
  learn::TrainConfig train;
  std::vector<PlannerKind> planners{PlannerKind::kCirc1, PlannerKind::kCirc2, PlannerKind::kCirc3};
  std::vector<Setup> setups{Setup{}};
  std::vector<std::uint64_t> seeds{0};

  // single_house
  HouseSpec house = reference_house_spec();
  // multi_house
  int house_count = 22;
  std::uint64_t house_seed = 0;
  SplitMode split_mode = SplitMode::kRandom;
  double test_fraction = 0.1;
  // non_house
  std::filesystem::path mesh;
  double target_diagonal = 120.0;
  double coverage_ceiling = 90.0;  // full-sweep coverage the range calibration aims for
  int random_runs = 5;

  /// Agent or checkpoint to evaluate instead of training.
  std::filesystem::path policy;
  /// Stop training once the greedy policy needs no more steps than the best
  /// circular plan.
  bool stop_at_baseline = true;
  bool export_clouds = true;
  std::filesystem::path out = "out";

  /// Starts from the kind's defaults, then applies every key in `c`.
  /// Unknown keys are a ConfigError.
  static ExperimentSpec from_config(const KeyValueConfig& c);
  /// Every setting with its effective value.
  KeyValueConfig to_config() const;
  /// Hash of the canonical effective config, excluding the output path.
  std::string config_hash() const;
  void validate() const;
};

struct ExperimentResult {
  std::filesystem::path out;
  nlohmann::json report;
};

/// Runs the experiment, writing under spec.out:
///   config.txt, logs/, clouds/, train/, report_index.json, report.json,
///   report.txt (plus coverage_per_step.csv for non-house) and manifest.json.
/// On failure the outputs written so far are kept, the manifest lists them,
/// and the error names the failing stage.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Rebuilds report.json and report.txt (and the coverage CSV) from
/// report_index.json and the logs it references. Pure in the files read.
nlohmann::json build_report(const std::filesystem::path& out_dir);

/// Writes manifest.json listing every file under `out_dir` with its size,
/// content hash and the config hash.
void write_manifest(const std::filesystem::path& out_dir, const std::string& config_hash);

/// Depth-sensor range at which the closest-ring full sweep covers about
/// `ceiling` percent of the target. Returns infinity when even an unlimited
/// range stays below the ceiling. `probes` receives (range, coverage) pairs.
double calibrate_max_range(const Mesh& mesh, EnvConfig config, double ceiling,
                           std::vector<std::pair<double, double>>* probes = nullptr);

/// Greedy-episode score used for validation: -steps when solved, otherwise
/// below -max_steps and increasing with coverage.
double episode_score(const EpisodeLog& log, int max_steps);

}  // namespace nbv
