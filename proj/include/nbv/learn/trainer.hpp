#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nbv/env.hpp"
#include "nbv/learn/agents.hpp"
#include "nbv/learn/replay.hpp"

namespace nbv::learn {

struct TrainConfig {
  std::string algorithm = "dqn";        // dqn or ddpg
  std::string architecture = "default";  // "default" (image trunk) or "mlp:W1,W2,..."
  double gamma = 0.99;
  double lr = 1e-4;
  int batch_size = 32;
  std::size_t replay_capacity = 50000;
  long warmup_steps = 1000;
  double eps_start = 1.0;
  double eps_end = 0.05;
  long eps_decay_steps = 50000;
  long target_sync = 1000;  // updates between hard syncs (DQN)
  double tau_soft = 0.005;  // DDPG
  double noise_sigma = 0.2;  // DDPG exploration, normalized action units
  int update_every = 4;      // env steps per gradient update
  long total_steps = 200000;
  std::uint64_t seed = 0;
  /// Episodes between periodic checkpoints (0: only at the end).
  int checkpoint_every = 0;
  /// Where to save; not part of to_json, so moving a run keeps its bytes.
  std::filesystem::path checkpoint_path;
  /// Episodes between validation calls (0: never).
  int validate_every = 0;
  /// Training stops once validation reaches this score.
  std::optional<double> stop_score;
  bool checkpoint_replay = true;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// One row per training episode.
struct CurvePoint {
  long episode = 0;
  double episode_return = 0.0;  // cumulative reward of the episode
  int steps = 0;
  double coverage = 0.0;
  long total_steps = 0;
};

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

/// Scores an agent (higher is better); used for early stopping and for
/// keeping the best snapshot.
using Validator = std::function<double(const Agent&)>;

/// Single-environment trainer for DQN and DDPG.
class Trainer {
 public:
  Trainer(Environment& env, TrainConfig config);
  /// Resumes from a checkpoint written by save_checkpoint.
  Trainer(Environment& env, std::istream& checkpoint);

  void set_validator(Validator v) { validator_ = std::move(v); }
  /// Raises or lowers the step budget, e.g. to continue a resumed run.
  /// The checkpoint location is not stored in checkpoints, so a resumed
  /// trainer needs it again to keep saving.
  void set_checkpoint_path(std::filesystem::path p) { config_.checkpoint_path = std::move(p); }
  void set_total_steps(long n) {
    config_.total_steps = n;
    config_.validate();
  }

  /// Trains until config.total_steps environment steps (or the stop score).
  /// Episodes cut by the budget still get a curve row.
  void train();

  const Agent& agent() const { return agent_; }
  /// Best validated agent so far, or the current agent when none.
  const Agent& best_agent() const { return best_ ? *best_ : agent_; }
  std::optional<double> best_score() const { return best_score_; }
  const std::vector<CurvePoint>& curve() const { return curve_; }
  const TrainConfig& config() const { return config_; }
  long total_steps() const { return total_steps_; }
  long episodes() const { return episodes_; }
  long updates() const { return updates_; }
  const ReplayBuffer& replay() const { return replay_; }
  bool stopped_early() const { return stopped_early_; }

  /// Checkpoint: "NBVCKPT1", config, agent (architecture, parameters,
  /// target parameters, optimizer moments), RNG states, counters, curve and
  /// optionally the replay buffer.
  void save_checkpoint(std::ostream& out) const;
  void save_checkpoint(const std::filesystem::path& path) const;

  double epsilon() const;

 private:
  void run_episode();
  void update();
  void maybe_validate();

  Environment& env_;
  TrainConfig config_;
  Rng rng_;
  Agent agent_;
  ReplayBuffer replay_;
  std::vector<CurvePoint> curve_;
  long total_steps_ = 0;
  long episodes_ = 0;
  long updates_ = 0;
  bool stopped_early_ = false;
  Validator validator_;
  std::optional<Agent> best_;
  std::optional<double> best_score_;
};

/// Builds the trunk named by `architecture` for the given state shape.
ArchSpec make_trunk(const std::string& architecture, std::array<int, 3> state_shape);

/// Loads the agent from a trainer checkpoint or a bare agent file.
Agent load_agent(const std::filesystem::path& path);
void save_agent(const Agent& agent, const std::filesystem::path& path);

/// Greedy episode of `agent` on target `target_index`.
EpisodeLog run_policy(const Agent& agent, ScanEnv& env, std::size_t target_index);

struct EvalMetrics {
  std::size_t episodes = 0;
  std::size_t solved = 0;
  double solved_ratio = 0.0;
  double median_steps = 0.0;     // over all episodes
  double median_distance = 0.0;  // over all episodes
  std::vector<double> coverage_curve;
  std::vector<EpisodeLog> logs;
};

/// Greedy evaluation over the given targets. Throws when the agent's input
/// or action shape does not match the environment.
EvalMetrics evaluate(const Agent& agent, ScanEnv& env, const std::vector<std::size_t>& targets,
                     int episodes_per_target = 1);

double median(std::vector<double> v);

}  // namespace nbv::learn
