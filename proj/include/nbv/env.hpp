#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "nbv/camera.hpp"
#include "nbv/coverage.hpp"
#include "nbv/fusion.hpp"
#include "nbv/geometry.hpp"
#include "nbv/random.hpp"
#include "nbv/ray_accel.hpp"

namespace nbv {

inline constexpr int kStateSize = 84;

/// Stacked grayscale frames, channel-major (CHW). Channel 0 is the newest.
struct State {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool operator==(const State&) const = default;
};

/// Area-weighted resize of each frame to size x size, stacked newest first.
/// `frames[0]` is the current frame. Throws when frame dimensions differ.
State preprocess_frames(std::span<const GrayImage> frames, int size = kStateSize);

/// Area-weighted (box) resize.
GrayImage resize_area(const GrayImage& image, int width, int height);

/// Rounds each pixel to the nearest of 256 levels, as an 8-bit sensor would.
GrayImage quantize8(GrayImage image);

struct RewardParams {
  double k_c = 1.0;
  double k_x = 0.02;
  double step_penalty = 2.0;
  double terminal_bonus = 100.0;
  double terminal_coverage = 96.0;  // percent
};

struct EnvConfig {
  PoseLimits limits = PoseLimits::discrete(2, 45.0);
  CameraModel state_camera{kStateSize, kStateSize, 60.0};
  CameraModel depth_camera{128, 128, 60.0};
  Vec3 light = default_light();
  int voxels_per_diagonal = 128;
  double truncation_voxels = 3.0;
  double max_weight = 32.0;
  double tau_fraction = 0.01;  // of the ground-truth bounding-box diagonal
  std::size_t gt_points = 10000;
  std::uint64_t gt_seed = 0;
  RewardParams reward;
  int stack_k = 5;
  int max_steps = 50;
  /// Starting pose; unset means farthest distance, 45 degrees, azimuth 0.
  std::optional<SphericalPose> initial_pose;
  bool randomize_initial_azimuth = false;
  std::uint64_t seed = 0;

  void validate() const;
  SphericalPose start_pose() const;
};

/// A scan target with everything derived from its mesh once: ray
/// acceleration, ground-truth samples, coverage threshold and look-at point.
struct ScanTarget {
  Mesh mesh;
  RayAccel accel;
  PointCloud gt;
  /// Outward unit normal of the face each ground-truth point came from.
  std::vector<Vec3> gt_normals;
  double tau = 0.0;
  Aabb bounds;
  Vec3 center = Vec3::Zero();
  std::string name;
};

/// Ground-truth points on downward-facing surface (normal z < -0.1), the
/// region hidden under roof overhangs.
std::vector<std::size_t> under_roof_points(const ScanTarget& target);

std::shared_ptr<const ScanTarget> make_target(const Mesh& mesh, const EnvConfig& config, std::string name = {});

/// One environment transition as seen by a learner.
struct StepOutcome {
  State state;
  double reward = 0.0;
  bool done = false;       // episode over (terminal or truncated)
  bool terminal = false;   // reached terminal coverage; no bootstrapping past it
};

/// Interface shared by the scanning environment and test stubs.
class Environment {
 public:
  virtual ~Environment() = default;
  /// (channels, height, width)
  virtual std::array<int, 3> state_shape() const = 0;
  /// Number of discrete actions; 0 for continuous-only environments.
  virtual int num_actions() const = 0;
  /// Dimension of continuous actions; 0 for discrete-only environments.
  virtual int action_dim() const { return 0; }
  virtual State reset() = 0;
  virtual StepOutcome step(int action) = 0;
  virtual StepOutcome step(const Eigen::VectorXd& action);
  /// Maximum magnitude of each continuous action component; learners act
  /// in [-1, 1] and scale by this.
  virtual Eigen::VectorXd action_scale() const { return Eigen::VectorXd::Ones(action_dim()); }
  /// Surface coverage at the current step, in percent (0 when undefined).
  virtual double coverage() const { return 0.0; }
  /// Serialized state of the environment's own random stream, so training
  /// can resume between episodes.
  virtual std::string rng_state() const { return {}; }
  virtual void set_rng_state(const std::string&) {}
};

struct StepRecord {
  int t = 0;
  SphericalPose pose;
  int action = -1;                 // discrete index, -1 for continuous
  Eigen::Vector3d delta = Eigen::Vector3d::Zero();  // continuous delta as applied
  double reward = 0.0;
  double coverage = 0.0;
  double dx = 0.0;
  bool clamped = false;
};

struct EpisodeLog {
  std::string target;
  SphericalPose initial_pose;
  double initial_coverage = 0.0;
  std::vector<StepRecord> records;
  int steps = 0;
  double distance = 0.0;
  double coverage = 0.0;
  bool solved = false;

  /// JSON Lines: one object per step, then a summary object.
  void write_jsonl(std::ostream& out) const;
  static EpisodeLog read_jsonl(std::istream& in);
};

/// Sum of straight-line camera displacements between consecutive poses.
double path_length(const EpisodeLog& log);

/// Mean coverage after each step across logs. The series is as long as the
/// longest episode; shorter episodes carry their final coverage forward.
std::vector<double> coverage_curve(std::span<const EpisodeLog> logs);

/// The scanning MDP over one or more targets. Single-threaded; independent
/// instances may run concurrently.
class ScanEnv final : public Environment {
 public:
  ScanEnv(EnvConfig config, std::vector<std::shared_ptr<const ScanTarget>> targets);

  std::array<int, 3> state_shape() const override;
  int num_actions() const override { return kNumDiscreteActions; }
  int action_dim() const override { return 3; }
  Eigen::VectorXd action_scale() const override {
    return Eigen::Vector3d(config_.limits.dtheta, config_.limits.dphi, config_.limits.dpsi);
  }

  /// Starts an episode on a target drawn uniformly from the pool.
  State reset() override;
  /// Starts an episode on a specific target.
  State reset(std::size_t target_index);

  StepOutcome step(int action) override;
  StepOutcome step(const Eigen::VectorXd& action) override;

  const EnvConfig& config() const { return config_; }
  const SphericalPose& pose() const { return pose_; }
  double coverage() const override { return coverage_; }
  std::string rng_state() const override { return rng_.state(); }
  void set_rng_state(const std::string& s) override { rng_.set_state(s); }
  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  const EpisodeLog& log() const { return log_; }
  const ScanTarget& target() const { return *targets_.at(current_); }
  std::size_t num_targets() const { return targets_.size(); }
  const TsdfVolume& volume() const { return *volume_; }
  /// Ground-truth points matched so far in this episode.
  const std::vector<bool>& observed() const { return observed_; }
  PointCloud reconstruction() const { return volume_->extract_points(); }

 private:
  struct View {
    GrayImage gray;
    DepthImage depth;
  };
  const View& view_at(const SphericalPose& pose);
  void observe(const SphericalPose& pose);
  StepOutcome advance(const PoseUpdate& update, int action, const Eigen::Vector3d& delta);
  State current_state() const;

  EnvConfig config_;
  std::vector<std::shared_ptr<const ScanTarget>> targets_;
  Rng rng_;
  std::size_t current_ = 0;
  SphericalPose pose_;
  std::optional<TsdfVolume> volume_;
  std::deque<GrayImage> frames_;
  std::vector<bool> observed_;
  std::size_t n_observed_ = 0;
  double coverage_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
  EpisodeLog log_;
  std::map<std::tuple<std::size_t, double, double, double>, View> cache_;
};

/// Reward for a non-terminal step.
double step_reward(const RewardParams& params, double delta_coverage, double dx);

}  // namespace nbv
