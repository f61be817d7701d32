#include "nbv/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "nbv/error.hpp"

namespace nbv {

namespace {

constexpr std::size_t kMaxCachedViews = 4096;

// Row-stochastic matrix mapping `in` samples to `out` box-averaged samples.
std::vector<std::vector<std::pair<int, double>>> area_weights(int in, int out) {
  std::vector<std::vector<std::pair<int, double>>> w(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < in && i < hi; ++i) {
      const double overlap = std::min<double>(i + 1, hi) - std::max<double>(i, lo);
      if (overlap > 0.0) w[o].emplace_back(i, overlap / scale);
    }
  }
  return w;
}

}  // namespace

GrayImage resize_area(const GrayImage& image, int width, int height) {
  if (width < 1 || height < 1) throw Error("resize_area: target size must be positive");
  if (image.width == width && image.height == height) return image;
  const auto wx = area_weights(image.width, width);
  const auto wy = area_weights(image.height, height);
  std::vector<double> rows(static_cast<std::size_t>(height) * image.width, 0.0);
  for (int oy = 0; oy < height; ++oy) {
    for (const auto& [iy, a] : wy[oy]) {
      for (int x = 0; x < image.width; ++x) rows[static_cast<std::size_t>(oy) * image.width + x] += a * image.at(x, iy);
    }
  }
  GrayImage out(width, height);
  for (int oy = 0; oy < height; ++oy) {
    for (int ox = 0; ox < width; ++ox) {
      double s = 0.0;
      for (const auto& [ix, a] : wx[ox]) s += a * rows[static_cast<std::size_t>(oy) * image.width + ix];
      out.at(ox, oy) = static_cast<float>(s);
    }
  }
  return out;
}

GrayImage quantize8(GrayImage image) {
  for (float& v : image.data) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return image;
}

State preprocess_frames(std::span<const GrayImage> frames, int size) {
  if (frames.empty()) throw Error("preprocess: no frames");
  for (const GrayImage& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height) {
      throw Error("preprocess: frame dimensions differ");
    }
  }
  State s;
  s.channels = static_cast<int>(frames.size());
  s.height = size;
  s.width = size;
  s.data.reserve(static_cast<std::size_t>(s.channels) * size * size);
  for (const GrayImage& f : frames) {
    const GrayImage r = resize_area(f, size, size);
    s.data.insert(s.data.end(), r.data.begin(), r.data.end());
  }
  return s;
}

double step_reward(const RewardParams& p, double delta_coverage, double dx) {
  return p.k_c * delta_coverage - p.k_x * dx - p.step_penalty;
}

void EnvConfig::validate() const {
  limits.validate();
  state_camera.validate();
  depth_camera.validate();
  if (max_steps < 1) throw ConfigError("env: max_steps must be at least 1");
  if (stack_k < 0) throw ConfigError("env: stack depth k must be non-negative");
  if (voxels_per_diagonal < 8) throw ConfigError("env: voxels_per_diagonal must be at least 8");
  if (!(truncation_voxels >= 2.0)) throw ConfigError("env: truncation must be at least two voxels");
  if (!(max_weight >= 1.0)) throw ConfigError("env: max_weight must be at least 1");
  if (!(tau_fraction > 0.0)) throw ConfigError("env: tau must be positive");
  if (gt_points < 1) throw ConfigError("env: gt_points must be at least 1");
  if (!(reward.terminal_coverage > 0.0 && reward.terminal_coverage <= 100.0)) {
    throw ConfigError("env: terminal coverage must lie in (0, 100]");
  }
  if (std::abs(light.norm() - 1.0) > 1e-6) throw ConfigError("env: light direction must be a unit vector");
  if (!limits.contains(start_pose())) throw ConfigError("env: initial pose outside the pose limits");
}

SphericalPose EnvConfig::start_pose() const {
  if (initial_pose) return *initial_pose;
  return {0.0, 45.0, limits.psi_max};
}

std::shared_ptr<const ScanTarget> make_target(const Mesh& mesh, const EnvConfig& config, std::string name) {
  if (mesh.empty()) throw Error("scan target: empty mesh");
  auto t = std::make_shared<ScanTarget>(
      ScanTarget{mesh, RayAccel(mesh), {}, {}, 0.0, bounding_box(mesh), {}, std::move(name)});
  t->center = t->bounds.center();
  if (0.5 * t->bounds.diagonal() >= config.limits.psi_min) {
    throw ConfigError("scan target: bounding sphere radius " + std::to_string(0.5 * t->bounds.diagonal()) +
                      " reaches the closest orbit " + std::to_string(config.limits.psi_min));
  }
  std::vector<std::uint32_t> faces;
  t->gt = sample_exposed_surface(mesh, config.gt_points, config.gt_seed, t->bounds.min.z(), &faces);
  t->gt_normals.reserve(faces.size());
  for (std::uint32_t f : faces) t->gt_normals.push_back(mesh.face_normal(f));
  t->tau = config.tau_fraction * bounding_box(t->gt).diagonal();
  return t;
}

std::vector<std::size_t> under_roof_points(const ScanTarget& target) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < target.gt_normals.size(); ++i) {
    if (target.gt_normals[i].z() < -0.1) out.push_back(i);
  }
  return out;
}

StepOutcome Environment::step(const Eigen::VectorXd&) {
  throw Error("environment does not accept continuous actions");
}

ScanEnv::ScanEnv(EnvConfig config, std::vector<std::shared_ptr<const ScanTarget>> targets)
    : config_(std::move(config)), targets_(std::move(targets)), rng_(config_.seed) {
  config_.validate();
  if (targets_.empty()) throw ConfigError("env: no scan targets");
  for (const auto& t : targets_) {
    if (!t) throw ConfigError("env: null scan target");
    if (0.5 * t->bounds.diagonal() >= config_.limits.psi_min) {
      throw ConfigError("env: target '" + t->name + "' reaches the closest orbit");
    }
  }
}

std::array<int, 3> ScanEnv::state_shape() const {
  return {config_.stack_k + 1, kStateSize, kStateSize};
}

const ScanEnv::View& ScanEnv::view_at(const SphericalPose& pose) {
  const auto key = std::make_tuple(current_, pose.theta, pose.phi, pose.psi);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (cache_.size() >= kMaxCachedViews) cache_.clear();
  const ScanTarget& t = target();
  const Extrinsics cam = pose_to_camera(pose, t.center);
  View v{quantize8(render_gray(t.accel, cam, config_.state_camera, config_.light)),
         render_depth(t.accel, cam, config_.depth_camera)};
  return cache_.emplace(key, std::move(v)).first->second;
}

void ScanEnv::observe(const SphericalPose& pose) {
  const View& v = view_at(pose);
  const ScanTarget& t = target();
  volume_->integrate(v.depth, pose_to_camera(pose, t.center), config_.depth_camera);
  frames_.push_front(v.gray);
  while (frames_.size() > static_cast<std::size_t>(config_.stack_k) + 1) frames_.pop_back();

  // A ground-truth point stays observed once matched, so coverage cannot
  // drop when a later view re-averages a voxel across the zero level.
  const PointCloud recon = volume_->extract_points();
  if (!recon.empty()) {
    const KdTree index(recon.points);
    for (std::size_t i = 0; i < t.gt.points.size(); ++i) {
      if (observed_[i]) continue;
      if (index.any_within(t.gt.points[i], t.tau)) {
        observed_[i] = true;
        ++n_observed_;
      }
    }
  }
  coverage_ = 100.0 * static_cast<double>(n_observed_) / static_cast<double>(t.gt.points.size());
}

State ScanEnv::current_state() const {
  const std::vector<GrayImage> frames(frames_.begin(), frames_.end());
  return preprocess_frames(frames, kStateSize);
}

State ScanEnv::reset() { return reset(static_cast<std::size_t>(rng_.uniform_int(targets_.size()))); }

State ScanEnv::reset(std::size_t target_index) {
  if (target_index >= targets_.size()) throw Error("env: target index out of range");
  current_ = target_index;
  const ScanTarget& t = target();
  pose_ = config_.start_pose();
  if (config_.randomize_initial_azimuth) {
    pose_.theta = config_.limits.dtheta * static_cast<double>(rng_.uniform_int(config_.limits.azimuth_bins()));
  }
  FusionDefaults fd = default_fusion(t.bounds, config_.voxels_per_diagonal);
  fd.params.truncation = config_.truncation_voxels * fd.voxel_size;
  fd.params.max_weight = config_.max_weight;
  volume_.emplace(t.bounds, fd.voxel_size, fd.params);
  frames_.clear();
  observed_.assign(t.gt.points.size(), false);
  n_observed_ = 0;
  steps_ = 0;
  done_ = false;

  observe(pose_);
  while (frames_.size() < static_cast<std::size_t>(config_.stack_k) + 1) frames_.push_back(frames_.front());

  log_ = EpisodeLog{};
  log_.target = t.name;
  log_.initial_pose = pose_;
  log_.initial_coverage = coverage_;
  log_.coverage = coverage_;
  return current_state();
}

StepOutcome ScanEnv::advance(const PoseUpdate& update, int action, const Eigen::Vector3d& delta) {
  const ScanTarget& t = target();
  const double dx = (pose_position(update.pose, t.center) - pose_position(pose_, t.center)).norm();
  const double before = coverage_;
  pose_ = update.pose;
  observe(pose_);
  ++steps_;

  StepOutcome out;
  const double gain = coverage_ - before;
  if (coverage_ > config_.reward.terminal_coverage) {
    out.reward = config_.reward.terminal_bonus;
    out.terminal = true;
    out.done = true;
  } else {
    out.reward = step_reward(config_.reward, gain, dx);
    out.done = steps_ >= config_.max_steps;
  }
  done_ = out.done;
  out.state = current_state();

  StepRecord rec;
  rec.t = steps_;
  rec.pose = pose_;
  rec.action = action;
  rec.delta = delta;
  rec.reward = out.reward;
  rec.coverage = coverage_;
  rec.dx = dx;
  rec.clamped = update.clamped;
  log_.records.push_back(rec);
  log_.steps = steps_;
  log_.distance += dx;
  log_.coverage = coverage_;
  log_.solved = out.terminal;
  return out;
}

StepOutcome ScanEnv::step(int action) {
  if (done_) throw Error("env: step called after the episode ended");
  const PoseUpdate update = apply_discrete_action(pose_, action, config_.limits);
  Eigen::Vector3d delta(update.pose.theta - pose_.theta, update.pose.phi - pose_.phi, update.pose.psi - pose_.psi);
  delta[0] = std::remainder(delta[0], 360.0);
  return advance(update, action, delta);
}

StepOutcome ScanEnv::step(const Eigen::VectorXd& action) {
  if (done_) throw Error("env: step called after the episode ended");
  if (action.size() != 3) throw Error("env: continuous action must have 3 components");
  const PoseUpdate update = apply_continuous_action(pose_, action.head<3>(), config_.limits);
  Eigen::Vector3d delta(update.pose.theta - pose_.theta, update.pose.phi - pose_.phi, update.pose.psi - pose_.psi);
  delta[0] = std::remainder(delta[0], 360.0);
  return advance(update, -1, delta);
}

double path_length(const EpisodeLog& log) {
  // Chords depend only on the spherical coordinates, so any center works.
  double d = 0.0;
  Vec3 prev = pose_position(log.initial_pose, Vec3::Zero());
  for (const StepRecord& r : log.records) {
    const Vec3 p = pose_position(r.pose, Vec3::Zero());
    d += (p - prev).norm();
    prev = p;
  }
  return d;
}

std::vector<double> coverage_curve(std::span<const EpisodeLog> logs) {
  if (logs.empty()) throw Error("coverage_curve: no logs");
  std::size_t len = 0;
  for (const EpisodeLog& l : logs) len = std::max(len, l.records.size());
  std::vector<double> curve(len, 0.0);
  for (const EpisodeLog& l : logs) {
    for (std::size_t t = 0; t < len; ++t) {
      if (t < l.records.size()) {
        curve[t] += l.records[t].coverage;
      } else {
        curve[t] += l.records.empty() ? l.coverage : l.records.back().coverage;
      }
    }
  }
  for (double& c : curve) c /= static_cast<double>(logs.size());
  return curve;
}

void EpisodeLog::write_jsonl(std::ostream& out) const {
  using nlohmann::json;
  for (const StepRecord& r : records) {
    json j;
    j["t"] = r.t;
    j["theta"] = r.pose.theta;
    j["phi"] = r.pose.phi;
    j["psi"] = r.pose.psi;
    if (r.action >= 0) {
      j["action"] = r.action;
    } else {
      j["action"] = json::array({r.delta[0], r.delta[1], r.delta[2]});
    }
    j["reward"] = r.reward;
    j["coverage"] = r.coverage;
    j["dx"] = r.dx;
    j["clamped"] = r.clamped;
    out << j.dump() << '\n';
  }
  json s;
  s["steps"] = steps;
  s["distance"] = distance;
  s["coverage"] = coverage;
  s["solved"] = solved;
  s["target"] = target;
  s["initial_theta"] = initial_pose.theta;
  s["initial_phi"] = initial_pose.phi;
  s["initial_psi"] = initial_pose.psi;
  s["initial_coverage"] = initial_coverage;
  out << s.dump() << '\n';
}

EpisodeLog EpisodeLog::read_jsonl(std::istream& in) {
  using nlohmann::json;
  EpisodeLog log;
  std::string line;
  bool summary = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (summary) throw FormatError("episode log: data after the summary", lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(std::string("episode log: ") + e.what(), lineno);
    }
    try {
      if (j.contains("steps")) {
        log.steps = j.at("steps").get<int>();
        log.distance = j.at("distance").get<double>();
        log.coverage = j.at("coverage").get<double>();
        log.solved = j.at("solved").get<bool>();
        log.target = j.value("target", "");
        log.initial_pose = {j.value("initial_theta", 0.0), j.value("initial_phi", 45.0), j.value("initial_psi", 125.0)};
        log.initial_coverage = j.value("initial_coverage", 0.0);
        summary = true;
        continue;
      }
      StepRecord r;
      r.t = j.at("t").get<int>();
      r.pose = {j.at("theta").get<double>(), j.at("phi").get<double>(), j.at("psi").get<double>()};
      const json& a = j.at("action");
      if (a.is_array()) {
        r.action = -1;
        for (int k = 0; k < 3; ++k) r.delta[k] = a.at(k).get<double>();
      } else {
        r.action = a.get<int>();
      }
      r.reward = j.at("reward").get<double>();
      r.coverage = j.at("coverage").get<double>();
      r.dx = j.at("dx").get<double>();
      r.clamped = j.at("clamped").get<bool>();
      log.records.push_back(r);
    } catch (const json::exception& e) {
      throw FormatError(std::string("episode log: ") + e.what(), lineno);
    }
  }
  if (!summary) throw FormatError("episode log: missing summary line", lineno);
  return log;
}

}  // namespace nbv
