#include "nbv/learn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "nbv/binary_io.hpp"
#include "nbv/error.hpp"

namespace nbv::learn {

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'B', 'V', 'C', 'K', 'P', 'T', '1'};

Agent make_agent(const TrainConfig& c, const Environment& env, Rng& rng) {
  const ArchSpec trunk = make_trunk(c.architecture, env.state_shape());
  if (c.algorithm == "dqn") {
    if (env.num_actions() < 1) throw ConfigError("train: dqn needs a discrete action space");
    return Agent::make_dqn(trunk, env.num_actions(), c.lr, rng);
  }
  if (env.action_dim() < 1) throw ConfigError("train: ddpg needs a continuous action space");
  return Agent::make_ddpg(trunk, env.action_scale(), c.lr, rng);
}

void check_agent(const Agent& agent, const Environment& env) {
  const auto shape = env.state_shape();
  if (agent.net.arch().input != shape) throw Error("agent input shape does not match the environment state");
  if (agent.discrete()) {
    if (agent.net.output_size() != env.num_actions()) throw Error("agent action count does not match the environment");
  } else if (agent.net.output_size() != env.action_dim()) {
    throw Error("agent action dimension does not match the environment");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (algorithm != "dqn" && algorithm != "ddpg") throw ConfigError("train: algorithm must be dqn or ddpg");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train: gamma must lie in (0, 1)");
  if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (batch_size < 1) throw ConfigError("train: batch size must be positive");
  if (replay_capacity < 1) throw ConfigError("train: replay capacity must be positive");
  if (warmup_steps < 0) throw ConfigError("train: warmup must be non-negative");
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0)) {
    throw ConfigError("train: epsilon must lie in [0, 1]");
  }
  if (eps_decay_steps < 0) throw ConfigError("train: epsilon decay must be non-negative");
  if (target_sync < 1) throw ConfigError("train: target sync period must be positive");
  if (!(tau_soft > 0.0 && tau_soft <= 1.0)) throw ConfigError("train: tau_soft must lie in (0, 1]");
  if (!(noise_sigma >= 0.0)) throw ConfigError("train: noise sigma must be non-negative");
  if (update_every < 1) throw ConfigError("train: update_every must be positive");
  if (total_steps < 1) throw ConfigError("train: total steps must be positive");
  if (checkpoint_every < 0 || validate_every < 0) throw ConfigError("train: periods must be non-negative");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["algorithm"] = algorithm;
  j["architecture"] = architecture;
  j["gamma"] = gamma;
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["replay_capacity"] = replay_capacity;
  j["warmup_steps"] = warmup_steps;
  j["eps_start"] = eps_start;
  j["eps_end"] = eps_end;
  j["eps_decay_steps"] = eps_decay_steps;
  j["target_sync"] = target_sync;
  j["tau_soft"] = tau_soft;
  j["noise_sigma"] = noise_sigma;
  j["update_every"] = update_every;
  j["total_steps"] = total_steps;
  j["seed"] = seed;
  j["checkpoint_every"] = checkpoint_every;
  j["validate_every"] = validate_every;
  j["stop_score"] = stop_score ? nlohmann::json(*stop_score) : nlohmann::json();
  j["checkpoint_replay"] = checkpoint_replay;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.algorithm = j.at("algorithm").get<std::string>();
    c.architecture = j.at("architecture").get<std::string>();
    c.gamma = j.at("gamma").get<double>();
    c.lr = j.at("lr").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.replay_capacity = j.at("replay_capacity").get<std::size_t>();
    c.warmup_steps = j.at("warmup_steps").get<long>();
    c.eps_start = j.at("eps_start").get<double>();
    c.eps_end = j.at("eps_end").get<double>();
    c.eps_decay_steps = j.at("eps_decay_steps").get<long>();
    c.target_sync = j.at("target_sync").get<long>();
    c.tau_soft = j.at("tau_soft").get<double>();
    c.noise_sigma = j.at("noise_sigma").get<double>();
    c.update_every = j.at("update_every").get<int>();
    c.total_steps = j.at("total_steps").get<long>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
    if (j.contains("checkpoint_path")) c.checkpoint_path = j.at("checkpoint_path").get<std::string>();
    c.validate_every = j.at("validate_every").get<int>();
    if (!j.at("stop_score").is_null()) c.stop_score = j.at("stop_score").get<double>();
    c.checkpoint_replay = j.at("checkpoint_replay").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what(), 0);
  }
  return c;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,cumulative_reward,steps,coverage,total_steps\n";
  for (const CurvePoint& p : curve) {
    nlohmann::json r = p.episode_return, c = p.coverage;
    out << p.episode << ',' << r.dump() << ',' << p.steps << ',' << c.dump() << ',' << p.total_steps << '\n';
  }
}

ArchSpec make_trunk(const std::string& architecture, std::array<int, 3> shape) {
  if (architecture == "default") return ArchSpec::image_trunk(shape);
  if (architecture.rfind("mlp:", 0) == 0) {
    std::vector<int> hidden;
    std::stringstream ss(architecture.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        const int w = std::stoi(item);
        if (w < 1) throw ConfigError("architecture: widths must be positive");
        hidden.push_back(w);
      } catch (const std::logic_error&) {
        throw ConfigError("architecture: bad width '" + item + "'");
      }
    }
    return ArchSpec::mlp_trunk(shape, hidden);
  }
  throw ConfigError("unknown architecture '" + architecture + "' (expected default or mlp:W,...)");
}

Trainer::Trainer(Environment& env, TrainConfig config)
    : env_(env), config_((config.validate(), std::move(config))), rng_(config_.seed),
      agent_(make_agent(config_, env_, rng_)), replay_(config_.replay_capacity, env_.state_shape()) {}

Trainer::Trainer(Environment& env, std::istream& in)
    : env_(env), config_(), rng_(0), agent_(Agent::make_dqn(ArchSpec::mlp_trunk({1, 1, 1}, {}), 1, 1e-4, rng_)),
      replay_(1, {1, 1, 1}) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError("checkpoint: bad magic", 0);
  config_ = TrainConfig::from_json(bin::get_string(in, 1 << 20));
  config_.validate();
  agent_ = Agent::read(in);
  check_agent(agent_, env_);
  rng_.set_state(bin::get_string(in, 1 << 20));
  env_.set_rng_state(bin::get_string(in, 1 << 20));
  total_steps_ = bin::get<std::int64_t>(in);
  episodes_ = bin::get<std::int64_t>(in);
  updates_ = bin::get<std::int64_t>(in);
  stopped_early_ = bin::get<std::uint8_t>(in) != 0;
  const auto n = bin::get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    CurvePoint p;
    p.episode = bin::get<std::int64_t>(in);
    p.episode_return = bin::get<double>(in);
    p.steps = bin::get<std::int32_t>(in);
    p.coverage = bin::get<double>(in);
    p.total_steps = bin::get<std::int64_t>(in);
    curve_.push_back(p);
  }
  if (bin::get<std::uint8_t>(in) != 0) {
    best_score_ = bin::get<double>(in);
    best_ = Agent::read(in);
  }
  if (bin::get<std::uint8_t>(in) != 0) {
    replay_ = ReplayBuffer::read(in);
  } else {
    replay_ = ReplayBuffer(config_.replay_capacity, env_.state_shape());
  }
}

void Trainer::save_checkpoint(std::ostream& out) const {
  out.write(kCheckpointMagic, 8);
  bin::put_string(out, config_.to_json());
  agent_.write(out);
  bin::put_string(out, rng_.state());
  bin::put_string(out, env_.rng_state());
  bin::put<std::int64_t>(out, total_steps_);
  bin::put<std::int64_t>(out, episodes_);
  bin::put<std::int64_t>(out, updates_);
  bin::put<std::uint8_t>(out, stopped_early_ ? 1 : 0);
  bin::put<std::uint64_t>(out, curve_.size());
  for (const CurvePoint& p : curve_) {
    bin::put<std::int64_t>(out, p.episode);
    bin::put<double>(out, p.episode_return);
    bin::put<std::int32_t>(out, p.steps);
    bin::put<double>(out, p.coverage);
    bin::put<std::int64_t>(out, p.total_steps);
  }
  bin::put<std::uint8_t>(out, best_ ? 1 : 0);
  if (best_) {
    bin::put<double>(out, *best_score_);
    best_->write(out);
  }
  bin::put<std::uint8_t>(out, config_.checkpoint_replay ? 1 : 0);
  if (config_.checkpoint_replay) replay_.write(out);
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    save_checkpoint(out);
    if (!out) throw Error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

double Trainer::epsilon() const {
  if (config_.eps_decay_steps <= 0 || total_steps_ >= config_.eps_decay_steps) return config_.eps_end;
  const double f = static_cast<double>(total_steps_) / static_cast<double>(config_.eps_decay_steps);
  return config_.eps_start + f * (config_.eps_end - config_.eps_start);
}

void Trainer::train() {
  while (total_steps_ < config_.total_steps && !stopped_early_) run_episode();
  if (!config_.checkpoint_path.empty()) save_checkpoint(config_.checkpoint_path);
}

void Trainer::run_episode() {
  State s = env_.reset();
  double ret = 0.0;
  int steps = 0;
  const int dim = agent_.discrete() ? 0 : static_cast<int>(agent_.action_scale.size());
  while (true) {
    int action = 0;
    Eigen::VectorXf action_c(dim);
    StepOutcome o;
    const bool warm = total_steps_ < config_.warmup_steps;
    if (agent_.discrete()) {
      if (warm || rng_.uniform() < epsilon()) {
        action = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(env_.num_actions())));
      } else {
        action = agent_.greedy_action(s);
      }
      o = env_.step(action);
    } else {
      Eigen::VectorXd a(dim);
      if (warm) {
        for (int k = 0; k < dim; ++k) a[k] = rng_.uniform(-1.0, 1.0);
      } else {
        a = agent_.policy_action(s);
        for (int k = 0; k < dim; ++k) a[k] = std::clamp(a[k] + config_.noise_sigma * rng_.normal(), -1.0, 1.0);
      }
      action_c = a.cast<float>();
      o = env_.step(Eigen::VectorXd(a.cwiseProduct(agent_.action_scale)));
    }
    replay_.add(s, action, action_c, o.reward, o.state, o.terminal);
    ++total_steps_;
    ++steps;
    ret += o.reward;
    if (!warm && total_steps_ % config_.update_every == 0 &&
        replay_.size() >= static_cast<std::size_t>(config_.batch_size)) {
      update();
    }
    s = std::move(o.state);
    if (o.done || total_steps_ >= config_.total_steps) break;
  }
  ++episodes_;
  curve_.push_back({episodes_, ret, steps, env_.coverage(), total_steps_});
  if (config_.checkpoint_every > 0 && episodes_ % config_.checkpoint_every == 0 && !config_.checkpoint_path.empty()) {
    save_checkpoint(config_.checkpoint_path);
  }
  maybe_validate();
}

void Trainer::update() {
  const Batch<float> batch = replay_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
  double loss = 0.0;
  if (agent_.discrete()) {
    loss = dqn_update(agent_.net, agent_.opt, agent_.target, batch, config_.gamma);
  } else {
    const DdpgLosses l = ddpg_update(agent_.net, *agent_.critic, agent_.target, *agent_.critic_target, agent_.opt,
                                     *agent_.critic_opt, batch, config_.gamma, config_.tau_soft);
    loss = l.critic + l.actor;
  }
  ++updates_;
  if (!std::isfinite(loss) || !agent_.net.params().allFinite()) {
    std::string where = "no checkpoint path configured";
    if (!config_.checkpoint_path.empty()) {
      const std::filesystem::path diag = config_.checkpoint_path.string() + ".diag";
      save_checkpoint(diag);
      where = "diagnostic checkpoint at " + diag.string();
    }
    throw Error("train: non-finite loss at update " + std::to_string(updates_) + " (step " +
                std::to_string(total_steps_) + "); " + where);
  }
  if (agent_.discrete() && updates_ % config_.target_sync == 0) agent_.target.params() = agent_.net.params();
}

void Trainer::maybe_validate() {
  if (!validator_ || config_.validate_every <= 0 || episodes_ % config_.validate_every != 0) return;
  if (total_steps_ < config_.warmup_steps) return;
  const double score = validator_(agent_);
  if (!best_score_ || score > *best_score_) {
    best_score_ = score;
    best_ = agent_;
  }
  if (config_.stop_score && score >= *config_.stop_score) stopped_early_ = true;
}

Agent load_agent(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8)) throw FormatError("agent file too short: " + path.string(), 0);
  if (std::memcmp(magic, kCheckpointMagic, 8) == 0) {
    bin::get_string(in, 1 << 20);
    return Agent::read(in);
  }
  in.seekg(0);
  return Agent::read(in);
}

void save_agent(const Agent& agent, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  agent.write(out);
}

EpisodeLog run_policy(const Agent& agent, ScanEnv& env, std::size_t target_index) {
  check_agent(agent, env);
  State s = env.reset(target_index);
  while (true) {
    StepOutcome o;
    if (agent.discrete()) {
      o = env.step(agent.greedy_action(s));
    } else {
      o = env.step(Eigen::VectorXd(agent.policy_action(s).cwiseProduct(agent.action_scale)));
    }
    if (o.done) break;
    s = std::move(o.state);
  }
  return env.log();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EvalMetrics evaluate(const Agent& agent, ScanEnv& env, const std::vector<std::size_t>& targets,
                     int episodes_per_target) {
  check_agent(agent, env);
  if (episodes_per_target < 1) throw Error("evaluate: episodes per target must be positive");
  EvalMetrics m;
  std::vector<double> steps, dist;
  for (std::size_t t : targets) {
    for (int e = 0; e < episodes_per_target; ++e) {
      m.logs.push_back(run_policy(agent, env, t));
      const EpisodeLog& log = m.logs.back();
      steps.push_back(log.steps);
      dist.push_back(log.distance);
      if (log.solved) ++m.solved;
    }
  }
  m.episodes = m.logs.size();
  if (m.episodes == 0) throw Error("evaluate: no targets");
  m.solved_ratio = static_cast<double>(m.solved) / static_cast<double>(m.episodes);
  m.median_steps = median(steps);
  m.median_distance = median(dist);
  m.coverage_curve = coverage_curve(m.logs);
  return m;
}

}  // namespace nbv::learn
