#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nbv/error.hpp"
#include "nbv/housegen.hpp"
#include "nbv/learn/agents.hpp"
#include "nbv/learn/network.hpp"
#include "nbv/learn/replay.hpp"
#include "nbv/learn/trainer.hpp"
#include "support.hpp"

namespace nbv::learn {
namespace {

using Net = Network<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// Central differences of `loss` with respect to `p`.
template <typename F>
Vec numeric_grad(Vec& p, F loss, double h = 1e-6) {
  Vec g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = loss();
    p[i] = keep - h;
    const double down = loss();
    p[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// Largest component error relative to the largest gradient component.
double rel_error(const Vec& a, const Vec& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-12});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double check_params(Net& net, const Mat& x, const Mat* side, Rng& rng) {
  const Mat w = random_mat(rng, net.output_size(), static_cast<int>(x.cols()));
  net.forward(x, side);
  const Vec analytic = net.backward(w);
  const Vec numeric = numeric_grad(net.params(), [&] { return net.predict(x, side).cwiseProduct(w).sum(); });
  return rel_error(analytic, numeric);
}

TEST(ArchSpec, DescribeParseRoundTrip) {
  const ArchSpec q = q_network(ArchSpec::image_trunk({6, 84, 84}), 6);
  EXPECT_EQ(ArchSpec::parse(q.describe()), q);
  const ArchSpec c = critic_network(ArchSpec::mlp_trunk({1, 1, 7}, {16, 8}), 3);
  EXPECT_EQ(ArchSpec::parse(c.describe()), c);
  EXPECT_EQ(q.describe(), "in 6x84x84; conv 16 8 4; relu; conv 32 4 2; relu; dense 256; relu; dense 6");
  EXPECT_THROW(ArchSpec::parse("in 6x84x84; pool 2"), Error);
}

TEST(Network, ConvAndTanhAndReluMatchFiniteDifferences) {
  Rng rng(1);
  Net net(ArchSpec::parse("in 2x9x9; conv 3 3 2; tanh; conv 4 2 1; relu; dense 5"));
  net.init(rng);
  ASSERT_LE(net.num_params(), 5000u);
  EXPECT_LT(check_params(net, random_mat(rng, net.input_size(), 3), nullptr, rng), 1e-4);
}

TEST(Network, DenseWithSideInputMatchesFiniteDifferences) {
  Rng rng(2);
  Net net(ArchSpec::parse("in 1x1x4; dense 6; relu; dense 5; tanh; dense 2; side 3 2"));
  net.init(rng);
  const Mat x = random_mat(rng, 4, 4);
  Mat side = random_mat(rng, 3, 4);
  EXPECT_LT(check_params(net, x, &side, rng), 1e-4);

  const Mat w = random_mat(rng, 2, 4);
  net.forward(x, &side);
  net.backward(w);
  const Mat analytic = net.side_grad();
  Vec flat = Eigen::Map<Vec>(side.data(), side.size());
  const Vec numeric = numeric_grad(flat, [&] {
    const Mat s = Eigen::Map<const Mat>(flat.data(), 3, 4);
    return net.predict(x, &s).cwiseProduct(w).sum();
  });
  EXPECT_LT(rel_error(Eigen::Map<const Vec>(analytic.data(), analytic.size()), numeric), 1e-4);
}

TEST(Network, DefaultHeadsMatchFiniteDifferencesOnSmallInputs) {
  Rng rng(3);
  const ArchSpec trunk = ArchSpec::mlp_trunk({1, 1, 5}, {12});
  for (const ArchSpec& a : {q_network(trunk, 4), actor_network(trunk, 3)}) {
    Net net(a);
    net.init(rng, 3e-3);
    EXPECT_LT(check_params(net, random_mat(rng, 5, 6), nullptr, rng), 1e-4) << a.describe();
  }
  Net critic(critic_network(trunk, 3));
  critic.init(rng, 3e-3);
  const Mat act = random_mat(rng, 3, 6);
  EXPECT_LT(check_params(critic, random_mat(rng, 5, 6), &act, rng), 1e-4);
}

TEST(Network, LinearLayerGradientIsTheOuterProduct) {
  Net net(ArchSpec::parse("in 1x1x3; dense 2"));
  Rng rng(4);
  net.init(rng);
  Mat x(3, 1);
  x << 0.5, -1.0, 2.0;
  Mat g(2, 1);
  g << 3.0, -0.25;
  net.forward(x);
  const Vec grad = net.backward(g);
  const Mat expected_w = g * x.transpose();  // stored column-major, bias after
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 2; ++r) EXPECT_DOUBLE_EQ(grad[c * 2 + r], expected_w(r, c));
  }
  EXPECT_DOUBLE_EQ(grad[6], 3.0);
  EXPECT_DOUBLE_EQ(grad[7], -0.25);
}

TEST(Network, ZeroOutputGradientGivesZeroParameterGradient) {
  Rng rng(5);
  Net net(ArchSpec::parse("in 2x9x9; conv 3 3 2; relu; dense 4"));
  net.init(rng);
  net.forward(random_mat(rng, net.input_size(), 2));
  EXPECT_EQ(net.backward(Mat::Zero(4, 2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Network, ZeroWeightsAndDuplicateStates) {
  Network<float> net(q_network(ArchSpec::image_trunk({6, 84, 84}), 6));
  net.params().setZero();
  Rng rng(6);
  Eigen::MatrixXf x = random_mat(rng, net.input_size(), 1).cwiseAbs().cast<float>();
  EXPECT_EQ(net.predict(x).cwiseAbs().maxCoeff(), 0.0f);

  net.init(rng);
  Eigen::MatrixXf two(net.input_size(), 2);
  two << x, x;
  const Eigen::MatrixXf out = net.predict(two);
  EXPECT_EQ(out.col(0), out.col(1));
  EXPECT_TRUE(out.allFinite());
  EXPECT_EQ(net.predict(x), net.forward(x));
}

TEST(Adam, FirstStepMovesEachParameterByTheLearningRate) {
  Adam<double> opt(3, 0.01);
  Vec p = Vec::Zero(3);
  Vec g(3);
  g << 2.0, -0.5, 1e-3;
  opt.step(p, g);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_NEAR(p[2], -0.01, 1e-7);
}

TEST(SoftUpdate, BlendsWithTau) {
  Rng rng(7);
  Net a(ArchSpec::parse("in 1x1x2; dense 3")), b(a.arch());
  a.init(rng);
  b.init(rng);
  const Vec before = b.params();
  soft_update(b, a, 0.25);
  EXPECT_LT((b.params() - (0.25 * a.params() + 0.75 * before)).cwiseAbs().maxCoeff(), 1e-15);
}

Batch<double> one_transition(double r, bool terminal, int in = 1) {
  Batch<double> b;
  b.states = Mat::Constant(in, 1, 0.5);
  b.next_states = Mat::Constant(in, 1, -0.5);
  b.actions = {1};
  b.rewards = Vec::Constant(1, r);
  b.terminal = Vec::Constant(1, terminal ? 1.0 : 0.0);
  return b;
}

// Outputs (10, 3) for every input.
Net constant_target() {
  Net t(ArchSpec::parse("in 1x1x1; dense 2"));
  t.params() << 0.0, 0.0, 10.0, 3.0;
  return t;
}

TEST(DqnTargets, BellmanArithmetic) {
  const Net t = constant_target();
  EXPECT_NEAR(dqn_targets(t, one_transition(7.5, false), 0.99)[0], 17.4, 1e-12);
  EXPECT_EQ(dqn_targets(t, one_transition(100.0, true), 0.99)[0], 100.0);
}

TEST(DqnUpdate, RepeatedUpdatesReachTheTargetAndLeaveTargetNetAlone) {
  Rng rng(8);
  Net q(ArchSpec::parse("in 1x1x1; dense 8; relu; dense 2"));
  q.init(rng);
  const Net target = constant_target();
  const Vec frozen = target.params();
  Adam<double> opt(q.num_params(), 1e-2);
  const Batch<double> b = one_transition(7.5, false);
  for (int i = 0; i < 3000; ++i) dqn_update(q, opt, target, b, 0.99);
  EXPECT_NEAR(q.predict(b.states)(1, 0), 17.4, 1e-3);
  EXPECT_TRUE(target.params() == frozen);
}

TEST(DqnLoss, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  Net q(ArchSpec::parse("in 1x1x4; dense 10; tanh; dense 3"));
  Net target(q.arch());
  q.init(rng);
  target.init(rng);
  Batch<double> b;
  b.states = random_mat(rng, 4, 6);
  b.next_states = random_mat(rng, 4, 6);
  b.actions = {0, 2, 1, 1, 0, 2};
  b.rewards = random_mat(rng, 6, 1, 5.0);
  b.terminal = Vec::Zero(6);
  b.terminal[2] = 1.0;
  dqn_loss_grad(q, target, b, 0.9);
  const Vec analytic = q.grad();
  const Vec numeric = numeric_grad(q.params(), [&] {
    Net probe = q;
    return dqn_loss_grad(probe, target, b, 0.9);
  });
  EXPECT_LT(rel_error(analytic, numeric), 1e-4);
}

TEST(EpsilonGreedy, GreedyAndTies) {
  Rng rng(1);
  Vec q(4);
  q << 1.0, 3.0, 3.0, -2.0;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 1);
  EXPECT_THROW(epsilon_greedy(q, 1.5, rng), Error);
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  Rng rng(12);
  const Vec q = Vec::Zero(6);
  std::vector<int> counts(6, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(epsilon_greedy(q, 1.0, rng))];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  EXPECT_LT(chi2, 15.086);  // chi-square, 5 degrees of freedom, p = 0.01
}

// Critic Q(s, a) = -|a - a*|_1 built from two dense layers; the state is
// ignored.
Net l1_critic(const Eigen::Vector2d& best) {
  Net c(ArchSpec::parse("in 1x1x2; dense 4; relu; dense 1; side 2 0"));
  c.params().setZero();
  Eigen::Map<Mat> w(c.params().data(), 4, 4);
  w(0, 2) = 1;
  w(1, 3) = 1;
  w(2, 2) = -1;
  w(3, 3) = -1;
  Eigen::Map<Vec> b(c.params().data() + 16, 4);
  b << -best[0], -best[1], best[0], best[1];
  Eigen::Map<Vec> w2(c.params().data() + 20, 4);
  w2.setConstant(-1.0);
  return c;
}

TEST(PolicyGradient, PointsTowardTheCriticOptimum) {
  const Eigen::Vector2d best(0.3, -0.6);
  Net critic = l1_critic(best);
  Net actor(ArchSpec::parse("in 1x1x2; dense 2"));
  Rng rng(13);
  actor.init(rng);
  const Mat s = random_mat(rng, 2, 8);
  actor_policy_gradient(actor, critic, s);
  const Vec g = actor.grad();

  // Bias gradient of -J is the mean of sign(a - a*).
  const Mat a = actor.predict(s);
  for (int k = 0; k < 2; ++k) {
    double expected = 0.0;
    for (int j = 0; j < 8; ++j) expected += (a(k, j) > best[k] ? 1.0 : -1.0) / 8.0;
    EXPECT_NEAR(g[4 + k], expected, 1e-12);
  }
  auto gap = [&](const Net& n) { return (n.predict(s).colwise() - best).cwiseAbs().sum(); };
  Net stepped = actor;
  stepped.params() -= 1e-3 * g;
  EXPECT_LT(gap(stepped), gap(actor));
}

TEST(PolicyGradient, VanishesWhenTheActorOutputsTheOptimum) {
  const Eigen::Vector2d best(0.3, -0.6);
  Net critic = l1_critic(best);
  Net actor(ArchSpec::parse("in 1x1x2; dense 2"));
  actor.params() << 0, 0, 0, 0, best[0], best[1];
  Rng rng(14);
  actor_policy_gradient(actor, critic, random_mat(rng, 2, 5));
  EXPECT_EQ(actor.grad().cwiseAbs().maxCoeff(), 0.0);
}

TEST(PolicyGradient, ChainProductMatchesFiniteDifferences) {
  Rng rng(15);
  const ArchSpec trunk = ArchSpec::mlp_trunk({1, 1, 3}, {8});
  Net actor(actor_network(trunk, 2)), critic(critic_network(trunk, 2));
  actor.init(rng);
  critic.init(rng);
  const Mat s = random_mat(rng, 3, 5);
  actor_policy_gradient(actor, critic, s);
  const Vec analytic = actor.grad();
  const Vec numeric = numeric_grad(actor.params(), [&] {
    const Mat a = actor.predict(s);
    return -critic.predict(s, &a).mean();
  });
  EXPECT_LT(rel_error(analytic, numeric), 1e-4);
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
  Rng rng(16);
  const ArchSpec trunk = ArchSpec::mlp_trunk({1, 1, 3}, {8});
  Net actor(actor_network(trunk, 2)), critic(critic_network(trunk, 2));
  actor.init(rng);
  critic.init(rng);
  const Net ta = actor, tc = critic;
  Batch<double> b;
  b.states = random_mat(rng, 3, 4);
  b.next_states = random_mat(rng, 3, 4);
  b.actions_c = random_mat(rng, 2, 4);
  b.rewards = random_mat(rng, 4, 1);
  b.terminal = Vec::Zero(4);
  critic_loss_grad(critic, ta, tc, b, 0.95);
  const Vec analytic = critic.grad();
  const Vec numeric = numeric_grad(critic.params(), [&] {
    Net probe = critic;
    return critic_loss_grad(probe, ta, tc, b, 0.95);
  });
  EXPECT_LT(rel_error(analytic, numeric), 1e-4);
}

TEST(DdpgUpdate, TargetsMoveOnlyBySoftBlend) {
  Rng rng(17);
  const ArchSpec trunk = ArchSpec::mlp_trunk({1, 1, 3}, {8});
  Net actor(actor_network(trunk, 2)), critic(critic_network(trunk, 2));
  actor.init(rng);
  critic.init(rng);
  Net ta = actor, tc = critic;
  ta.init(rng);
  tc.init(rng);
  Adam<double> ao(actor.num_params(), 1e-3), co(critic.num_params(), 1e-3);
  Batch<double> b;
  b.states = random_mat(rng, 3, 4);
  b.next_states = random_mat(rng, 3, 4);
  b.actions_c = random_mat(rng, 2, 4);
  b.rewards = random_mat(rng, 4, 1);
  b.terminal = Vec::Zero(4);
  const Vec ta0 = ta.params(), tc0 = tc.params();
  ddpg_update(actor, critic, ta, tc, ao, co, b, 0.9, 0.005);
  EXPECT_LT((ta.params() - (0.005 * actor.params() + 0.995 * ta0)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((tc.params() - (0.005 * critic.params() + 0.995 * tc0)).cwiseAbs().maxCoeff(), 1e-14);
}

State level_state(int channels, int size, int seed) {
  State s{channels, 1, size, {}};
  for (int i = 0; i < channels * size; ++i) s.data.push_back(static_cast<float>((seed * 7 + i) % 256) / 255.0f);
  return s;
}

TEST(ReplayBuffer, NeverExceedsCapacityAndOverwritesOldest) {
  ReplayBuffer rb(5, {2, 1, 3});
  for (int i = 0; i < 8; ++i) rb.add(level_state(2, 3, i), i % 3, {}, i, level_state(2, 3, i + 1), i == 7);
  EXPECT_EQ(rb.size(), 5u);
  std::vector<std::size_t> all{0, 1, 2, 3, 4};
  const Batch<float> b = rb.batch(all);
  std::set<float> rewards(b.rewards.data(), b.rewards.data() + 5);
  EXPECT_EQ(rewards, (std::set<float>{3, 4, 5, 6, 7}));
  for (int j = 0; j < 5; ++j) {
    const int i = static_cast<int>(b.rewards[j]);
    const State s = level_state(2, 3, i);
    for (int k = 0; k < 6; ++k) EXPECT_EQ(b.states(k, j), s.data[static_cast<std::size_t>(k)]);
    EXPECT_EQ(b.terminal[j], i == 7 ? 1.0f : 0.0f);
    EXPECT_EQ(b.actions[static_cast<std::size_t>(j)], i % 3);
  }
}

TEST(ReplayBuffer, SharesIdenticalFrames) {
  ReplayBuffer rb(10, {3, 1, 4});
  const State s = level_state(3, 4, 1);
  State same_frames{3, 1, 4, {}};
  for (int c = 0; c < 3; ++c) same_frames.data.insert(same_frames.data.end(), s.data.begin(), s.data.begin() + 4);
  rb.add(same_frames, 0, {}, 0, same_frames, false);
  EXPECT_EQ(rb.pool().live_frames(), 1u);
}

TEST(ReplayBuffer, SamplingIsReproducibleAndSerializable) {
  ReplayBuffer rb(20, {2, 1, 3});
  for (int i = 0; i < 30; ++i) {
    rb.add(level_state(2, 3, i), i % 6, Eigen::VectorXf::Constant(3, 0.1f * i), -i, level_state(2, 3, i + 2), false);
  }
  Rng a(3), b(3);
  EXPECT_EQ(rb.sample_indices(16, a), rb.sample_indices(16, b));
  std::stringstream buf;
  rb.write(buf);
  const ReplayBuffer back = ReplayBuffer::read(buf);
  Rng c(4), d(4);
  const Batch<float> x = rb.sample(8, c), y = back.sample(8, d);
  EXPECT_EQ(x.states, y.states);
  EXPECT_EQ(x.next_states, y.next_states);
  EXPECT_EQ(x.actions, y.actions);
  EXPECT_EQ(x.actions_c, y.actions_c);
  EXPECT_EQ(x.rewards, y.rewards);
}

TEST(EncodeLevel, RoundsAndClamps) {
  EXPECT_EQ(encode_level(0.0f), 0);
  EXPECT_EQ(encode_level(1.0f), 255);
  EXPECT_EQ(encode_level(128.0f / 255.0f), 128);
  EXPECT_EQ(encode_level(2.0f), 255);
  EXPECT_EQ(encode_level(-1.0f), 0);
}

TrainConfig chain_config(std::uint64_t seed) {
  TrainConfig c;
  c.architecture = "mlp:32";
  c.gamma = 0.9;
  c.lr = 1e-3;
  c.warmup_steps = 200;
  c.eps_decay_steps = 4000;
  c.target_sync = 100;
  c.update_every = 1;
  c.replay_capacity = 10000;
  c.total_steps = 6000;
  c.seed = seed;
  return c;
}

int greedy(const Agent& a, int s) { return a.greedy_action(testing::ChainEnv::observe(s)); }

TEST(Trainer, LearnsTheOptimalChainPolicy) {
  testing::ChainEnv env;
  Trainer t(env, chain_config(0));
  t.train();
  const auto q = testing::ChainEnv::optimal_q(0.9);
  for (int s = 0; s < 4; ++s) {
    const int best = static_cast<int>(std::max_element(q[s].begin(), q[s].end()) - q[s].begin());
    EXPECT_EQ(greedy(t.agent(), s), best) << "state " << s;
  }
  EXPECT_EQ(t.curve().size(), static_cast<std::size_t>(t.episodes()));
  EXPECT_EQ(t.curve().back().total_steps, t.total_steps());
  EXPECT_EQ(t.total_steps(), 6000);
}

TEST(Trainer, ResumedRunMatchesAnUninterruptedRun) {
  TrainConfig cfg = chain_config(5);
  cfg.total_steps = 1500;
  testing::ChainEnv env_a;
  Trainer full(env_a, cfg);
  full.train();

  // Stop at an episode boundary, checkpoint, and continue elsewhere.
  const long cut = full.curve()[full.curve().size() / 2].total_steps;
  cfg.total_steps = cut;
  testing::ChainEnv env_b;
  Trainer first(env_b, cfg);
  first.train();
  std::stringstream ckpt;
  first.save_checkpoint(ckpt);

  testing::ChainEnv env_c;
  Trainer resumed(env_c, ckpt);
  resumed.set_total_steps(1500);
  resumed.train();
  ASSERT_EQ(resumed.curve().size(), full.curve().size());
  for (std::size_t i = 0; i < full.curve().size(); ++i) {
    EXPECT_EQ(resumed.curve()[i].episode_return, full.curve()[i].episode_return) << i;
    EXPECT_EQ(resumed.curve()[i].total_steps, full.curve()[i].total_steps) << i;
  }
  EXPECT_TRUE(resumed.agent().net.params() == full.agent().net.params());
  EXPECT_TRUE(resumed.agent().target.params() == full.agent().target.params());
}

// Chain whose rewards are NaN.
class PoisonedChain final : public Environment {
 public:
  std::array<int, 3> state_shape() const override { return inner_.state_shape(); }
  int num_actions() const override { return inner_.num_actions(); }
  State reset() override { return inner_.reset(); }
  StepOutcome step(int a) override {
    StepOutcome o = inner_.step(a);
    o.reward = std::nan("");
    return o;
  }

 private:
  testing::ChainEnv inner_;
};

TEST(Trainer, NonFiniteLossAbortsWithDiagnosticCheckpoint) {
  const auto dir = std::filesystem::temp_directory_path() / "nbv_test_poisoned";
  std::filesystem::remove_all(dir);
  TrainConfig cfg = chain_config(1);
  cfg.checkpoint_path = dir / "ckpt.bin";
  cfg.warmup_steps = 40;
  PoisonedChain env;
  Trainer t(env, cfg);
  EXPECT_THROW(t.train(), Error);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt.bin.diag"));
  std::filesystem::remove_all(dir);
}

TEST(Trainer, ValidatorKeepsBestAndStopsEarly) {
  TrainConfig cfg = chain_config(2);
  cfg.validate_every = 5;
  cfg.stop_score = 3.0;
  testing::ChainEnv env;
  Trainer t(env, cfg);
  int calls = 0;
  t.set_validator([&](const Agent&) { return static_cast<double>(++calls); });
  t.train();
  EXPECT_TRUE(t.stopped_early());
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(*t.best_score(), 3.0);
  EXPECT_LT(t.total_steps(), cfg.total_steps);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = chain_config(9);
  c.stop_score = -7.0;
  c.checkpoint_path = "out/x.ckpt";
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_TRUE(back.checkpoint_path.empty());
  TrainConfig bad;
  bad.gamma = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.algorithm = "ppo";
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(make_trunk("mlp:4,x", {1, 1, 5}), ConfigError);
  EXPECT_THROW(make_trunk("resnet", {1, 1, 5}), ConfigError);
}

// One-step bandit with a continuous action; reward peaks at a = 0.5.
class ContinuousBandit final : public Environment {
 public:
  std::array<int, 3> state_shape() const override { return {1, 1, 2}; }
  int num_actions() const override { return 0; }
  int action_dim() const override { return 1; }
  State reset() override { return State{1, 1, 2, {1.0f, 0.0f}}; }
  StepOutcome step(int) override { throw Error("discrete action"); }
  StepOutcome step(const Eigen::VectorXd& a) override {
    StepOutcome o;
    o.reward = -4.0 * (a[0] - 0.5) * (a[0] - 0.5);
    o.done = o.terminal = true;
    o.state = reset();
    return o;
  }
};

TEST(Trainer, DdpgFindsTheBanditOptimum) {
  TrainConfig cfg;
  cfg.algorithm = "ddpg";
  cfg.architecture = "mlp:16";
  cfg.lr = 1e-3;
  cfg.warmup_steps = 100;
  cfg.update_every = 1;
  cfg.total_steps = 2500;
  cfg.tau_soft = 0.05;
  ContinuousBandit env;
  Trainer t(env, cfg);
  t.train();
  const double a = t.agent().policy_action(env.reset())[0];
  EXPECT_NEAR(a, 0.5, 0.1);
}

std::shared_ptr<const ScanTarget> house_target() {
  static const auto t = make_target(generate_house(testing::reference_house()), EnvConfig{}, "reference");
  return t;
}

TEST(Evaluate, DeterministicAndCountsEveryEpisode) {
  EnvConfig cfg;
  cfg.max_steps = 4;
  ScanEnv env(cfg, {house_target(), house_target()});
  Rng rng(1);
  const Agent agent = Agent::make_dqn(make_trunk("default", env.state_shape()), 6, 1e-4, rng);
  const EvalMetrics a = evaluate(agent, env, {0, 1}, 2);
  const EvalMetrics b = evaluate(agent, env, {0, 1}, 2);
  EXPECT_EQ(a.episodes, 4u);
  EXPECT_EQ(a.solved_ratio, static_cast<double>(a.solved) / 4.0);
  EXPECT_EQ(a.median_steps, b.median_steps);
  EXPECT_EQ(a.median_distance, b.median_distance);
  EXPECT_EQ(a.coverage_curve, b.coverage_curve);
  for (std::size_t t = 1; t < a.coverage_curve.size(); ++t) EXPECT_GE(a.coverage_curve[t], a.coverage_curve[t - 1]);
}

TEST(Evaluate, ArchitectureMismatchIsAnError) {
  EnvConfig cfg;
  cfg.max_steps = 2;
  ScanEnv env(cfg, {house_target()});
  Rng rng(1);
  const Agent chain_agent = Agent::make_dqn(make_trunk("mlp:8", {1, 1, 5}), 3, 1e-4, rng);
  EXPECT_THROW(evaluate(chain_agent, env, {0}), Error);
}

TEST(AgentFiles, LoadFromCheckpointOrBareFile) {
  const auto dir = std::filesystem::temp_directory_path() / "nbv_test_agent_files";
  std::filesystem::remove_all(dir);
  TrainConfig cfg = chain_config(4);
  cfg.total_steps = 300;
  cfg.checkpoint_path = dir / "run.ckpt";
  testing::ChainEnv env;
  Trainer t(env, cfg);
  t.train();
  const Agent from_ckpt = load_agent(dir / "run.ckpt");
  save_agent(t.agent(), dir / "agent.bin");
  const Agent bare = load_agent(dir / "agent.bin");
  EXPECT_TRUE(from_ckpt.net.params() == t.agent().net.params());
  EXPECT_TRUE(bare.net.params() == t.agent().net.params());
  EXPECT_TRUE(bare.opt.m == t.agent().opt.m);
  std::ofstream(dir / "junk.bin") << "garbage";
  EXPECT_THROW(load_agent(dir / "junk.bin"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Median, OddEvenEmpty) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(median({}), 0.0);
}

}  // namespace
}  // namespace nbv::learn
