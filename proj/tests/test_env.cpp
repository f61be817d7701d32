#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nbv/env.hpp"
#include "nbv/error.hpp"
#include "nbv/housegen.hpp"
#include "support.hpp"

namespace nbv {
namespace {

std::shared_ptr<const ScanTarget> house_target() {
  static const auto t = make_target(generate_house(testing::reference_house()), EnvConfig{}, "reference");
  return t;
}

EpisodeLog random_episode(ScanEnv& env, std::uint64_t seed, int max_steps) {
  Rng rng(seed);
  env.reset(0);
  for (int i = 0; i < max_steps && !env.done(); ++i) env.step(static_cast<int>(rng.uniform_int(6)));
  return env.log();
}

TEST(Preprocess, IdentityResizeStacksNewestFirst) {
  std::vector<GrayImage> frames;
  for (int c = 0; c < 6; ++c) {
    GrayImage f(84, 84);
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<float>((i * (c + 3)) % 256) / 255.0f;
    frames.push_back(f);
  }
  const State s = preprocess_frames(frames);
  ASSERT_EQ(s.channels, 6);
  for (int c = 0; c < 6; ++c) {
    for (int y = 0; y < 84; y += 11) {
      for (int x = 0; x < 84; x += 7) EXPECT_EQ(s.at(c, y, x), frames[c].at(x, y));
    }
  }
}

TEST(Preprocess, ConstantFrameStaysConstantAfterResize) {
  const std::vector<GrayImage> frames(6, GrayImage(168, 168, 0.5f));
  const State s = preprocess_frames(frames);
  for (float v : s.data) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Preprocess, SingleFrameGivesOneChannel) {
  const std::vector<GrayImage> frames(1, GrayImage(84, 84, 0.25f));
  EXPECT_EQ(preprocess_frames(frames).channels, 1);
  const std::vector<GrayImage> mixed{GrayImage(84, 84), GrayImage(80, 84)};
  EXPECT_THROW(preprocess_frames(mixed), Error);
}

TEST(Quantize8, RoundsToByteLevels) {
  GrayImage g(2, 1);
  g.data = {0.5f, 1.0f};
  const GrayImage q = quantize8(g);
  EXPECT_FLOAT_EQ(q.data[0], 128.0f / 255.0f);
  EXPECT_FLOAT_EQ(q.data[1], 1.0f);
}

TEST(StepReward, DirectEvaluation) {
  const RewardParams p;
  EXPECT_DOUBLE_EQ(step_reward(p, 10.0, 25.0), 7.5);
  EXPECT_DOUBLE_EQ(step_reward(p, 0.0, 0.0), -2.0);
}

TEST(PathLength, ChordAndRadialMoves) {
  EpisodeLog radial;
  radial.initial_pose = {0, 45, 125};
  StepRecord r;
  r.pose = {0, 45, 100};
  radial.records.push_back(r);
  EXPECT_NEAR(path_length(radial), 25.0, 1e-9);

  EpisodeLog chord;
  chord.initial_pose = {0, 45, 100};
  r.pose = {45, 45, 100};
  chord.records.push_back(r);
  const double expected = 2 * 100 * std::cos(M_PI / 4) * std::sin(M_PI / 8);
  EXPECT_NEAR(path_length(chord), expected, 1e-9);
  EXPECT_NEAR(path_length(chord), 54.12, 5e-3);

  EXPECT_EQ(path_length(EpisodeLog{}), 0.0);
}

TEST(ScanEnv, StateShapeAndInitialCoverage) {
  ScanEnv env(EnvConfig{}, {house_target()});
  const auto shape = env.state_shape();
  EXPECT_EQ(shape, (std::array<int, 3>{6, 84, 84}));
  const State s = env.reset(0);
  EXPECT_EQ(s.size(), 6u * 84 * 84);
  EXPECT_GT(env.coverage(), 0.0);
  for (int c = 1; c < 6; ++c) {
    for (int i = 0; i < 84 * 84; ++i) EXPECT_EQ(s.data[c * 84 * 84 + i], s.data[i]);
  }
}

TEST(ScanEnv, ResetIsDeterministic) {
  ScanEnv a(EnvConfig{}, {house_target()});
  ScanEnv b(EnvConfig{}, {house_target()});
  EXPECT_EQ(a.reset(0), b.reset(0));
  a.step(0);
  EXPECT_EQ(a.reset(0), b.reset(0));
}

TEST(ScanEnv, RewardIdentityAndMonotoneCoverage) {
  EnvConfig cfg;
  ScanEnv env(cfg, {house_target()});
  const EpisodeLog log = random_episode(env, 3, 50);
  double prev = log.initial_coverage;
  SphericalPose pose = log.initial_pose;
  for (const StepRecord& r : log.records) {
    EXPECT_GE(r.coverage, prev);
    const double dx = (pose_position(r.pose, env.target().center) - pose_position(pose, env.target().center)).norm();
    EXPECT_NEAR(r.dx, dx, 1e-9);
    if (r.coverage > cfg.reward.terminal_coverage) {
      EXPECT_EQ(r.reward, 100.0);
    } else {
      EXPECT_NEAR(r.reward, (r.coverage - prev) - 0.02 * r.dx - 2.0, 1e-9);
    }
    prev = r.coverage;
    pose = r.pose;
  }
  EXPECT_NEAR(log.distance, path_length(log), 1e-9);
}

TEST(ScanEnv, ClampedNoOpCostsTheStepPenalty) {
  EnvConfig cfg;
  cfg.initial_pose = SphericalPose{0, 80, 125};
  ScanEnv env(cfg, {house_target()});
  env.reset(0);
  const auto out = env.step(static_cast<int>(Action::kPhiUp));
  EXPECT_TRUE(env.log().records.back().clamped);
  EXPECT_EQ(env.log().records.back().dx, 0.0);
  EXPECT_DOUBLE_EQ(out.reward, -2.0);
}

TEST(ScanEnv, TerminalStepPaysBonusOnce) {
  ScanEnv probe(EnvConfig{}, {house_target()});
  probe.reset(0);
  const double c0 = probe.coverage();
  probe.step(static_cast<int>(Action::kThetaUp));
  const double c1 = probe.coverage();
  ASSERT_GT(c1, c0);

  EnvConfig cfg;
  cfg.reward.terminal_coverage = 0.5 * (c0 + c1);
  ScanEnv env(cfg, {house_target()});
  env.reset(0);
  const auto out = env.step(static_cast<int>(Action::kThetaUp));
  EXPECT_EQ(out.reward, 100.0);
  EXPECT_TRUE(out.done);
  EXPECT_TRUE(out.terminal);
  EXPECT_TRUE(env.log().solved);
  EXPECT_THROW(env.step(0), Error);
}

TEST(ScanEnv, TruncationIsNotTerminal) {
  EnvConfig cfg;
  cfg.max_steps = 3;
  ScanEnv env(cfg, {house_target()});
  env.reset(0);
  StepOutcome out;
  for (int i = 0; i < 3; ++i) out = env.step(static_cast<int>(Action::kPhiUp));
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.terminal);
  EXPECT_FALSE(env.log().solved);
  EXPECT_EQ(env.log().steps, 3);
}

TEST(ScanEnv, SameActionsGiveIdenticalLogs) {
  ScanEnv a(EnvConfig{}, {house_target()});
  ScanEnv b(EnvConfig{}, {house_target()});
  std::ostringstream la, lb;
  random_episode(a, 9, 12).write_jsonl(la);
  random_episode(b, 9, 12).write_jsonl(lb);
  EXPECT_EQ(la.str(), lb.str());
}

TEST(ScanEnv, ContinuousActionsAreClippedAndLogged) {
  ScanEnv env(EnvConfig{}, {house_target()});
  env.reset(0);
  env.step(Eigen::VectorXd(Eigen::Vector3d(90, -10, -30)));
  const StepRecord& r = env.log().records.back();
  EXPECT_EQ(r.action, -1);
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.pose.theta, 45.0);
  EXPECT_EQ(r.pose.phi, 35.0);
  EXPECT_EQ(r.pose.psi, 100.0);
  EXPECT_THROW(env.step(Eigen::VectorXd(Eigen::Vector2d(1, 1))), Error);
}

TEST(ScanEnv, RandomizedStartUsesAzimuthBins) {
  EnvConfig cfg;
  cfg.randomize_initial_azimuth = true;
  ScanEnv env(cfg, {house_target()});
  for (int i = 0; i < 5; ++i) {
    env.reset();
    EXPECT_EQ(std::fmod(env.pose().theta, 45.0), 0.0);
  }
}

TEST(ScanEnv, ConfigErrors) {
  EXPECT_THROW(ScanEnv(EnvConfig{}, {}), ConfigError);
  EnvConfig bad;
  bad.max_steps = 0;
  EXPECT_THROW(ScanEnv(bad, {house_target()}), ConfigError);
  bad = {};
  bad.initial_pose = SphericalPose{0, 45, 300};
  EXPECT_THROW(bad.validate(), ConfigError);
  // A bounding sphere reaching the closest orbit.
  const Mesh big = testing::box_mesh(Vec3(-80, -80, 0), Vec3(80, 80, 60));
  EXPECT_THROW(make_target(big, EnvConfig{}), ConfigError);
}

TEST(ScanEnv, UnderRoofSetExistsForOverhangs) {
  const auto idx = under_roof_points(*house_target());
  EXPECT_FALSE(idx.empty());
  for (std::size_t i : idx) EXPECT_LT(house_target()->gt_normals[i].z(), -0.1);
}

TEST(EpisodeLog, JsonlRoundTrip) {
  ScanEnv env(EnvConfig{}, {house_target()});
  const EpisodeLog log = random_episode(env, 4, 6);
  std::stringstream buf;
  log.write_jsonl(buf);
  const EpisodeLog back = EpisodeLog::read_jsonl(buf);
  std::ostringstream again;
  back.write_jsonl(again);
  EXPECT_EQ(again.str(), buf.str());
  EXPECT_EQ(back.steps, log.steps);
  EXPECT_EQ(back.records.size(), log.records.size());

  std::istringstream truncated("{\"t\":1}\n");
  EXPECT_THROW(EpisodeLog::read_jsonl(truncated), FormatError);
}

TEST(CoverageCurve, CarriesFinalCoverageForward) {
  EpisodeLog a, b;
  StepRecord r;
  for (double c : {10.0, 20.0, 30.0}) {
    r.coverage = c;
    a.records.push_back(r);
  }
  r.coverage = 50.0;
  b.records.push_back(r);
  const std::vector<EpisodeLog> one{a};
  EXPECT_EQ(coverage_curve(one), (std::vector<double>{10, 20, 30}));
  const std::vector<EpisodeLog> same{a, a};
  EXPECT_EQ(coverage_curve(same), coverage_curve(one));
  const std::vector<EpisodeLog> both{a, b};
  EXPECT_EQ(coverage_curve(both), (std::vector<double>{30, 35, 40}));
  EXPECT_THROW(coverage_curve(std::span<const EpisodeLog>{}), Error);
}

}  // namespace
}  // namespace nbv
