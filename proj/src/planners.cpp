#include "nbv/planners.hpp"

#include <algorithm>
#include <cmath>

#include "nbv/error.hpp"

namespace nbv {

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kCirc1: return "circ1";
    case PlannerKind::kCirc2: return "circ2";
    case PlannerKind::kCirc3: return "circ3";
    case PlannerKind::kRandom: return "random";
  }
  return "?";
}

PlannerKind parse_planner_kind(const std::string& s) {
  if (s == "circ1") return PlannerKind::kCirc1;
  if (s == "circ2") return PlannerKind::kCirc2;
  if (s == "circ3") return PlannerKind::kCirc3;
  if (s == "random") return PlannerKind::kRandom;
  throw ConfigError("unknown planner '" + s + "' (expected circ1, circ2, circ3 or random)");
}

namespace {

int nearest_level(const std::vector<double>& levels, double value) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(levels.size()); ++i) {
    if (std::abs(levels[i] - value) < std::abs(levels[best] - value)) best = i;
  }
  return best;
}

void move_phi(std::vector<int>& plan, int& level, int target) {
  for (; level < target; ++level) plan.push_back(static_cast<int>(Action::kPhiUp));
  for (; level > target; --level) plan.push_back(static_cast<int>(Action::kPhiDown));
}

}  // namespace

std::vector<int> plan_actions(PlannerKind kind, const PoseLimits& limits, const SphericalPose& start) {
  limits.validate();
  if (kind == PlannerKind::kRandom) throw Error("plan_actions: the random planner has no fixed plan");
  if (!limits.contains(start)) throw Error("plan_actions: start pose outside the pose limits");

  const std::vector<double> phis = limits.phi_levels();
  const std::vector<double> psis = limits.psi_levels();
  const int top = static_cast<int>(phis.size()) - 1;
  int level = nearest_level(phis, start.phi);
  int dist = nearest_level(psis, start.psi);

  std::vector<int> rings;
  std::vector<int> plan;
  auto move_in = [&] {
    for (; dist > 0; --dist) plan.push_back(static_cast<int>(Action::kPsiDown));
  };
  switch (kind) {
    case PlannerKind::kCirc1:
      move_phi(plan, level, top);
      move_in();
      for (int l = top; l >= 0; --l) rings.push_back(l);
      break;
    case PlannerKind::kCirc2:
      move_in();
      rings.push_back(level);
      for (int l = 0; l <= top; ++l) {
        if (l != level) rings.push_back(l);
      }
      break;
    case PlannerKind::kCirc3:
      move_phi(plan, level, 0);
      move_in();
      for (int l = 0; l <= top; ++l) rings.push_back(l);
      break;
    case PlannerKind::kRandom:
      break;
  }

  const int bins = limits.azimuth_bins();
  for (std::size_t r = 0; r < rings.size(); ++r) {
    move_phi(plan, level, rings[r]);
    const int sweep = r + 1 < rings.size() ? bins : bins - 1;
    plan.insert(plan.end(), sweep, static_cast<int>(Action::kThetaUp));
  }
  return plan;
}

std::vector<PoseUpdate> simulate_plan(const std::vector<int>& plan, const PoseLimits& limits,
                                      const SphericalPose& start) {
  std::vector<PoseUpdate> out;
  out.reserve(plan.size());
  SphericalPose pose = start;
  for (int a : plan) {
    out.push_back(apply_discrete_action(pose, a, limits));
    pose = out.back().pose;
  }
  return out;
}

EpisodeLog run_planner(ScanEnv& env, const std::vector<int>& plan) {
  if (env.done()) throw Error("run_planner: environment must be freshly reset");
  for (int a : plan) {
    if (env.step(a).done) break;
  }
  return env.log();
}

EpisodeLog run_random(ScanEnv& env, std::uint64_t seed) {
  if (env.done()) throw Error("run_random: environment must be freshly reset");
  Rng rng(seed);
  while (!env.step(static_cast<int>(rng.uniform_int(kNumDiscreteActions))).done) {
  }
  return env.log();
}

}  // namespace nbv
