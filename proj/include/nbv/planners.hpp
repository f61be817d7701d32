#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nbv/camera.hpp"
#include "nbv/env.hpp"

namespace nbv {

enum class PlannerKind { kCirc1, kCirc2, kCirc3, kRandom };

std::string to_string(PlannerKind kind);
PlannerKind parse_planner_kind(const std::string& s);

/// Circular baseline plans at the closest distance.
///
/// circ1: up to the top elevation, in to the closest distance, then rings
/// top, middle, bottom. circ2: in first, then rings middle, bottom, top.
/// circ3: like circ1 starting from the bottom. Each ring is a +theta sweep;
/// all rings but the last return to their starting azimuth, where the
/// elevation change happens. Throws for kRandom or a start outside limits.
std::vector<int> plan_actions(PlannerKind kind, const PoseLimits& limits, const SphericalPose& start);

/// Plays `plan` from the current (freshly reset) episode until the episode
/// ends or the plan runs out.
EpisodeLog run_planner(ScanEnv& env, const std::vector<int>& plan);

/// Uniformly random discrete actions until the episode ends.
EpisodeLog run_random(ScanEnv& env, std::uint64_t seed);

/// Pose sequence visited by `plan` (excluding the start), without rendering.
std::vector<PoseUpdate> simulate_plan(const std::vector<int>& plan, const PoseLimits& limits,
                                      const SphericalPose& start);

}  // namespace nbv
