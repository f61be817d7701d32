#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include "nbv/env.hpp"
#include "nbv/geometry.hpp"
#include "nbv/housegen.hpp"

namespace nbv::testing {

/// Axis-aligned box with outward winding and shared vertices.
inline Mesh box_mesh(const Vec3& lo, const Vec3& hi, double albedo = 0.8) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  std::vector<Face> f = {
      {0, 2, 1}, {1, 2, 3},  // -z
      {4, 5, 6}, {5, 7, 6},  // +z
      {0, 1, 4}, {1, 5, 4},  // -y
      {2, 6, 3}, {3, 6, 7},  // +y
      {0, 4, 2}, {2, 4, 6},  // -x
      {1, 3, 5}, {3, 7, 5},  // +x
  };
  return Mesh(v, f, std::vector<double>(f.size(), albedo));
}

inline Mesh unit_cube() { return box_mesh(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)); }

/// Gabled two-storey house with a 5-unit overhang: the scaled single-house
/// target. Two storeys put the eaves above the lowest camera ring, so the
/// soffits are visible from some allowed poses.
inline HouseSpec reference_house() {
  HouseSpec spec;
  spec.roof_style = RoofStyle::kGabled;
  spec.roof_overhang = 5.0;
  spec.storeys = 2;
  spec.wall_height = 30.0;
  spec.roof_rise = 14.0;
  return spec;
}

/// Deterministic five-state chain. States 0..3 are live, 4 is the goal.
/// Actions: 0 left, 1 right, 2 cash out (terminal, pays cash[s]). Moving
/// costs 1; stepping right from state 3 reaches the goal and pays 10.
/// Observations are one-hot over the five states.
class ChainEnv final : public Environment {
 public:
  static constexpr int kStates = 5;
  static constexpr int kActions = 3;
  static constexpr std::array<double, 4> kCash{5.5, 0.0, 0.0, 8.0};
  static constexpr double kGoal = 10.0;
  static constexpr double kMove = -1.0;

  explicit ChainEnv(int max_steps = 20) : max_steps_(max_steps) {}

  std::array<int, 3> state_shape() const override { return {1, 1, kStates}; }
  int num_actions() const override { return kActions; }

  State reset() override {
    s_ = 0;
    t_ = 0;
    return observe(s_);
  }

  StepOutcome step(int a) override {
    StepOutcome out;
    ++t_;
    if (a == 2) {
      out.reward = kCash[static_cast<std::size_t>(s_)];
      out.terminal = true;
    } else if (a == 1 && s_ == 3) {
      s_ = 4;
      out.reward = kGoal;
      out.terminal = true;
    } else {
      s_ = a == 1 ? s_ + 1 : std::max(0, s_ - 1);
      out.reward = kMove;
    }
    out.done = out.terminal || t_ >= max_steps_;
    out.state = observe(s_);
    return out;
  }

  static State observe(int s) {
    State st{1, 1, kStates, std::vector<float>(kStates, 0.0f)};
    st.data[static_cast<std::size_t>(s)] = 1.0f;
    return st;
  }

  /// Optimal action values by value iteration, Q[s][a] for live states.
  static std::array<std::array<double, kActions>, 4> optimal_q(double gamma) {
    std::array<double, kStates> v{};
    std::array<std::array<double, kActions>, 4> q{};
    for (int it = 0; it < 1000; ++it) {
      for (int s = 0; s < 4; ++s) {
        q[s][0] = kMove + gamma * v[static_cast<std::size_t>(std::max(0, s - 1))];
        q[s][1] = s == 3 ? kGoal : kMove + gamma * v[static_cast<std::size_t>(s + 1)];
        q[s][2] = kCash[static_cast<std::size_t>(s)];
      }
      for (int s = 0; s < 4; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
    }
    return q;
  }

 private:
  int max_steps_;
  int s_ = 0;
  int t_ = 0;
};

}  // namespace nbv::testing
