#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>

#include "nbv/env.hpp"
#include "nbv/learn/network.hpp"
#include "nbv/learn/replay.hpp"
#include "nbv/random.hpp"

namespace nbv::learn {

/// Uniform random action with probability eps, otherwise the argmax; ties go
/// to the lowest index.
int epsilon_greedy(const Eigen::VectorXd& q, double eps, Rng& rng);

/// y_j = r_j, or r_j + gamma * max_a Q_target(s'_j, a) when not terminal.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> dqn_targets(const Network<S>& target, const Batch<S>& batch, double gamma);

/// Mean squared Bellman error of `q` on the batch. Leaves its gradient in
/// q.grad(); neither network's parameters change.
template <typename S>
double dqn_loss_grad(Network<S>& q, const Network<S>& target, const Batch<S>& batch, double gamma);

/// One optimizer step on the Bellman error; `target` is left untouched.
template <typename S>
double dqn_update(Network<S>& q, Adam<S>& opt, const Network<S>& target, const Batch<S>& batch, double gamma);

/// Mean squared error of the critic against r + gamma * Q'(s', mu'(s')).
/// Leaves the gradient in critic.grad().
template <typename S>
double critic_loss_grad(Network<S>& critic, const Network<S>& target_actor, const Network<S>& target_critic,
                        const Batch<S>& batch, double gamma);

/// Sampled policy gradient: the gradient of -(1/N) sum_j Q(s_j, mu(s_j))
/// with respect to the actor parameters, formed as the chain product of the
/// critic's action gradient and the actor Jacobian. Returns the mean
/// Q(s, mu(s)); the gradient is left in actor.grad().
template <typename S>
double actor_policy_gradient(Network<S>& actor, Network<S>& critic,
                             const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& states);

struct DdpgLosses {
  double actor = 0.0;   // -mean Q(s, mu(s)) before the update
  double critic = 0.0;  // mean squared Bellman error before the update
};

/// Critic step, actor step, then soft target updates with rate tau.
template <typename S>
DdpgLosses ddpg_update(Network<S>& actor, Network<S>& critic, Network<S>& target_actor, Network<S>& target_critic,
                       Adam<S>& actor_opt, Adam<S>& critic_opt, const Batch<S>& batch, double gamma, double tau);

/// Networks and optimizer state of a DQN or DDPG learner.
///
/// DQN uses `net`/`target`/`opt` as the Q-network. DDPG uses them for the
/// actor and the critic_* members for the critic. DDPG actions are in
/// normalized units [-1, 1]; `action_scale` maps them to pose deltas.
struct Agent {
  std::string algorithm;  // "dqn" or "ddpg"
  Network<float> net;
  Network<float> target;
  Adam<float> opt;
  std::optional<Network<float>> critic;
  std::optional<Network<float>> critic_target;
  std::optional<Adam<float>> critic_opt;
  Eigen::VectorXd action_scale;

  static Agent make_dqn(const ArchSpec& trunk, int actions, double lr, Rng& rng);
  static Agent make_ddpg(const ArchSpec& trunk, const Eigen::VectorXd& action_scale, double lr, Rng& rng);

  bool discrete() const { return algorithm == "dqn"; }
  Eigen::VectorXd q_values(const State& s) const;
  /// Greedy discrete action.
  int greedy_action(const State& s) const;
  /// Deterministic continuous action in normalized units.
  Eigen::VectorXd policy_action(const State& s) const;

  void write(std::ostream& out) const;
  static Agent read(std::istream& in);
};

/// Flattens a State into a one-column batch.
Eigen::MatrixXf state_column(const State& s);

}  // namespace nbv::learn
