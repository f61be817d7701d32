#include "nbv/learn/agents.hpp"

#include "nbv/binary_io.hpp"
#include "nbv/error.hpp"

namespace nbv::learn {

int epsilon_greedy(const Eigen::VectorXd& q, double eps, Rng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error("epsilon_greedy: epsilon outside [0, 1]");
  if (q.size() == 0) throw Error("epsilon_greedy: no actions");
  if (eps > 0.0 && rng.uniform() < eps) return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(q.size())));
  int best = 0;
  for (int a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> dqn_targets(const Network<S>& target, const Batch<S>& batch, double gamma) {
  const auto qn = target.predict(batch.next_states);
  Eigen::Matrix<S, Eigen::Dynamic, 1> y(batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    const S boot = batch.terminal[j] > S(0) ? S(0) : static_cast<S>(gamma) * qn.col(j).maxCoeff();
    y[j] = batch.rewards[j] + boot;
  }
  return y;
}

template <typename S>
double dqn_loss_grad(Network<S>& q, const Network<S>& target, const Batch<S>& batch, double gamma) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw Error("dqn update: empty batch");
  const auto y = dqn_targets(target, batch, gamma);
  const auto out = q.forward(batch.states);
  typename Network<S>::Mat d = Network<S>::Mat::Zero(out.rows(), n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = batch.actions.at(static_cast<std::size_t>(j));
    if (a < 0 || a >= out.rows()) throw Error("dqn update: action out of range");
    const S diff = out(a, j) - y[j];
    loss += static_cast<double>(diff) * static_cast<double>(diff);
    d(a, j) = S(2) * diff / static_cast<S>(n);
  }
  q.backward(d);
  return loss / static_cast<double>(n);
}

template <typename S>
double dqn_update(Network<S>& q, Adam<S>& opt, const Network<S>& target, const Batch<S>& batch, double gamma) {
  const double loss = dqn_loss_grad(q, target, batch, gamma);
  opt.step(q.params(), q.grad());
  return loss;
}

template <typename S>
double critic_loss_grad(Network<S>& critic, const Network<S>& target_actor, const Network<S>& target_critic,
                        const Batch<S>& batch, double gamma) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw Error("ddpg update: empty batch");
  const auto a_next = target_actor.predict(batch.next_states);
  const auto q_next = target_critic.predict(batch.next_states, &a_next);
  const auto q = critic.forward(batch.states, &batch.actions_c);
  typename Network<S>::Mat d(1, n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const S boot = batch.terminal[j] > S(0) ? S(0) : static_cast<S>(gamma) * q_next(0, j);
    const S diff = q(0, j) - (batch.rewards[j] + boot);
    loss += static_cast<double>(diff) * static_cast<double>(diff);
    d(0, j) = S(2) * diff / static_cast<S>(n);
  }
  critic.backward(d);
  return loss / static_cast<double>(n);
}

template <typename S>
double actor_policy_gradient(Network<S>& actor, Network<S>& critic,
                             const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& states) {
  const Eigen::Index n = states.cols();
  if (n == 0) throw Error("policy gradient: empty batch");
  const auto a = actor.forward(states);
  const auto q = critic.forward(states, &a);
  const typename Network<S>::Mat d = Network<S>::Mat::Constant(1, n, S(-1) / static_cast<S>(n));
  critic.backward(d);
  actor.backward(critic.side_grad());
  return static_cast<double>(q.mean());
}

template <typename S>
DdpgLosses ddpg_update(Network<S>& actor, Network<S>& critic, Network<S>& target_actor, Network<S>& target_critic,
                       Adam<S>& actor_opt, Adam<S>& critic_opt, const Batch<S>& batch, double gamma, double tau) {
  DdpgLosses out;
  out.critic = critic_loss_grad(critic, target_actor, target_critic, batch, gamma);
  critic_opt.step(critic.params(), critic.grad());
  out.actor = -actor_policy_gradient(actor, critic, batch.states);
  actor_opt.step(actor.params(), actor.grad());
  soft_update(target_critic, critic, tau);
  soft_update(target_actor, actor, tau);
  return out;
}

#define NBV_INSTANTIATE(S)                                                                                        \
  template Eigen::Matrix<S, Eigen::Dynamic, 1> dqn_targets(const Network<S>&, const Batch<S>&, double);          \
  template double dqn_loss_grad(Network<S>&, const Network<S>&, const Batch<S>&, double);                         \
  template double dqn_update(Network<S>&, Adam<S>&, const Network<S>&, const Batch<S>&, double);                  \
  template double critic_loss_grad(Network<S>&, const Network<S>&, const Network<S>&, const Batch<S>&, double);   \
  template double actor_policy_gradient(Network<S>&, Network<S>&,                                                 \
                                        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&);                 \
  template DdpgLosses ddpg_update(Network<S>&, Network<S>&, Network<S>&, Network<S>&, Adam<S>&, Adam<S>&,         \
                                  const Batch<S>&, double, double);
NBV_INSTANTIATE(float)
NBV_INSTANTIATE(double)
#undef NBV_INSTANTIATE

Eigen::MatrixXf state_column(const State& s) {
  return Eigen::Map<const Eigen::MatrixXf>(s.data.data(), static_cast<Eigen::Index>(s.data.size()), 1);
}

Agent Agent::make_dqn(const ArchSpec& trunk, int actions, double lr, Rng& rng) {
  Network<float> q(q_network(trunk, actions));
  q.init(rng);
  Agent a{"dqn", q, q, Adam<float>(q.num_params(), lr), std::nullopt, std::nullopt, std::nullopt, {}};
  return a;
}

Agent Agent::make_ddpg(const ArchSpec& trunk, const Eigen::VectorXd& action_scale, double lr, Rng& rng) {
  const int dim = static_cast<int>(action_scale.size());
  Network<float> actor(actor_network(trunk, dim));
  actor.init(rng, 3e-3);
  Network<float> critic(critic_network(trunk, dim));
  critic.init(rng, 3e-3);
  Agent a{"ddpg", actor, actor, Adam<float>(actor.num_params(), lr), critic, critic,
          Adam<float>(critic.num_params(), lr), action_scale};
  return a;
}

Eigen::VectorXd Agent::q_values(const State& s) const {
  if (!discrete()) throw Error("agent: q_values needs a discrete agent");
  return net.predict(state_column(s)).col(0).cast<double>();
}

int Agent::greedy_action(const State& s) const {
  Rng unused(0);
  return epsilon_greedy(q_values(s), 0.0, unused);
}

Eigen::VectorXd Agent::policy_action(const State& s) const {
  if (discrete()) throw Error("agent: policy_action needs a continuous agent");
  return net.predict(state_column(s)).col(0).cast<double>();
}

namespace {

constexpr char kAgentMagic[8] = {'N', 'B', 'V', 'A', 'G', 'N', 'T', '1'};

void write_net(std::ostream& out, const Network<float>& n) {
  bin::put_string(out, n.arch().describe());
  bin::put_vector(out, n.params().data(), n.num_params());
}

Network<float> read_net(std::istream& in) {
  Network<float> n(ArchSpec::parse(bin::get_string(in, 1 << 16)));
  const auto p = bin::get_vector<float>(in);
  if (p.size() != n.num_params()) throw FormatError("agent: parameter count does not match the architecture", 0);
  n.params() = Eigen::Map<const Eigen::VectorXf>(p.data(), static_cast<Eigen::Index>(p.size()));
  return n;
}

void write_adam(std::ostream& out, const Adam<float>& a) {
  bin::put<double>(out, a.lr);
  bin::put<double>(out, a.beta1);
  bin::put<double>(out, a.beta2);
  bin::put<double>(out, a.eps);
  bin::put<std::uint64_t>(out, a.t);
  bin::put_vector(out, a.m.data(), static_cast<std::size_t>(a.m.size()));
  bin::put_vector(out, a.v.data(), static_cast<std::size_t>(a.v.size()));
}

Adam<float> read_adam(std::istream& in, std::size_t n) {
  Adam<float> a(n);
  a.lr = bin::get<double>(in);
  a.beta1 = bin::get<double>(in);
  a.beta2 = bin::get<double>(in);
  a.eps = bin::get<double>(in);
  a.t = bin::get<std::uint64_t>(in);
  const auto m = bin::get_vector<float>(in);
  const auto v = bin::get_vector<float>(in);
  if (m.size() != n || v.size() != n) throw FormatError("agent: optimizer state size mismatch", 0);
  a.m = Eigen::Map<const Eigen::VectorXf>(m.data(), static_cast<Eigen::Index>(n));
  a.v = Eigen::Map<const Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(n));
  return a;
}

}  // namespace

void Agent::write(std::ostream& out) const {
  out.write(kAgentMagic, 8);
  bin::put_string(out, algorithm);
  write_net(out, net);
  write_net(out, target);
  write_adam(out, opt);
  bin::put_vector(out, action_scale.data(), static_cast<std::size_t>(action_scale.size()));
  if (!discrete()) {
    write_net(out, *critic);
    write_net(out, *critic_target);
    write_adam(out, *critic_opt);
  }
}

Agent Agent::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kAgentMagic, 8)) {
    throw FormatError("agent: bad magic", 0);
  }
  const std::string algorithm = bin::get_string(in, 64);
  if (algorithm != "dqn" && algorithm != "ddpg") throw FormatError("agent: unknown algorithm '" + algorithm + "'", 0);
  Network<float> net = read_net(in);
  Network<float> target = read_net(in);
  if (!(net.arch() == target.arch())) throw FormatError("agent: target architecture differs", 0);
  Adam<float> opt = read_adam(in, net.num_params());
  const auto scale = bin::get_vector<double>(in, 64);
  Agent a{algorithm, net, target, opt, std::nullopt, std::nullopt, std::nullopt,
          Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()))};
  if (algorithm == "ddpg") {
    a.critic = read_net(in);
    a.critic_target = read_net(in);
    a.critic_opt = read_adam(in, a.critic->num_params());
  }
  return a;
}

}  // namespace nbv::learn
