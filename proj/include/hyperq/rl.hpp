#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyperq/envs.hpp"
#include "hyperq/nn.hpp"
#include "hyperq/rng.hpp"
#include "hyperq/value_model.hpp"

namespace hyperq::rl {

struct Transition {
  std::vector<double> state;
  FlatActionIndex action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;  // genuine termination: no bootstrapping
  bool timeout = false;   // time limit: still bootstraps
};

/// Fixed-capacity FIFO ring; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Throws `usage` if both flags are set.
  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Uniform sampling with replacement.
  std::vector<const Transition*> sample(Rng& rng, std::size_t n) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

struct EpsilonSchedule {
  double initial = 1.0;
  double final = 0.05;
  std::size_t final_step = 50000;

  double at(std::size_t step) const;
};

struct AgentConfig {
  std::size_t minibatch = 64;
  std::size_t replay_capacity = 100000;
  std::size_t target_period = 2000;
  std::size_t update_frequency = 1;
  std::size_t warmup = 10000;
  double gamma = 0.99;
  nn::AdamConfig adam{1e-5, 0.9, 0.999, 0.0003125};
  EpsilonSchedule exploration;
  double eval_epsilon = 0.001;

  void check() const;
};

struct TabularQ {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double alpha = 0.1;
  std::vector<double> table;

  TabularQ(std::size_t states, std::size_t actions, double learning_rate);
  double& at(std::size_t s, std::size_t a) { return table[s * n_actions + a]; }
  double at(std::size_t s, std::size_t a) const { return table[s * n_actions + a]; }
  double max_value(std::size_t s) const;
};

struct TabularTransition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;
};

/// Q(s,a) += alpha (r + gamma max Q(s', .) - Q(s,a)), dropping the max on termination.
void tabular_q_update(TabularQ& q, const TabularTransition& t, double gamma);

/// DQN-style learner over any hypergraph value model. The target network is a
/// hard copy of the online model refreshed every `target_period` updates.
class Agent {
 public:
  Agent(HypergraphQModel model, AgentConfig config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  const HypergraphQModel& online() const { return online_; }
  HypergraphQModel& online() { return online_; }
  const HypergraphQModel& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::size_t env_steps() const { return env_steps_; }
  std::size_t updates() const { return updates_; }

  /// Evaluation draws come from their own stream so they never shift training.
  FlatActionIndex act(std::span<const double> state, double epsilon, bool evaluation = false);
  /// Exploration rate from the schedule at the current environment step.
  double current_epsilon() const { return config_.exploration.at(env_steps_); }

  std::vector<double> td_targets(std::span<const Transition* const> batch);
  /// Stores a transition and counts one environment step.
  void observe(Transition t);
  /// One minibatch Adam update; nullopt while the replay is below warmup.
  std::optional<double> train_step();
  void sync_target();

 private:
  AgentConfig config_;
  HypergraphQModel online_;
  HypergraphQModel target_;
  ReplayBuffer replay_;
  nn::AdamState adam_;
  std::vector<double> grads_;
  HypergraphQModel::Workspace online_ws_;
  HypergraphQModel::Workspace target_ws_;
  Rng explore_rng_;
  Rng replay_rng_;
  Rng eval_rng_;
  std::size_t env_steps_ = 0;
  std::size_t updates_ = 0;
};

struct EpisodeResult {
  double episode_return = 0.0;
  std::size_t steps = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
};

/// Runs one episode. Training mode follows the exploration schedule, stores
/// transitions and trains after warmup; evaluation mode acts with
/// `eval_epsilon` and leaves the agent's parameters alone. `max_steps` cuts
/// the episode short without marking the last transition as a timeout.
EpisodeResult run_episode(Agent& agent, envs::Environment& env, bool train,
                          std::size_t max_steps = static_cast<std::size_t>(-1));

}  // namespace hyperq::rl
