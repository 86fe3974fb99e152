#include "hyperq/rl.hpp"

#include <algorithm>
#include <cmath>

#include "hyperq/error.hpp"

namespace hyperq::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::config, "replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (t.terminal && t.timeout) {
    throw Error(ErrorCode::usage, "a transition cannot be both terminal and a timeout");
  }
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw Error(ErrorCode::range, "replay index out of range");
  if (data_.size() < capacity_) return data_[i];
  return data_[(cursor_ + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(Rng& rng, std::size_t n) const {
  if (data_.empty()) throw Error(ErrorCode::usage, "sampling from an empty replay buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &data_[rng.uniform_index(data_.size())];
  return out;
}

double EpsilonSchedule::at(std::size_t step) const {
  if (step >= final_step) return final;
  const double frac = static_cast<double>(step) / static_cast<double>(final_step);
  return initial + frac * (final - initial);
}

void AgentConfig::check() const {
  if (minibatch == 0 || replay_capacity == 0 || target_period == 0 || update_frequency == 0) {
    throw Error(ErrorCode::config, "agent periods and sizes must be positive");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::config, "gamma must lie in [0, 1]");
  if (!(adam.learning_rate > 0.0)) throw Error(ErrorCode::config, "learning rate must be positive");
}

TabularQ::TabularQ(std::size_t states, std::size_t actions, double learning_rate)
    : n_states(states), n_actions(actions), alpha(learning_rate), table(states * actions, 0.0) {
  if (states == 0 || actions == 0) throw Error(ErrorCode::config, "empty Q table");
}

double TabularQ::max_value(std::size_t s) const {
  const auto row = table.begin() + static_cast<std::ptrdiff_t>(s * n_actions);
  return *std::max_element(row, row + static_cast<std::ptrdiff_t>(n_actions));
}

void tabular_q_update(TabularQ& q, const TabularTransition& t, double gamma) {
  if (t.state >= q.n_states || t.next_state >= q.n_states || t.action >= q.n_actions) {
    throw Error(ErrorCode::invalid_index, "transition outside the Q table");
  }
  const double target = t.reward + (t.terminal ? 0.0 : gamma * q.max_value(t.next_state));
  double& entry = q.at(t.state, t.action);
  entry += q.alpha * (target - entry);
}

Agent::Agent(HypergraphQModel model, AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      online_(std::move(model)),
      target_(online_),
      replay_(config_.replay_capacity),
      adam_(config_.adam, online_.param_count()),
      grads_(online_.param_count(), 0.0),
      explore_rng_(Rng(seed).split("explore")),
      replay_rng_(Rng(seed).split("replay")),
      eval_rng_(Rng(seed).split("eval")) {
  config_.check();
}

FlatActionIndex Agent::act(std::span<const double> state, double epsilon, bool evaluation) {
  Rng& rng = evaluation ? eval_rng_ : explore_rng_;
  if (rng.uniform01() < epsilon) return rng.uniform_index(online_.space().total_size());
  online_.evaluate(state, online_ws_);
  return online_.greedy_action(online_ws_);
}

std::vector<double> Agent::td_targets(std::span<const Transition* const> batch) {
  if (batch.empty()) throw Error(ErrorCode::usage, "empty batch");
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    if (t.terminal) {
      y[i] = t.reward;
      continue;
    }
    target_.evaluate(t.next_state, target_ws_);
    const auto q = target_.q_values_all(target_ws_);
    y[i] = t.reward + config_.gamma * *std::max_element(q.begin(), q.end());
  }
  return y;
}

void Agent::observe(Transition t) {
  replay_.push(std::move(t));
  ++env_steps_;
}

std::optional<double> Agent::train_step() {
  if (replay_.size() < std::max<std::size_t>(config_.warmup, 1)) return std::nullopt;
  const auto batch = replay_.sample(replay_rng_, config_.minibatch);
  const auto y = td_targets(batch);
  std::fill(grads_.begin(), grads_.end(), 0.0);
  const double scale = 2.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    online_.evaluate(batch[i]->state, online_ws_);
    const double err = online_.q_value(online_ws_, batch[i]->action) - y[i];
    loss += err * err;
    online_.accumulate_gradient(online_ws_, batch[i]->action, scale * err, grads_);
  }
  nn::adam_step(adam_, online_.params().values(), grads_);
  ++updates_;
  if (updates_ % config_.target_period == 0) sync_target();
  return loss / static_cast<double>(batch.size());
}

void Agent::sync_target() {
  auto src = online_.params().values();
  std::copy(src.begin(), src.end(), target_.params().values().begin());
}

EpisodeResult run_episode(Agent& agent, envs::Environment& env, bool train,
                          std::size_t max_steps) {
  EpisodeResult result;
  std::vector<double> state = env.reset();
  while (result.steps < max_steps) {
    const double eps = train ? agent.current_epsilon() : agent.config().eval_epsilon;
    const FlatActionIndex a = agent.act(state, eps, !train);
    envs::StepResult r = env.step(a);
    result.episode_return += r.reward;
    ++result.steps;
    const bool done = r.terminal || r.timeout;
    if (train) {
      Transition t{state, a, r.reward, r.observation, r.terminal, r.timeout};
      agent.observe(std::move(t));
      if (agent.env_steps() % agent.config().update_frequency == 0) {
        if (auto loss = agent.train_step()) {
          result.loss_sum += *loss;
          ++result.loss_count;
        }
      }
    }
    if (done) break;
    state = std::move(r.observation);
  }
  return result;
}

}  // namespace hyperq::rl
