#include "hyperq/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hyperq/error.hpp"

namespace hyperq::envs {

double discretize_sub_action(double low, double high, std::size_t bins, std::size_t k) {
  if (bins < 2) throw Error(ErrorCode::range, "discretization needs at least 2 bins");
  if (k >= bins) throw Error(ErrorCode::invalid_action, "sub-action outside the grid");
  if (k == bins - 1) return high;
  return low + static_cast<double>(k) * (high - low) / static_cast<double>(bins - 1);
}

DiscretizerWrapper::DiscretizerWrapper(std::unique_ptr<ContinuousEnvironment> inner,
                                       std::size_t bins)
    : inner_(std::move(inner)),
      bins_(bins),
      space_(std::vector<std::size_t>(inner_->action_dims(), bins)) {
  if (bins < 2) throw Error(ErrorCode::range, "discretization needs at least 2 bins");
}

std::vector<double> DiscretizerWrapper::discretize_action(std::span<const std::size_t> a) const {
  if (!space_.contains(a)) throw Error(ErrorCode::invalid_action, "tuple not in action space");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = discretize_sub_action(inner_->action_low(i), inner_->action_high(i), bins_, a[i]);
  }
  return out;
}

StepResult DiscretizerWrapper::step(FlatActionIndex a) {
  const auto tuple = flat_to_tuple(space_, a);
  const auto action = discretize_action(tuple);
  return inner_->step(action);
}

DecomposableChain::DecomposableChain(std::size_t dims, std::size_t bins, std::size_t horizon,
                                     std::uint64_t seed, bool early_termination)
    : space_(std::vector<std::size_t>(dims, bins)),
      horizon_(horizon),
      early_termination_(early_termination) {
  if (horizon == 0) throw Error(ErrorCode::range, "horizon must be positive");
  Rng rng = Rng(seed).split("chain-target");
  target_.resize(dims);
  for (auto& t : target_) t = rng.uniform_index(bins);
}

std::vector<double> DecomposableChain::observe() const {
  return {1.0 - static_cast<double>(t_) / static_cast<double>(horizon_)};
}

std::vector<double> DecomposableChain::reset() {
  t_ = 0;
  running_ = true;
  return observe();
}

StepResult DecomposableChain::step(FlatActionIndex a) {
  if (!running_) throw Error(ErrorCode::usage, "step called on a finished or unstarted episode");
  const auto tuple = flat_to_tuple(space_, a);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) matches += tuple[i] == target_[i];
  ++t_;
  StepResult r;
  r.reward = static_cast<double>(matches) / static_cast<double>(tuple.size());
  r.terminal = early_termination_ && matches == tuple.size();
  r.timeout = !r.terminal && t_ >= horizon_;
  r.observation = observe();
  if (r.terminal || r.timeout) running_ = false;
  return r;
}

namespace {

// Velocity cell size for a force grid of `bins` values over [-1, 1].
double lattice_velocity_unit(std::size_t bins, double dt) {
  if (bins < 2) throw Error(ErrorCode::range, "point mass needs at least 2 force bins");
  const double k1 = static_cast<double>(bins - 1);
  const double force_unit = (bins - 1) % 2 == 0 ? 2.0 / k1 : 1.0 / k1;
  return force_unit * dt;
}

long cells(double extent, double unit, const char* what) {
  const double n = extent / unit;
  const long r = std::lround(n);
  if (std::abs(n - static_cast<double>(r)) > 1e-6) {
    throw Error(ErrorCode::config, std::string(what) + " is not a whole number of grid cells");
  }
  return r;
}

}  // namespace

PointMass::PointMass(std::uint64_t seed, std::size_t grid_bins, PointMassParams params)
    : params_(params) {
  position_unit_ = lattice_velocity_unit(grid_bins, params_.dt) * params_.dt;
  const long range = static_cast<long>(std::floor(params_.start_range / position_unit_));
  Rng rng = Rng(seed).split("pointmass-start");
  const auto width = static_cast<std::size_t>(2 * range + 1);
  start_.first = static_cast<long>(rng.uniform_index(width)) - range;
  start_.second = static_cast<long>(rng.uniform_index(width)) - range;
}

std::vector<double> PointMass::reset() {
  x_ = static_cast<double>(start_.first) * position_unit_;
  y_ = static_cast<double>(start_.second) * position_unit_;
  vx_ = vy_ = 0.0;
  t_ = 0;
  running_ = true;
  return {x_, y_, vx_, vy_};
}

StepResult PointMass::step(std::span<const double> action) {
  if (!running_) throw Error(ErrorCode::usage, "step called on a finished or unstarted episode");
  if (action.size() != 2) throw Error(ErrorCode::dimension, "point mass takes a 2-D force");
  auto axis = [&](double& x, double& v, double f) {
    f = std::clamp(f, -1.0, 1.0);
    double nx = x + v * params_.dt;
    double nv = std::clamp(v + f * params_.dt, -params_.max_speed, params_.max_speed);
    if (nx > params_.arena || nx < -params_.arena) {
      nx = std::clamp(nx, -params_.arena, params_.arena);
      nv = 0.0;
    }
    x = nx;
    v = nv;
  };
  axis(x_, vx_, action[0]);
  axis(y_, vy_, action[1]);
  ++t_;
  StepResult r;
  r.observation = {x_, y_, vx_, vy_};
  r.reward = -(std::abs(x_) + std::abs(y_));
  r.timeout = t_ >= params_.horizon;
  if (r.timeout) running_ = false;
  return r;
}

PointMassAxisDp::PointMassAxisDp(std::size_t bins, const PointMassParams& params,
                                 bool store_policy)
    : horizon_(params.horizon) {
  v_unit_ = lattice_velocity_unit(bins, params.dt);
  x_unit_ = v_unit_ * params.dt;
  nv_ = cells(params.max_speed, v_unit_, "max_speed");
  nx_ = cells(params.arena, x_unit_, "arena");
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(bins - 1);
    dv_.push_back(std::lround(f * params.dt / v_unit_));
  }
  const std::size_t n_states = static_cast<std::size_t>(2 * nx_ + 1) * static_cast<std::size_t>(2 * nv_ + 1);
  std::vector<double> next(n_states, 0.0), cur(n_states);
  if (store_policy) policy_.resize(n_states * horizon_);
  for (std::size_t t = horizon_; t-- > 0;) {
    for (long x = -nx_; x <= nx_; ++x) {
      for (long v = -nv_; v <= nv_; ++v) {
        double best = -std::numeric_limits<double>::infinity();
        std::uint8_t best_k = 0;
        for (std::size_t k = 0; k < dv_.size(); ++k) {
          long nx = x + v;
          long nv = std::clamp(v + dv_[k], -nv_, nv_);
          if (nx > nx_ || nx < -nx_) {
            nx = std::clamp(nx, -nx_, nx_);
            nv = 0;
          }
          const double q = -static_cast<double>(std::abs(nx)) * x_unit_ + next[index(nx, nv)];
          if (q > best) {
            best = q;
            best_k = static_cast<std::uint8_t>(k);
          }
        }
        cur[index(x, v)] = best;
        if (store_policy) policy_[t * n_states + index(x, v)] = best_k;
      }
    }
    next.swap(cur);
  }
  v0_ = std::move(next);
}

double PointMassAxisDp::value(long start_cell) const {
  if (start_cell < -nx_ || start_cell > nx_) throw Error(ErrorCode::range, "start outside arena");
  return v0_[index(start_cell, 0)];
}

std::size_t PointMassAxisDp::action(std::size_t t, long x_cell, long v_cell) const {
  if (policy_.empty()) throw Error(ErrorCode::usage, "policy was not stored");
  const std::size_t n_states = v0_.size();
  return policy_.at(t * n_states + index(x_cell, v_cell));
}

std::unique_ptr<Environment> make_env(const EnvSpec& spec) {
  if (spec.kind == "chain") {
    return std::make_unique<DecomposableChain>(spec.dims, spec.bins, spec.horizon, spec.seed,
                                               spec.early_termination);
  }
  if (spec.kind == "pointmass") {
    PointMassParams p;
    p.horizon = spec.horizon;
    return std::make_unique<DiscretizerWrapper>(std::make_unique<PointMass>(spec.seed, spec.bins, p),
                                                spec.bins);
  }
  throw Error(ErrorCode::config, "unknown environment '" + spec.kind + "'");
}

std::optional<double> optimal_return(const EnvSpec& spec) {
  if (spec.kind == "chain") {
    const double T = static_cast<double>(spec.horizon);
    if (!spec.early_termination) return T;
    // Best non-terminating reward (d-1)/d on every step but the last, then a full match.
    const double d = static_cast<double>(spec.dims);
    return (T - 1.0) * (d - 1.0) / d + 1.0;
  }
  if (spec.kind == "pointmass") {
    PointMassParams p;
    p.horizon = spec.horizon;
    PointMass env(spec.seed, spec.bins, p);
    PointMassAxisDp dp(spec.bins, p, false);
    const auto [sx, sy] = env.start_cells();
    return dp.value(sx) + dp.value(sy);
  }
  return std::nullopt;
}

}  // namespace hyperq::envs
