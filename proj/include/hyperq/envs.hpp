#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperq/action_space.hpp"
#include "hyperq/rng.hpp"

namespace hyperq::envs {

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminal = false;  // genuine end of the task
  bool timeout = false;   // time limit hit without termination
};

/// Episodic environment over a multi-dimensional discrete action space.
/// `step` throws `usage` before `reset` or after the episode has ended.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string name() const = 0;
  virtual std::size_t observation_width() const = 0;
  virtual const ActionSpace& action_space() const = 0;
  virtual std::size_t time_limit() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(FlatActionIndex a) = 0;
};

/// Environment with a box-bounded continuous action vector.
class ContinuousEnvironment {
 public:
  virtual ~ContinuousEnvironment() = default;
  virtual std::string name() const = 0;
  virtual std::size_t observation_width() const = 0;
  virtual std::size_t action_dims() const = 0;
  virtual double action_low(std::size_t dim) const = 0;
  virtual double action_high(std::size_t dim) const = 0;
  virtual std::size_t time_limit() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::span<const double> action) = 0;
};

/// Sub-action k of K maps to low + k (high - low) / (K - 1).
double discretize_sub_action(double low, double high, std::size_t bins, std::size_t k);

/// Exposes a continuous environment through `bins` sub-actions per dimension.
class DiscretizerWrapper : public Environment {
 public:
  DiscretizerWrapper(std::unique_ptr<ContinuousEnvironment> inner, std::size_t bins);

  std::string name() const override { return inner_->name(); }
  std::size_t observation_width() const override { return inner_->observation_width(); }
  const ActionSpace& action_space() const override { return space_; }
  std::size_t time_limit() const override { return inner_->time_limit(); }
  std::vector<double> reset() override { return inner_->reset(); }
  StepResult step(FlatActionIndex a) override;

  std::vector<double> discretize_action(std::span<const std::size_t> a) const;
  std::size_t bins() const { return bins_; }
  const ContinuousEnvironment& inner() const { return *inner_; }

 private:
  std::unique_ptr<ContinuousEnvironment> inner_;
  std::size_t bins_;
  ActionSpace space_;
};

/// d-dimensional bandit-like chain: a hidden target tuple, per-step reward
/// (1/d) * #matching sub-actions, observation {1 - t/T}. With early
/// termination a full match ends the episode.
class DecomposableChain : public Environment {
 public:
  DecomposableChain(std::size_t dims, std::size_t bins, std::size_t horizon, std::uint64_t seed,
                    bool early_termination = false);

  std::string name() const override { return "chain"; }
  std::size_t observation_width() const override { return 1; }
  const ActionSpace& action_space() const override { return space_; }
  std::size_t time_limit() const override { return horizon_; }
  std::vector<double> reset() override;
  StepResult step(FlatActionIndex a) override;

  const ActionTuple& target() const { return target_; }
  bool early_termination() const { return early_termination_; }

 private:
  std::vector<double> observe() const;

  ActionSpace space_;
  std::size_t horizon_;
  bool early_termination_;
  ActionTuple target_;
  std::size_t t_ = 0;
  bool running_ = false;
};

struct PointMassParams {
  std::size_t horizon = 200;
  double dt = 0.05;
  double max_speed = 2.0;
  double arena = 1.0;       // positions clamped to [-arena, arena]; velocity zeroed at walls
  double start_range = 0.5;  // start position drawn from [-start_range, start_range]^2
};

/// 2-D double integrator. Per-axis force in [-1, 1], explicit Euler
/// (x += v dt, then v += f dt, |v| <= max_speed), goal at the origin,
/// reward -(|x| + |y|) of the next state. Start positions lie on the grid
/// reachable with the discretized forces so the dynamic-programming oracle
/// is exact.
class PointMass : public ContinuousEnvironment {
 public:
  PointMass(std::uint64_t seed, std::size_t grid_bins, PointMassParams params = {});

  std::string name() const override { return "pointmass"; }
  std::size_t observation_width() const override { return 4; }
  std::size_t action_dims() const override { return 2; }
  double action_low(std::size_t) const override { return -1.0; }
  double action_high(std::size_t) const override { return 1.0; }
  std::size_t time_limit() const override { return params_.horizon; }
  std::vector<double> reset() override;
  StepResult step(std::span<const double> action) override;

  const PointMassParams& params() const { return params_; }
  /// Start position in grid units per axis.
  std::pair<long, long> start_cells() const { return start_; }
  double position_unit() const { return position_unit_; }

 private:
  PointMassParams params_;
  double position_unit_;
  std::pair<long, long> start_;
  double x_ = 0, y_ = 0, vx_ = 0, vy_ = 0;
  std::size_t t_ = 0;
  bool running_ = false;
};

/// Exact finite-horizon dynamic programming for one point-mass axis on the
/// integer grid induced by the discretized forces.
class PointMassAxisDp {
 public:
  PointMassAxisDp(std::size_t bins, const PointMassParams& params, bool store_policy);

  /// Optimal sum of -|x| rewards over the horizon from rest at `start_cell`.
  double value(long start_cell) const;
  /// Optimal sub-action at step t from (position cell, velocity cell).
  std::size_t action(std::size_t t, long x_cell, long v_cell) const;
  double position_unit() const { return x_unit_; }
  double velocity_unit() const { return v_unit_; }

 private:
  std::size_t index(long x, long v) const {
    return static_cast<std::size_t>(x + nx_) * static_cast<std::size_t>(2 * nv_ + 1) +
           static_cast<std::size_t>(v + nv_);
  }

  std::size_t horizon_;
  long nx_, nv_;
  std::vector<long> dv_;  // velocity change of each sub-action, in cells
  double x_unit_, v_unit_;
  std::vector<double> v0_;  // value at t = 0
  std::vector<std::uint8_t> policy_;
};

struct EnvSpec {
  std::string kind = "chain";  // chain | pointmass
  std::size_t dims = 4;
  std::size_t bins = 5;
  std::size_t horizon = 20;
  bool early_termination = false;
  std::uint64_t seed = 0;
};

std::unique_ptr<Environment> make_env(const EnvSpec& spec);

/// Exact optimal undiscounted return for built-ins; nullopt otherwise.
std::optional<double> optimal_return(const EnvSpec& spec);

}  // namespace hyperq::envs
