#pragma once

// Structured multi-armed bandit prediction study: random decomposable reward
// functions, minimalist tabular-style predictors, supervised training, and
// RMS evaluation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hyperq/action_space.hpp"
#include "hyperq/hypergraph.hpp"
#include "hyperq/nn.hpp"
#include "hyperq/rng.hpp"
#include "hyperq/value_model.hpp"

namespace hyperq::bandit {

struct RewardGenConfig {
  /// Values for order-c hyperedges are uniform in +-order1_half_range / 2^(c-1)
  /// (10, 5, 2.5 for orders 1..3).
  double order1_half_range = 10.0;
  std::vector<std::size_t> mixer_hidden_choices{1, 2, 3, 4, 5};
  std::vector<nn::Activation> mixer_activations{std::begin(nn::kAllActivations),
                                                std::end(nn::kAllActivations)};
  double mixer_weight_range = 1.0;

  double half_range(std::size_t order) const;
};

struct RandomMixer {
  nn::DenseNetworkSpec spec;  // N^e -> hidden (sampled activation) -> 1 linear
  std::vector<double> params;
};

struct GeneratedBandit {
  ActionSpace space;
  std::uint64_t seed = 0;
  std::vector<double> rewards;  // by flat action
  // The generator's own decomposition.
  Hypergraph hypergraph;
  std::vector<std::vector<double>> block_values;
  RandomMixer mixer;
};

/// Deterministic in (space, gen_config, seed).
GeneratedBandit generate_bandit(const ActionSpace& space, const RewardGenConfig& gen_config,
                                std::uint64_t seed);

/// Reward table obtained by mixing each action's gathered block values.
std::vector<double> mix_rewards(const ActionSpace& space, const Hypergraph& h,
                                const std::vector<std::vector<double>>& block_values,
                                const RandomMixer& mixer);

/// Rebuilds the generator's decomposition as a value model (tabular blocks,
/// universal mixer with the sampled width and activation).
HypergraphQModel generator_model(const GeneratedBandit& bandit);

double individual_lr(double effective_lr, std::size_t n_edges);

struct PredictorSpec {
  bool baseline = false;  // one parameter per action
  std::size_t rank = 1;
  MixerKind mixer = MixerKind::summation;

  /// "baseline", "r2-sum", "r3-uni", ...
  std::string label() const;
  static PredictorSpec parse(std::string_view label);
  friend bool operator==(const PredictorSpec&, const PredictorSpec&) = default;
};

/// The seven variants of the study, baseline first.
std::vector<PredictorSpec> default_variants();

struct PredictionTrainConfig {
  std::size_t minibatch = 32;
  std::size_t updates_per_iteration = 100;
  std::size_t iterations = 400;
  double effective_lr = 0.0007;
  std::size_t seeds = 64;
  std::size_t universal_hidden = 10;
  /// Tables of universal-mixer predictors start uniform in +-this; zero tables
  /// would leave every rectifier of a zero-bias mixer inactive.
  double universal_table_init = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct Predictor {
  PredictorSpec spec;
  HypergraphQModel model;
  nn::AdamState adam;
  std::vector<double> grad;
  HypergraphQModel::Workspace ws;
};

/// Builds and initializes a predictor; baseline and summation tables start at 0.
Predictor make_predictor(const PredictorSpec& spec, const ActionSpace& space,
                         const PredictionTrainConfig& config, Rng& rng);

/// `updates_per_iteration` Adam steps on minibatches sampled with replacement,
/// mean-squared error, learning rate individual_lr(effective_lr, |H|).
void train_iteration(Predictor& p, const GeneratedBandit& bandit,
                     const PredictionTrainConfig& config, Rng& rng);

double rms_error(const HypergraphQModel& model, const GeneratedBandit& bandit);
double rms_error(Predictor& p, const GeneratedBandit& bandit);

struct TrialCurve {
  std::string variant;
  std::size_t size = 0;   // sub-actions per dimension
  std::size_t seed = 0;   // trial index
  std::vector<double> rms;         // iterations 0..N; entry 0 is before training
  std::vector<double> normalized;  // rms / rms[0]
};

struct SummaryRow {
  std::string variant;
  std::size_t size = 0;
  std::size_t n = 0;
  double mean_final = 0.0;
  double std_final = 0.0;  // sample standard deviation
  double sem_final = 0.0;
};

struct StudyConfig {
  std::vector<std::size_t> sizes{5, 10, 20};
  std::size_t dims = 3;
  std::vector<PredictorSpec> variants = default_variants();
  PredictionTrainConfig train;
  RewardGenConfig gen;
  std::uint64_t master_seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency
};

struct StudyResult {
  std::vector<TrialCurve> trials;  // ordered by (size, variant, seed)
  std::vector<SummaryRow> summary;  // ordered by (size, variant)
};

std::uint64_t bandit_seed(std::uint64_t master_seed, std::size_t trial);

TrialCurve run_trial(const PredictorSpec& spec, const GeneratedBandit& bandit, std::size_t size,
                     std::size_t trial, const StudyConfig& config);

StudyResult run_prediction_study(const StudyConfig& config,
                                 const std::function<void(std::size_t, std::size_t)>& progress = {});

std::vector<SummaryRow> summarize(const std::vector<TrialCurve>& trials,
                                  const std::vector<PredictorSpec>& variants,
                                  const std::vector<std::size_t>& sizes);

}  // namespace hyperq::bandit
