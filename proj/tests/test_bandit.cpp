#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hyperq/bandit.hpp"
#include "hyperq/error.hpp"

using namespace hyperq;
using namespace hyperq::bandit;

namespace {

// Mixer evaluated by hand from the row-major layout: hidden = act(W1 r + b1), out = W2 h + b2.
double hand_mixer(const RandomMixer& mix, const std::vector<double>& r) {
  const auto& sz = mix.spec.layer_sizes;
  const std::size_t in = sz[0], hid = sz[1];
  const auto& p = mix.params;
  double out = p[in * hid + hid + hid];
  for (std::size_t h = 0; h < hid; ++h) {
    double z = p[in * hid + h];
    for (std::size_t i = 0; i < in; ++i) z += p[h * in + i] * r[i];
    out += p[in * hid + hid + h] * nn::activate(mix.spec.activations[0], z);
  }
  return out;
}

}  // namespace

TEST(RewardGen, HalfRangeHalvesPerOrder) {
  RewardGenConfig g;
  EXPECT_EQ(g.half_range(1), 10.0);
  EXPECT_EQ(g.half_range(2), 5.0);
  EXPECT_EQ(g.half_range(3), 2.5);
}

TEST(RewardGen, GeneratedBanditRespectsRanges) {
  const ActionSpace space({5, 5, 5});
  RewardGenConfig g;
  std::set<std::size_t> widths;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto b = generate_bandit(space, g, seed);
    ASSERT_EQ(b.hypergraph, rank_hypergraph(3, 3));
    ASSERT_EQ(b.rewards.size(), 125u);
    for (std::size_t j = 0; j < b.hypergraph.n_edges(); ++j) {
      const double r = g.half_range(b.hypergraph.edge(j).order());
      ASSERT_EQ(b.block_values[j].size(), edge_output_count(b.hypergraph.edge(j), space));
      for (double v : b.block_values[j]) {
        EXPECT_LE(std::abs(v), r);
      }
    }
    const auto& sz = b.mixer.spec.layer_sizes;
    ASSERT_EQ(sz.size(), 3u);
    EXPECT_EQ(sz[0], 7u);
    EXPECT_EQ(sz[2], 1u);
    widths.insert(sz[1]);
    EXPECT_GE(sz[1], 1u);
    EXPECT_LE(sz[1], 5u);
    EXPECT_EQ(b.mixer.spec.activations[1], nn::Activation::linear);
    for (double w : b.mixer.params) EXPECT_LE(std::abs(w), 1.0);
  }
  EXPECT_GT(widths.size(), 2u);
}

TEST(RewardGen, DeterministicPerSeed) {
  const ActionSpace space({4, 4, 4});
  const auto a = generate_bandit(space, {}, 9);
  const auto b = generate_bandit(space, {}, 9);
  const auto c = generate_bandit(space, {}, 10);
  EXPECT_EQ(a.rewards, b.rewards);
  EXPECT_NE(a.rewards, c.rewards);
}

TEST(RewardGen, RewardsAreTheMixedBlockValues) {
  const ActionSpace space({3, 4, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto b = generate_bandit(space, {}, seed);
    for (std::size_t a = 0; a < space.total_size(); ++a) {
      const auto t = flat_to_tuple(space, a);
      std::vector<double> rep;
      for (std::size_t j = 0; j < b.hypergraph.n_edges(); ++j) {
        rep.push_back(b.block_values[j][edge_local_index(b.hypergraph.edge(j), space, t)]);
      }
      EXPECT_NEAR(b.rewards[a], hand_mixer(b.mixer, rep), 1e-12);
    }
    const auto remixed = mix_rewards(space, b.hypergraph, b.block_values, b.mixer);
    for (std::size_t a = 0; a < space.total_size(); ++a) EXPECT_NEAR(remixed[a], b.rewards[a], 1e-12);
    const auto model = generator_model(b);
    const auto q = model.q_values_all(std::span<const double>{});
    for (std::size_t a = 0; a < space.total_size(); ++a) EXPECT_NEAR(q[a], b.rewards[a], 1e-12);
    EXPECT_NEAR(rms_error(model, b), 0.0, 1e-12);
  }
}

TEST(Predictors, IndividualLearningRate) {
  EXPECT_DOUBLE_EQ(individual_lr(0.0007, 1), 0.0007);
  EXPECT_DOUBLE_EQ(individual_lr(0.0007, 7), 0.0001);
  EXPECT_THROW(individual_lr(0.0007, 0), Error);
}

TEST(Predictors, LabelsRoundTrip) {
  const auto v = default_variants();
  ASSERT_EQ(v.size(), 7u);
  EXPECT_TRUE(v.front().baseline);
  std::vector<std::string> labels;
  for (const auto& s : v) {
    labels.push_back(s.label());
    EXPECT_EQ(PredictorSpec::parse(s.label()), s);
  }
  EXPECT_EQ(labels, (std::vector<std::string>{"baseline", "r1-sum", "r2-sum", "r3-sum", "r1-uni", "r2-uni",
                                              "r3-uni"}));
  EXPECT_THROW(PredictorSpec::parse("r0-sum"), Error);
  EXPECT_THROW(PredictorSpec::parse("r2-max"), Error);
}

TEST(Predictors, ParameterCounts) {
  const ActionSpace space({5, 5, 5});
  PredictionTrainConfig cfg;
  Rng rng(1);
  EXPECT_EQ(make_predictor(PredictorSpec::parse("baseline"), space, cfg, rng).model.param_count(), 125u);
  EXPECT_EQ(make_predictor(PredictorSpec::parse("r1-sum"), space, cfg, rng).model.param_count(), 15u);
  EXPECT_EQ(make_predictor(PredictorSpec::parse("r2-sum"), space, cfg, rng).model.param_count(), 15u + 75u);
  EXPECT_EQ(make_predictor(PredictorSpec::parse("r3-sum"), space, cfg, rng).model.param_count(), 15u + 75u + 125u);
  // Universal mixer: 7 inputs -> 10 -> 1.
  EXPECT_EQ(make_predictor(PredictorSpec::parse("r3-uni"), space, cfg, rng).model.param_count(),
            215u + 7u * 10 + 10 + 10 + 1);
  const auto p = make_predictor(PredictorSpec::parse("r3-uni"), space, cfg, rng);
  EXPECT_DOUBLE_EQ(p.adam.config.learning_rate, 0.0001);
}

TEST(Predictors, FirstAdamStepMovesSampledEntriesByLearningRate) {
  const ActionSpace space({3, 3});
  const auto b = generate_bandit(space, {}, 4);
  PredictionTrainConfig cfg;
  cfg.updates_per_iteration = 1;
  Rng init(0), sample(1);
  auto p = make_predictor(PredictorSpec::parse("baseline"), space, cfg, init);
  train_iteration(p, b, cfg, sample);
  const auto table = p.model.block_table(0);
  for (std::size_t a = 0; a < space.total_size(); ++a) {
    if (table[a] == 0.0) continue;
    // Zero start, so the gradient sign is -sign(reward) and the first bias-corrected step has size lr.
    EXPECT_NEAR(table[a], std::copysign(cfg.effective_lr, b.rewards[a]), 1e-9);
  }
}

TEST(Predictors, TrainingReducesError) {
  const ActionSpace space({5, 5, 5});
  const auto b = generate_bandit(space, {}, 2);
  PredictionTrainConfig cfg;
  for (const auto& spec : default_variants()) {
    Rng init(3), sample(4);
    auto p = make_predictor(spec, space, cfg, init);
    const double before = rms_error(p, b);
    for (int it = 0; it < 30; ++it) train_iteration(p, b, cfg, sample);
    EXPECT_LT(rms_error(p, b), before) << spec.label();
  }
}

TEST(Predictors, RmsErrorMatchesDefinition) {
  const ActionSpace space({2, 3});
  const auto b = generate_bandit(space, {}, 5);
  Rng rng(6);
  auto p = make_predictor(PredictorSpec::parse("r2-sum"), space, {}, rng);
  for (auto& v : p.model.params().values()) v = rng.uniform(-1, 1);
  double ss = 0;
  for (std::size_t a = 0; a < space.total_size(); ++a) {
    const double d = p.model.q_value({}, flat_to_tuple(space, a)) - b.rewards[a];
    ss += d * d;
  }
  EXPECT_NEAR(rms_error(p, b), std::sqrt(ss / 6), 1e-12);
}

TEST(Study, SmallRunIsDeterministicAndSummariesMatch) {
  StudyConfig cfg;
  cfg.sizes = {3, 4};
  cfg.train.seeds = 3;
  cfg.train.iterations = 4;
  cfg.train.updates_per_iteration = 10;
  cfg.variants = {PredictorSpec::parse("baseline"), PredictorSpec::parse("r2-uni")};
  cfg.master_seed = 77;
  cfg.workers = 2;
  const auto a = run_prediction_study(cfg);
  cfg.workers = 1;
  const auto b = run_prediction_study(cfg);
  ASSERT_EQ(a.trials.size(), 2u * 2 * 3);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].rms, b.trials[i].rms);
    EXPECT_EQ(a.trials[i].rms.size(), 5u);
    EXPECT_EQ(a.trials[i].normalized.front(), 1.0);
  }
  // Trials are ordered by size, then variant, then seed.
  EXPECT_EQ(a.trials[0].size, 3u);
  EXPECT_EQ(a.trials[0].variant, "baseline");
  EXPECT_EQ(a.trials[3].variant, "r2-uni");
  EXPECT_EQ(a.trials[6].size, 4u);
  ASSERT_EQ(a.summary.size(), 4u);
  for (const auto& row : a.summary) {
    std::vector<double> finals;
    for (const auto& t : a.trials) {
      if (t.size == row.size && t.variant == row.variant) finals.push_back(t.rms.back());
    }
    double mean = 0;
    for (double f : finals) mean += f;
    mean /= finals.size();
    double var = 0;
    for (double f : finals) var += (f - mean) * (f - mean);
    const double sd = std::sqrt(var / (finals.size() - 1));
    EXPECT_EQ(row.n, 3u);
    EXPECT_NEAR(row.mean_final, mean, 1e-12);
    EXPECT_NEAR(row.std_final, sd, 1e-12);
    EXPECT_NEAR(row.sem_final, sd / std::sqrt(3.0), 1e-12);
  }
}

TEST(Study, VariantsShareTheBanditOfTheirSeed) {
  StudyConfig cfg;
  cfg.sizes = {3};
  cfg.train.seeds = 2;
  cfg.train.iterations = 0;
  cfg.variants = {PredictorSpec::parse("baseline"), PredictorSpec::parse("r1-sum")};
  const auto res = run_prediction_study(cfg);
  // Zero-initialized summation predictors start from the same error on the same rewards.
  EXPECT_EQ(res.trials[0].rms[0], res.trials[2].rms[0]);
  EXPECT_EQ(res.trials[1].rms[0], res.trials[3].rms[0]);
  EXPECT_NE(res.trials[0].rms[0], res.trials[1].rms[0]);
}
