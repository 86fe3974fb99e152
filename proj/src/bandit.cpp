#include "hyperq/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <numeric>

#include "hyperq/error.hpp"
#include "hyperq/parallel.hpp"

namespace hyperq::bandit {

double RewardGenConfig::half_range(std::size_t order) const {
  return order1_half_range / std::ldexp(1.0, static_cast<int>(order) - 1);
}

namespace {

Rng space_stream(const ActionSpace& space, std::uint64_t seed) {
  Rng rng = Rng(seed).split("bandit");
  for (std::size_t c : space.cardinalities()) rng = rng.split(c);
  return rng.split(space.n_vertices());
}

}  // namespace

GeneratedBandit generate_bandit(const ActionSpace& space, const RewardGenConfig& gen_config,
                                std::uint64_t seed) {
  GeneratedBandit b;
  b.space = space;
  b.seed = seed;
  b.hypergraph = rank_hypergraph(space.n_vertices(), space.n_vertices());
  Rng root = space_stream(space, seed);

  Rng values = root.split("values");
  for (std::size_t j = 0; j < b.hypergraph.n_edges(); ++j) {
    const auto& e = b.hypergraph.edge(j);
    const double r = gen_config.half_range(e.order());
    Rng edge_rng = values.split(j);
    b.block_values.push_back(nn::uniform_init(edge_rng, -r, r, edge_output_count(e, space)));
  }

  Rng mixer_rng = root.split("mixer");
  const auto& hidden_choices = gen_config.mixer_hidden_choices;
  const auto& act_choices = gen_config.mixer_activations;
  if (hidden_choices.empty() || act_choices.empty()) {
    throw Error(ErrorCode::config, "reward generator needs hidden-width and activation choices");
  }
  const std::size_t hidden = hidden_choices[mixer_rng.uniform_index(hidden_choices.size())];
  const nn::Activation act = act_choices[mixer_rng.uniform_index(act_choices.size())];
  b.mixer.spec.layer_sizes = {b.hypergraph.n_edges(), hidden, 1};
  b.mixer.spec.activations = {act, nn::Activation::linear};
  const double w = gen_config.mixer_weight_range;
  b.mixer.params = nn::uniform_init(mixer_rng, -w, w, b.mixer.spec.param_count());

  b.rewards = mix_rewards(space, b.hypergraph, b.block_values, b.mixer);
  return b;
}

std::vector<double> mix_rewards(const ActionSpace& space, const Hypergraph& h,
                                const std::vector<std::vector<double>>& block_values,
                                const RandomMixer& mixer) {
  std::vector<double> rewards(space.total_size());
  std::vector<double> repr(h.n_edges());
  nn::ForwardCache cache;
  for (std::size_t a = 0; a < space.total_size(); ++a) {
    const ActionTuple t = flat_to_tuple(space, a);
    for (std::size_t j = 0; j < h.n_edges(); ++j) {
      repr[j] = block_values[j][edge_local_index(h.edge(j), space, t)];
    }
    rewards[a] = nn::forward(mixer.spec, mixer.params, repr, cache)[0];
  }
  return rewards;
}

HypergraphQModel generator_model(const GeneratedBandit& bandit) {
  ModelConfig cfg;
  cfg.space = bandit.space;
  cfg.hypergraph = bandit.hypergraph;
  cfg.mixer = MixerKind::universal;
  cfg.mixer_hidden = bandit.mixer.spec.layer_sizes[1];
  cfg.mixer_activation = bandit.mixer.spec.activations[0];
  HypergraphQModel model(cfg);
  for (std::size_t j = 0; j < bandit.block_values.size(); ++j) {
    std::copy(bandit.block_values[j].begin(), bandit.block_values[j].end(),
              model.block_table(j).begin());
  }
  std::copy(bandit.mixer.params.begin(), bandit.mixer.params.end(), model.mixer_params().begin());
  return model;
}

double individual_lr(double effective_lr, std::size_t n_edges) {
  if (n_edges == 0) throw Error(ErrorCode::range, "individual_lr needs at least one edge");
  return effective_lr / static_cast<double>(n_edges);
}

std::string PredictorSpec::label() const {
  if (baseline) return "baseline";
  return "r" + std::to_string(rank) + (mixer == MixerKind::summation ? "-sum" : "-uni");
}

PredictorSpec PredictorSpec::parse(std::string_view label) {
  if (label == "baseline") return PredictorSpec{true, 0, MixerKind::summation};
  if (label.size() >= 6 && label[0] == 'r') {
    const auto dash = label.find('-');
    if (dash != std::string_view::npos) {
      PredictorSpec s;
      try {
        s.rank = std::stoul(std::string(label.substr(1, dash - 1)));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::config, "bad variant '" + std::string(label) + "'");
      }
      s.mixer = parse_mixer(label.substr(dash + 1));
      if (s.rank == 0) throw Error(ErrorCode::config, "variant rank must be positive");
      return s;
    }
  }
  throw Error(ErrorCode::config, "bad variant '" + std::string(label) + "'");
}

std::vector<PredictorSpec> default_variants() {
  std::vector<PredictorSpec> v{PredictorSpec{true, 0, MixerKind::summation}};
  for (MixerKind m : {MixerKind::summation, MixerKind::universal}) {
    for (std::size_t r = 1; r <= 3; ++r) v.push_back(PredictorSpec{false, r, m});
  }
  return v;
}

Predictor make_predictor(const PredictorSpec& spec, const ActionSpace& space,
                         const PredictionTrainConfig& config, Rng& rng) {
  ModelConfig cfg;
  cfg.space = space;
  if (spec.baseline) {
    cfg.hypergraph = full_edge_hypergraph(space.n_vertices());
  } else {
    cfg.hypergraph = rank_hypergraph(space.n_vertices(), spec.rank);
    cfg.mixer = spec.mixer;
    cfg.mixer_hidden = config.universal_hidden;
  }
  Predictor p{spec, HypergraphQModel(cfg), {}, {}, {}};
  p.model.initialize(rng);
  if (cfg.mixer == MixerKind::universal && config.universal_table_init > 0.0) {
    Rng tables = rng.split("tables");
    for (std::size_t j = 0; j < p.model.n_edges(); ++j) {
      Rng t = tables.split(j);
      auto table = p.model.block_table(j);
      const double r = config.universal_table_init;
      for (double& x : table) x = t.uniform(-r, r);
    }
  }
  nn::AdamConfig adam{individual_lr(config.effective_lr, p.model.n_edges()), config.adam_beta1,
                      config.adam_beta2, config.adam_epsilon};
  p.adam = nn::AdamState(adam, p.model.param_count());
  p.grad.assign(p.model.param_count(), 0.0);
  return p;
}

void train_iteration(Predictor& p, const GeneratedBandit& bandit,
                     const PredictionTrainConfig& config, Rng& rng) {
  if (!(p.model.space() == bandit.space)) {
    throw Error(ErrorCode::dimension, "predictor and bandit action spaces differ");
  }
  const std::size_t n = bandit.space.total_size();
  const double scale = 2.0 / static_cast<double>(config.minibatch);
  for (std::size_t u = 0; u < config.updates_per_iteration; ++u) {
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
    p.model.evaluate({}, p.ws);
    for (std::size_t k = 0; k < config.minibatch; ++k) {
      const FlatActionIndex a = rng.uniform_index(n);
      const double err = p.model.q_value(p.ws, a) - bandit.rewards[a];
      p.model.accumulate_gradient(p.ws, a, scale * err, p.grad);
    }
    nn::adam_step(p.adam, p.model.params().values(), p.grad);
  }
}

double rms_error(const HypergraphQModel& model, const GeneratedBandit& bandit) {
  const auto q = model.q_values_all(std::span<const double>{});
  double s = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    const double d = q[a] - bandit.rewards[a];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(q.size()));
}

double rms_error(Predictor& p, const GeneratedBandit& bandit) {
  p.model.evaluate({}, p.ws);
  const auto q = p.model.q_values_all(p.ws);
  double s = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    const double d = q[a] - bandit.rewards[a];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(q.size()));
}

std::uint64_t bandit_seed(std::uint64_t master_seed, std::size_t trial) {
  Rng r = Rng(master_seed).split("bandit-seed").split(trial);
  return r.next_u64();
}

TrialCurve run_trial(const PredictorSpec& spec, const GeneratedBandit& bandit, std::size_t size,
                     std::size_t trial, const StudyConfig& config) {
  Rng rng = Rng(config.master_seed).split("predictor").split(size).split(trial).split(spec.label());
  Rng init_rng = rng.split("init");
  Rng sample_rng = rng.split("minibatch");
  Predictor p = make_predictor(spec, bandit.space, config.train, init_rng);
  TrialCurve c;
  c.variant = spec.label();
  c.size = size;
  c.seed = trial;
  c.rms.reserve(config.train.iterations + 1);
  c.rms.push_back(rms_error(p, bandit));
  for (std::size_t it = 0; it < config.train.iterations; ++it) {
    train_iteration(p, bandit, config.train, sample_rng);
    c.rms.push_back(rms_error(p, bandit));
  }
  const double base = c.rms.front();
  c.normalized.reserve(c.rms.size());
  for (double r : c.rms) c.normalized.push_back(base > 0.0 ? r / base : 1.0);
  return c;
}

StudyResult run_prediction_study(const StudyConfig& config,
                                 const std::function<void(std::size_t, std::size_t)>& progress) {
  const std::size_t nv = config.variants.size();
  const std::size_t ns = config.train.seeds;
  const std::size_t per_size = nv * ns;
  const std::size_t total = config.sizes.size() * per_size;
  StudyResult result;
  result.trials.resize(total);
  std::atomic<std::size_t> done{0};
  // One job per (size, seed) so all variants share a generated bandit.
  parallel_for(config.sizes.size() * ns, config.workers, [&](std::size_t job) {
    const std::size_t si = job / ns;
    const std::size_t seed = job % ns;
    const std::size_t size = config.sizes[si];
    const ActionSpace space(std::vector<std::size_t>(config.dims, size));
    const GeneratedBandit bandit = generate_bandit(space, config.gen, bandit_seed(config.master_seed, seed));
    for (std::size_t vi = 0; vi < nv; ++vi) {
      result.trials[si * per_size + vi * ns + seed] =
          run_trial(config.variants[vi], bandit, size, seed, config);
      const std::size_t d = ++done;
      if (progress) progress(d, total);
    }
  });
  result.summary = summarize(result.trials, config.variants, config.sizes);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<TrialCurve>& trials,
                                  const std::vector<PredictorSpec>& variants,
                                  const std::vector<std::size_t>& sizes) {
  std::vector<SummaryRow> rows;
  for (std::size_t size : sizes) {
    for (const auto& v : variants) {
      SummaryRow row;
      row.variant = v.label();
      row.size = size;
      std::vector<double> finals;
      for (const auto& t : trials) {
        if (t.size == size && t.variant == row.variant) finals.push_back(t.rms.back());
      }
      row.n = finals.size();
      if (!finals.empty()) {
        row.mean_final = std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(row.n);
        double ss = 0.0;
        for (double f : finals) ss += (f - row.mean_final) * (f - row.mean_final);
        row.std_final = row.n > 1 ? std::sqrt(ss / static_cast<double>(row.n - 1)) : 0.0;
        row.sem_final = row.std_final / std::sqrt(static_cast<double>(row.n));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hyperq::bandit
