#pragma once

// Reference computations shared by the unit tests and the acceptance run.
// They work from definitions (tuples, brute force, dense linear algebra)
// rather than from the library's fast paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hyperq/nn.hpp"
#include "hyperq/rng.hpp"
#include "hyperq/value_model.hpp"

namespace support {

using namespace hyperq;

struct RandomModelOptions {
  std::size_t max_vertices = 4;
  std::size_t max_cardinality = 4;
  bool allow_neural = true;
  bool allow_universal = true;
};

inline HypergraphQModel random_model(Rng& rng, const RandomModelOptions& opt = {}) {
  std::vector<std::size_t> card(1 + rng.uniform_index(opt.max_vertices));
  for (auto& c : card) c = 1 + rng.uniform_index(opt.max_cardinality);
  const ActionSpace space(card);
  const std::size_t rank = 1 + rng.uniform_index(card.size());
  ModelConfig mc{space, rank_hypergraph(card.size(), rank)};
  if (opt.allow_neural && rng.bernoulli(0.5)) {
    mc.block_kind = BlockKind::neural;
    mc.observation_width = 1 + rng.uniform_index(3);
    if (rng.bernoulli(0.7)) mc.torso_hidden = {2 + rng.uniform_index(4)};
    mc.head_hidden_total = 2 + rng.uniform_index(8);
  }
  if (opt.allow_universal && rng.bernoulli(0.5)) {
    mc.mixer = MixerKind::universal;
    mc.mixer_hidden = 2 + rng.uniform_index(6);
    mc.mixer_activation = nn::kAllActivations[rng.uniform_index(4)];
  }
  HypergraphQModel m(std::move(mc));
  Rng init = rng.split("init");
  m.initialize(init);
  // Perturb everything, including zero-initialized tables and biases.
  for (auto& p : m.params().values()) p += rng.uniform(-0.5, 0.5);
  return m;
}

inline std::vector<double> random_state(Rng& rng, const HypergraphQModel& m) {
  std::vector<double> s(m.config().block_kind == BlockKind::neural ? m.config().observation_width : 0);
  for (auto& x : s) x = rng.uniform(-1, 1);
  return s;
}

/// Q(s, a) for a tabular summation model from tuples and edge projections.
inline double tabular_sum_q(const HypergraphQModel& m, const ActionTuple& a) {
  double q = 0;
  for (std::size_t j = 0; j < m.n_edges(); ++j) {
    q += m.block_table(j)[edge_local_index(m.hypergraph().edge(j), m.space(), a)];
  }
  return q;
}

inline FlatActionIndex brute_force_greedy(const HypergraphQModel& m, std::span<const double> state) {
  FlatActionIndex best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (FlatActionIndex a = 0; a < m.space().total_size(); ++a) {
    const double q = m.q_value(state, flat_to_tuple(m.space(), a));
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

/// Worst relative error between accumulate_gradient and central differences
/// of Q(s, a) with respect to every parameter.
inline double model_gradient_error(const HypergraphQModel& m, std::span<const double> state,
                                   FlatActionIndex a, double step = 1e-5) {
  HypergraphQModel::Workspace ws;
  m.evaluate(state, ws);
  std::vector<double> analytic(m.param_count(), 0.0);
  m.accumulate_gradient(ws, a, 1.0, analytic);
  const auto tuple = flat_to_tuple(m.space(), a);
  HypergraphQModel probe = m;
  const std::vector<double> point(m.params().values().begin(), m.params().values().end());
  auto f = [&](const std::vector<double>& p) {
    std::copy(p.begin(), p.end(), probe.params().values().begin());
    return probe.q_value(state, tuple);
  };
  return nn::grad_check_function(point, analytic, f, 1e-4, step).worst_relative_error;
}

/// Dense least squares over all actions: design column per (edge, slot).
inline double summation_fit_residual_dense(const ActionSpace& space, const Hypergraph& h,
                                           const std::vector<double>& target) {
  std::size_t cols = 0;
  std::vector<std::size_t> offset;
  for (const auto& e : h.edges()) {
    offset.push_back(cols);
    cols += edge_output_count(e, space);
  }
  const std::size_t rows = space.total_size();
  // Normal equations with a tiny ridge, solved by Gaussian elimination; the
  // ridge keeps the rank-deficient design solvable without moving the fit.
  std::vector<double> ata(cols * cols, 0.0), atb(cols, 0.0);
  std::vector<std::size_t> idx(h.n_edges());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto t = flat_to_tuple(space, r);
    for (std::size_t j = 0; j < h.n_edges(); ++j) idx[j] = offset[j] + edge_local_index(h.edge(j), space, t);
    for (auto i : idx) {
      atb[i] += target[r];
      for (auto k : idx) ata[i * cols + k] += 1.0;
    }
  }
  for (std::size_t i = 0; i < cols; ++i) ata[i * cols + i] += 1e-12;
  std::vector<double> x = atb;
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < cols; ++r) {
      if (std::abs(ata[r * cols + c]) > std::abs(ata[piv * cols + c])) piv = r;
    }
    for (std::size_t k = 0; k < cols; ++k) std::swap(ata[c * cols + k], ata[piv * cols + k]);
    std::swap(x[c], x[piv]);
    for (std::size_t r = 0; r < cols; ++r) {
      if (r == c) continue;
      const double f = ata[r * cols + c] / ata[c * cols + c];
      if (f == 0) continue;
      for (std::size_t k = c; k < cols; ++k) ata[r * cols + k] -= f * ata[c * cols + k];
      x[r] -= f * x[c];
    }
  }
  for (std::size_t c = 0; c < cols; ++c) x[c] /= ata[c * cols + c];
  double ss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto t = flat_to_tuple(space, r);
    double pred = 0;
    for (std::size_t j = 0; j < h.n_edges(); ++j) pred += x[offset[j] + edge_local_index(h.edge(j), space, t)];
    ss += (pred - target[r]) * (pred - target[r]);
  }
  return std::sqrt(ss / static_cast<double>(rows));
}

/// Deterministic MDP given as next-state and reward tables.
struct TableMdp {
  std::size_t n_states = 0, n_actions = 0;
  std::vector<std::size_t> next;   // [s * n_actions + a]
  std::vector<double> reward;      // [s * n_actions + a]
  std::vector<bool> terminal;      // [s * n_actions + a]: transition ends the episode
};

inline std::vector<double> value_iteration_q(const TableMdp& mdp, double gamma, double tol = 1e-14) {
  std::vector<double> q(mdp.n_states * mdp.n_actions, 0.0);
  for (int it = 0; it < 100000; ++it) {
    double delta = 0;
    std::vector<double> nq(q.size());
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const std::size_t k = s * mdp.n_actions + a;
        double v = 0;
        if (!mdp.terminal[k]) {
          const std::size_t n = mdp.next[k];
          v = *std::max_element(q.begin() + n * mdp.n_actions, q.begin() + (n + 1) * mdp.n_actions);
        }
        nq[k] = mdp.reward[k] + gamma * v;
        delta = std::max(delta, std::abs(nq[k] - q[k]));
      }
    }
    q = std::move(nq);
    if (delta < tol) break;
  }
  return q;
}

}  // namespace support
