// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "hyperq/bandit.hpp"
#include "hyperq/experiment.hpp"
#include "hyperq/parallel.hpp"
#include "hyperq/rl.hpp"
#include "support.hpp"

using namespace hyperq;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail, double seconds) {
  std::printf("%s [%d] %s | %s | %.1fs\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const bandit::SummaryRow& row_for(const bandit::StudyResult& r, std::size_t size, const std::string& label) {
  for (const auto& row : r.summary) {
    if (row.size == size && row.variant == label) return row;
  }
  throw std::runtime_error("missing summary row " + label);
}

void criteria_prediction_study() {
  const auto t0 = std::chrono::steady_clock::now();
  bandit::StudyConfig cfg;  // 3 dims, sizes 5/10/20, 7 variants, 64 seeds, 400 iterations
  const auto res = bandit::run_prediction_study(cfg);
  const double elapsed = seconds_since(t0);

  bool ordering = true;
  std::string detail;
  for (std::size_t size : cfg.sizes) {
    const double base = row_for(res, size, "baseline").mean_final;
    const double r3s = row_for(res, size, "r3-sum").mean_final;
    const double r3u = row_for(res, size, "r3-uni").mean_final;
    bool ok = r3u <= r3s && r3s < base;
    for (const char* mix : {"sum", "uni"}) {
      for (int r = 1; r < 3; ++r) {
        const auto& lo = row_for(res, size, "r" + std::to_string(r) + "-" + mix);
        const auto& hi = row_for(res, size, "r" + std::to_string(r + 1) + "-" + mix);
        const double pooled = std::sqrt(lo.sem_final * lo.sem_final + hi.sem_final * hi.sem_final);
        ok = ok && hi.mean_final <= lo.mean_final + pooled;
      }
    }
    ordering = ordering && ok;
    detail += "size " + std::to_string(size) + ": base " + fmt("%.4g", base);
    for (const char* l : {"r1-sum", "r2-sum", "r3-sum", "r1-uni", "r2-uni", "r3-uni"}) {
      detail += std::string(" ") + l + " " + fmt("%.4g", row_for(res, size, l).mean_final);
    }
    detail += "; ";
  }
  detail += "runtime " + fmt("%.0f", elapsed) + "s (limit 1800s)";
  report(1, ordering && elapsed < 1800.0,
         "final-error ordering r3-uni <= r3-sum < baseline, non-increasing in rank within one pooled SE", detail,
         elapsed);

  std::vector<double> ratios;
  std::string rdetail;
  for (std::size_t size : cfg.sizes) {
    ratios.push_back(row_for(res, size, "baseline").mean_final / row_for(res, size, "r3-sum").mean_final);
    rdetail += std::to_string(size * size * size) + " actions: " + fmt("%.4f", ratios.back()) + "  ";
  }
  const bool widening = ratios[0] < ratios[1] && ratios[1] < ratios[2];
  report(2, widening, "baseline / r3-sum final-error ratio increases with action-space size", rdetail, 0.0);
}

void criterion_decomposition_witness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t count = 0;
  for (std::size_t size : {5u, 10u, 20u}) {
    const ActionSpace space({size, size, size});
    for (std::size_t trial = 0; trial < 64; ++trial) {
      const auto b = bandit::generate_bandit(space, {}, bandit::bandit_seed(0, trial));
      const auto remixed = bandit::mix_rewards(space, b.hypergraph, b.block_values, b.mixer);
      const auto model = bandit::generator_model(b);
      const auto q = model.q_values_all(std::span<const double>{});
      for (std::size_t a = 0; a < space.total_size(); ++a) {
        worst = std::max(worst, std::abs(remixed[a] - b.rewards[a]));
        worst = std::max(worst, std::abs(q[a] - b.rewards[a]));
      }
      ++count;
    }
  }
  report(3, worst <= 1e-12, "re-mixing generator block values reproduces every reward (tol 1e-12 abs)",
         std::to_string(count) + " bandits, worst abs error " + fmt("%.3g", worst), seconds_since(t0));
}

void criterion_argmax() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> card(1 + rng.uniform_index(4));
    for (auto& c : card) c = 1 + rng.uniform_index(6);
    ModelConfig mc{ActionSpace(card), rank_hypergraph(card.size(), 1)};
    if (trial % 2 == 1) {
      mc.block_kind = BlockKind::neural;
      mc.observation_width = 3;
      mc.torso_hidden = {5};
      mc.head_hidden_total = 8;
    }
    HypergraphQModel m(mc);
    Rng init = rng.split(static_cast<std::uint64_t>(trial));
    m.initialize(init);
    for (auto& p : m.params().values()) p += rng.uniform(-1, 1);
    const auto state = support::random_state(rng, m);
    if (m.decentralized_greedy(state) != support::brute_force_greedy(m, state)) ++mismatches;
  }
  report(4, mismatches == 0, "decentralized argmax equals exhaustive argmax on 1-complete summation models",
         "1000 models up to (6,6,6,6), mismatches " + std::to_string(mismatches), seconds_since(t0));
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = support::random_model(rng);
    const auto state = support::random_state(rng, m);
    const FlatActionIndex a = rng.uniform_index(m.space().total_size());
    worst = std::max(worst, support::model_gradient_error(m, state, a, 1e-5));
  }
  report(5, worst < 1e-4, "analytic gradients match central differences (step 1e-5, rel tol 1e-4)",
         "100 configurations, worst relative error " + fmt("%.3g", worst), seconds_since(t0));
}

void criterion_capacity() {
  const auto t0 = std::chrono::steady_clock::now();
  const ActionSpace space({3, 3, 2});
  Rng rng(31);
  double worst_full = 0.0;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> target(space.total_size());
    for (auto& v : target) v = rng.uniform(-5, 5);
    worst_full = std::max(worst_full, fit_summation_tables(space, rank_hypergraph(3, 3), target).rms_residual);
  }
  double best_biased = 1e300;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> u0(3), u1(3), u2(2);
    for (auto& v : u0) v = rng.uniform(-1, 1);
    for (auto& v : u1) v = rng.uniform(-1, 1);
    for (auto& v : u2) v = rng.uniform(-1, 1);
    const double w = rng.uniform(0.5, 1.5);
    std::vector<double> target(space.total_size());
    for (std::size_t a = 0; a < target.size(); ++a) {
      const auto t = flat_to_tuple(space, a);
      // Centered product of vertices 0 and 1: orthogonal to every additive table.
      const double x0 = static_cast<double>(t[0]) - 1.0, x1 = static_cast<double>(t[1]) - 1.0;
      target[a] = u0[t[0]] + u1[t[1]] + u2[t[2]] + w * x0 * x1;
    }
    best_biased = std::min(best_biased, fit_summation_tables(space, rank_hypergraph(3, 1), target).rms_residual);
  }
  report(6, worst_full < 1e-8 && best_biased > 0.01,
         "full-rank summation fits any table (RMS < 1e-8); rank 1 cannot fit pairwise interaction (RMS > 0.01)",
         "worst full-rank RMS " + fmt("%.3g", worst_full) + ", smallest rank-1 RMS " + fmt("%.4g", best_biased),
         seconds_since(t0));
}

void criterion_tabular_q() {
  const auto t0 = std::chrono::steady_clock::now();
  // 3 states, actions as (2 x 2) tuples; deterministic transitions and rewards.
  const ActionSpace space({2, 2});
  support::TableMdp mdp;
  mdp.n_states = 3;
  mdp.n_actions = space.total_size();
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 4; ++a) {
      const auto t = flat_to_tuple(space, a);
      mdp.next.push_back((s + t[0] + 2 * t[1]) % 3);
      mdp.reward.push_back(static_cast<double>(s) - 0.5 * static_cast<double>(t[0]) + static_cast<double>(t[1] == s % 2));
      mdp.terminal.push_back(s == 2 && a == 3);
    }
  }
  const double gamma = 0.9;
  const auto oracle = support::value_iteration_q(mdp, gamma);
  rl::TabularQ q(3, 4, 0.5);
  std::size_t updates = 0;
  double err = 1e300;
  while (updates < 100000 && err > 1e-6) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 4; ++a) {
        const std::size_t k = s * 4 + a;
        rl::tabular_q_update(q, {s, a, mdp.reward[k], mdp.next[k], mdp.terminal[k]}, gamma);
        ++updates;
      }
    }
    err = 0;
    for (std::size_t k = 0; k < oracle.size(); ++k) err = std::max(err, std::abs(q.table[k] - oracle[k]));
  }
  report(7, err <= 1e-6 && updates <= 100000, "tabular Q-learning reaches the value-iteration fixed point",
         "max-norm error " + fmt("%.3g", err) + " after " + std::to_string(updates) + " updates (limits 1e-6, 1e5)",
         seconds_since(t0));
}

void criterion_rl() {
  const auto t0 = std::chrono::steady_clock::now();
  exp::RlConfig cfg;  // chain d=4 K=5 T=20, 9 seeds, 50000 steps, table defaults
  cfg.variants = {{false, 1, MixerKind::summation}, {true, 4, MixerKind::summation}};
  const auto optimum = *envs::optimal_return(cfg.env);
  std::size_t hits[2] = {0, 0};
  std::string finals[2];
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t v = 0; v < 2; ++v) {
    for (std::size_t s = 0; s < cfg.seeds; ++s) jobs.emplace_back(v, s);
  }
  std::vector<double> final_return(jobs.size());
  parallel_for(jobs.size(), 0, [&](std::size_t i) {
    const auto run = exp::run_rl(cfg, cfg.variants[jobs[i].first], jobs[i].second);
    final_return[i] = run.records.back().mean_return;
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::size_t v = jobs[i].first;
    if (final_return[i] >= 0.9 * optimum) ++hits[v];
    finals[v] += fmt("%.2f ", final_return[i]);
  }
  const bool pass = hits[0] >= 7 && hits[1] <= 3;
  report(8, pass, "chain d=4 K=5 T=20: rank-1 HGQN >= 90% optimal in >= 7/9 seeds, flat in <= 3/9",
         "optimal " + fmt("%.1f", optimum) + "; r1-sum " + std::to_string(hits[0]) + "/9 [" + finals[0] +
             "]; flat " + std::to_string(hits[1]) + "/9 [" + finals[1] + "]",
         seconds_since(t0));
}

void criterion_timeout() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(5);
  const ActionSpace space({3, 3});
  HypergraphQModel m(ModelConfig{space, rank_hypergraph(2, 2)});
  m.initialize(rng);
  for (auto& p : m.params().values()) p = rng.uniform(-2, 2);
  const auto q = m.q_values_all(std::span<const double>{});
  const double max_q = *std::max_element(q.begin(), q.end());
  rl::AgentConfig cfg;
  rl::Agent agent(m, cfg, 1);
  const rl::Transition timeout{{}, 4, 0.3, {}, false, true};
  const rl::Transition terminal{{}, 4, 0.3, {}, true, false};
  const std::vector<const rl::Transition*> batch{&timeout, &terminal};
  const auto y = agent.td_targets(batch);
  const double want = 0.3 + cfg.gamma * max_q;
  const bool pass = std::abs(y[0] - want) <= 1e-12 && y[1] == 0.3;
  report(9, pass, "timeout target = r + gamma * max target-Q, terminal target = r (tol 1e-12)",
         "timeout " + fmt("%.15g", y[0]) + " vs " + fmt("%.15g", want) + ", terminal " + fmt("%.15g", y[1]),
         seconds_since(t0));
}

void criterion_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = fs::temp_directory_path() / "hyperq-acceptance-determinism";
  fs::remove_all(root);
  bool same = true;
  std::string detail;
  for (const char* tag : {"a", "b"}) {
    auto p = exp::predict_config(exp::Settings::parse(
        "sizes = 5,10\n seeds = 3\n iterations = 20\n seed = 11\n workers = 0\n"));
    p.out_dir = root / "predict" / tag;
    exp::cmd_predict(p);
    auto r = exp::rl_config(exp::Settings::parse(
        "rank = 1,2\n baseline = true\n seeds = 2\n steps = 1500\n eval_period = 500\n warmup = 500\n seed = 11\n"));
    r.out_dir = root / "rl" / tag;
    exp::cmd_rl(r);
  }
  for (const auto& [dir, files] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"predict", {"curves.csv", "summary.csv"}}, {"rl", {"curves.jsonl", "final.csv"}}}) {
    for (const auto& f : files) {
      const bool eq = slurp(root / dir / "a" / f) == slurp(root / dir / "b" / f) &&
                      !slurp(root / dir / "a" / f).empty();
      same = same && eq;
      detail += dir + "/" + f + (eq ? " identical; " : " DIFFERS; ");
    }
  }
  fs::remove_all(root);
  report(10, same, "re-running with the same config and seed gives byte-identical CSV/JSONL", detail,
         seconds_since(t0));
}

}  // namespace

int main() {
  criterion_decomposition_witness();
  criterion_argmax();
  criterion_gradients();
  criterion_capacity();
  criterion_tabular_q();
  criterion_timeout();
  criterion_determinism();
  criteria_prediction_study();
  criterion_rl();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
