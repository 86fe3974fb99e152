#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hyperq/bandit.hpp"
#include "hyperq/envs.hpp"
#include "hyperq/rl.hpp"
#include "hyperq/value_model.hpp"

namespace hyperq::exp {

/// Flat key=value settings. Later sources override earlier ones; every key
/// must be consumed by the command that reads it.
class Settings {
 public:
  Settings() = default;

  /// Lines of `key = value`; '#' starts a comment.
  static Settings parse(std::string_view text);
  static Settings read_file(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  void merge(const Settings& overrides);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  /// Throws `usage` naming the first key no getter asked for.
  void reject_unused() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Master seed: the `seed` key if present, then HYPERQ_SEED, then 0.
std::uint64_t resolve_master_seed(const Settings& s);

using ResolvedConfig = std::vector<std::pair<std::string, std::string>>;

// ---- prediction study ------------------------------------------------------

struct PredictConfig {
  bandit::StudyConfig study;
  std::filesystem::path out_dir = "predict-out";
};

PredictConfig predict_config(const Settings& s);
ResolvedConfig describe(const PredictConfig& c);

std::string curves_csv(const bandit::StudyResult& result, const ResolvedConfig& config);
std::string summary_csv(const bandit::StudyResult& result, const ResolvedConfig& config);

/// SVG files (name -> document) rebuilt from the two CSV texts alone.
std::map<std::string, std::string> render_predict_figures(const std::string& curves_csv_text,
                                                          const std::string& summary_csv_text);

using Progress = std::function<void(const std::string&)>;

/// Runs the study and writes curves.csv, summary.csv and the figures.
bandit::StudyResult cmd_predict(const PredictConfig& config, const Progress& progress = {});

// ---- reinforcement learning ------------------------------------------------

struct AgentVariant {
  bool flat = false;  // one block over all vertices
  std::size_t rank = 1;
  MixerKind mixer = MixerKind::summation;

  /// "flat", "r1-sum", "r2-uni", ...
  std::string label() const;
};

struct RlConfig {
  envs::EnvSpec env;
  std::vector<AgentVariant> variants;
  std::size_t seeds = 9;
  std::size_t steps = 50000;
  std::size_t eval_period = 2000;
  std::size_t eval_episodes = 5;
  std::vector<std::size_t> torso_hidden{64};
  std::size_t head_hidden_total = 64;
  /// When set, the flat agent's head is narrowed until its parameter count
  /// fits within that of the rank-1 summation agent; otherwise it gets
  /// `head_hidden_total` hidden units like every other variant.
  bool match_flat_params = true;
  rl::AgentConfig agent;
  std::uint64_t master_seed = 0;
  std::size_t workers = 0;
  std::filesystem::path out_dir = "rl-out";
};

RlConfig rl_config(const Settings& s);
ResolvedConfig describe(const RlConfig& c);

/// Neural hypergraph model for an environment; every variant shares the torso
/// and splits `head_hidden_total` hidden units across its blocks.
HypergraphQModel make_agent_model(const envs::Environment& env, const AgentVariant& variant,
                                  const std::vector<std::size_t>& torso_hidden,
                                  std::size_t head_hidden_total);

/// Widest flat-head hidden layer whose model has no more parameters than the
/// rank-1 summation model built from the same torso and head budget.
std::size_t matched_flat_head_hidden(const envs::Environment& env,
                                     const std::vector<std::size_t>& torso_hidden,
                                     std::size_t head_hidden_total);

/// Model for one variant under the config's sizing rules.
HypergraphQModel make_variant_model(const RlConfig& config, const envs::Environment& env,
                                    const AgentVariant& variant);

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t seed_index);

struct EvalRecord {
  std::string variant;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double epsilon = 0.0;
  std::optional<double> loss_avg;  // mean training loss since the previous evaluation
  std::optional<double> optimal_return;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

std::string to_json_line(const EvalRecord& r);
EvalRecord eval_record_from_json(const std::string& line);

struct RunResult {
  std::vector<EvalRecord> records;
  HypergraphQModel model;
};

/// One (variant, seed) training run with periodic greedy evaluation.
RunResult run_rl(const RlConfig& config, const AgentVariant& variant, std::size_t seed_index);

struct RlResult {
  std::vector<EvalRecord> records;  // ordered by (variant, seed, step)
};

/// Trains every variant on every seed; writes curves.jsonl, final.csv,
/// learning_curves.svg and one checkpoint per run under checkpoints/.
RlResult cmd_rl(const RlConfig& config, const Progress& progress = {});

std::string learning_curves_svg(const std::string& jsonl_text);

// ---- representation analysis ------------------------------------------------

struct EdgeStats {
  std::vector<std::size_t> vertices;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct RepresentationStats {
  std::vector<EdgeStats> edges;
  std::size_t samples = 0;
};

class RepresentationAccumulator {
 public:
  explicit RepresentationAccumulator(const Hypergraph& h);
  void add(std::span<const double> representation);
  RepresentationStats stats() const;

 private:
  Hypergraph hypergraph_;
  std::vector<double> sum_, min_, max_;
  std::size_t count_ = 0;
};

/// Runs every model greedily for `steps` environment steps (resetting at
/// episode ends) and aggregates the chosen action's representation. Throws
/// `incompatible_checkpoint` when a model does not match the environment or
/// the models disagree on their hypergraph.
RepresentationStats analyze_representations(const std::vector<HypergraphQModel>& models,
                                            const envs::EnvSpec& env, std::size_t steps);

struct AnalyzeConfig {
  std::filesystem::path checkpoint_dir;
  envs::EnvSpec env;
  std::size_t steps = 10000;
  std::filesystem::path out_dir = "reps-out";
};

AnalyzeConfig analyze_config(const Settings& s);
ResolvedConfig describe(const AnalyzeConfig& c);

/// Loads every *.ckpt in the directory (sorted by name), writes reps.csv and reps.svg.
RepresentationStats cmd_analyze_representations(const AnalyzeConfig& config);

std::string representation_csv(const RepresentationStats& stats, const ResolvedConfig& config);

// ---- score normalization ----------------------------------------------------

/// (agent - random) / (human - random).
double normalized_score(double agent, double human, double random);
/// (a - b) / (max(b, human) - random).
double relative_score(double score_a, double score_b, double human, double random);

}  // namespace hyperq::exp
