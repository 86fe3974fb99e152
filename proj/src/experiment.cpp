#include "hyperq/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "hyperq/error.hpp"
#include "hyperq/parallel.hpp"
#include "hyperq/svg.hpp"

namespace hyperq::exp {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad_field(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::usage, "config field '" + key + "': " + why);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) bad_field(key, "expected a non-negative integer, got '" + text + "'");
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string config_comment(const ResolvedConfig& config) {
  std::string out;
  for (const auto& [k, v] : config) out += "# " + k + "=" + v + "\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Data rows of a CSV with a header; comment lines are skipped.
std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::string> header;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size()) throw Error(ErrorCode::io, "ragged CSV row: " + line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorCode::io, "bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::io, "bad number '" + s + "'");
  }
}

void env_settings(const Settings& s, envs::EnvSpec& env) {
  env.kind = s.get_string("env", env.kind);
  if (env.kind != "chain" && env.kind != "pointmass") bad_field("env", "expected chain or pointmass");
  env.dims = s.get_size("dims", env.dims);
  env.bins = s.get_size("bins", env.kind == "pointmass" ? 5 : env.bins);
  env.horizon = s.get_size("horizon", env.kind == "pointmass" ? 200 : env.horizon);
  env.early_termination = s.get_bool("early_termination", env.early_termination);
  if (env.kind == "pointmass") env.dims = 2;
  if (env.dims == 0) bad_field("dims", "must be positive");
  if (env.bins < (env.kind == "pointmass" ? 2u : 1u)) bad_field("bins", "too few sub-actions");
  if (env.horizon == 0) bad_field("horizon", "must be positive");
}

void describe_env(const envs::EnvSpec& env, ResolvedConfig& out) {
  out.emplace_back("env", env.kind);
  out.emplace_back("dims", std::to_string(env.dims));
  out.emplace_back("bins", std::to_string(env.bins));
  out.emplace_back("horizon", std::to_string(env.horizon));
  out.emplace_back("early_termination", env.early_termination ? "true" : "false");
}

}  // namespace

// ---- Settings ----------------------------------------------------------------

Settings Settings::parse(std::string_view text) {
  Settings s;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": empty key");
    s.set(std::move(key), trim(std::string_view(line).substr(eq + 1)));
  }
  return s;
}

Settings Settings::read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void Settings::set(std::string key, std::string value) {
  std::replace(key.begin(), key.end(), '-', '_');
  values_[std::move(key)] = std::move(value);
}

void Settings::merge(const Settings& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

std::string Settings::get_string(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::size_t Settings::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t Settings::get_u64(const std::string& key, std::uint64_t fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_u64(key, it->second);
}

double Settings::get_double(const std::string& key, double fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    bad_field(key, "expected a number, got '" + it->second + "'");
  }
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_field(key, "expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> Settings::get_size_list(const std::string& key,
                                                 const std::vector<std::size_t>& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::size_t> out;
  if (it->second.empty()) return out;
  for (const auto& item : split(it->second, ',')) out.push_back(parse_u64(key, item));
  return out;
}

std::vector<std::string> Settings::get_string_list(const std::string& key,
                                                   const std::vector<std::string>& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.empty()) return {};
  return split(it->second, ',');
}

void Settings::reject_unused() const {
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) throw Error(ErrorCode::usage, "unknown config field '" + k + "'");
  }
}

std::uint64_t resolve_master_seed(const Settings& s) {
  if (s.has("seed")) return s.get_u64("seed", 0);
  s.get_u64("seed", 0);
  if (const char* env = std::getenv("HYPERQ_SEED"); env && *env) {
    return parse_u64("HYPERQ_SEED", env);
  }
  return 0;
}

// ---- prediction study ----------------------------------------------------------

PredictConfig predict_config(const Settings& s) {
  PredictConfig c;
  auto& st = c.study;
  st.sizes = s.get_size_list("sizes", st.sizes);
  st.dims = s.get_size("dims", st.dims);
  st.train.seeds = s.get_size("seeds", st.train.seeds);
  st.train.iterations = s.get_size("iterations", st.train.iterations);
  st.train.updates_per_iteration = s.get_size("updates_per_iteration", st.train.updates_per_iteration);
  st.train.minibatch = s.get_size("minibatch", st.train.minibatch);
  st.train.effective_lr = s.get_double("effective_lr", st.train.effective_lr);
  st.workers = s.get_size("workers", st.workers);
  st.master_seed = resolve_master_seed(s);
  c.out_dir = s.get_string("out", c.out_dir.string());
  std::vector<std::string> labels;
  for (const auto& v : st.variants) labels.push_back(v.label());
  labels = s.get_string_list("variants", labels);
  st.variants.clear();
  for (const auto& l : labels) {
    try {
      st.variants.push_back(bandit::PredictorSpec::parse(l));
    } catch (const Error& e) {
      bad_field("variants", e.what());
    }
  }
  s.reject_unused();

  if (st.sizes.empty()) bad_field("sizes", "at least one size is required");
  for (auto k : st.sizes) {
    if (k < 2) bad_field("sizes", "each size must be at least 2");
  }
  if (st.dims == 0) bad_field("dims", "must be positive");
  if (st.variants.empty()) bad_field("variants", "at least one variant is required");
  for (const auto& v : st.variants) {
    if (!v.baseline && v.rank > st.dims) bad_field("variants", "rank " + std::to_string(v.rank) + " exceeds dims");
  }
  if (st.train.seeds == 0) bad_field("seeds", "must be positive");
  if (st.train.minibatch == 0) bad_field("minibatch", "must be positive");
  if (st.train.updates_per_iteration == 0) bad_field("updates_per_iteration", "must be positive");
  if (!(st.train.effective_lr > 0)) bad_field("effective_lr", "must be positive");
  return c;
}

ResolvedConfig describe(const PredictConfig& c) {
  const auto& st = c.study;
  std::string variants;
  for (std::size_t i = 0; i < st.variants.size(); ++i) variants += (i ? "," : "") + st.variants[i].label();
  return {{"mode", "predict"},
          {"sizes", join(st.sizes)},
          {"dims", std::to_string(st.dims)},
          {"variants", variants},
          {"seeds", std::to_string(st.train.seeds)},
          {"iterations", std::to_string(st.train.iterations)},
          {"updates_per_iteration", std::to_string(st.train.updates_per_iteration)},
          {"minibatch", std::to_string(st.train.minibatch)},
          {"effective_lr", fmt(st.train.effective_lr)},
          {"seed", std::to_string(st.master_seed)}};
}

std::string curves_csv(const bandit::StudyResult& result, const ResolvedConfig& config) {
  std::string out = config_comment(config);
  out += "variant,size,seed,iteration,rms,normalized\n";
  for (const auto& t : result.trials) {
    const std::string prefix = t.variant + "," + std::to_string(t.size) + "," + std::to_string(t.seed) + ",";
    for (std::size_t i = 0; i < t.rms.size(); ++i) {
      out += prefix + std::to_string(i) + "," + fmt(t.rms[i]) + "," + fmt(t.normalized[i]) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const bandit::StudyResult& result, const ResolvedConfig& config) {
  std::string out = config_comment(config);
  out += "variant,size,actions,n,mean_final,std_final,sem_final\n";
  std::size_t dims = 3;
  for (const auto& [k, v] : config) {
    if (k == "dims") dims = std::stoul(v);
  }
  for (const auto& r : result.summary) {
    const auto actions = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(r.size), static_cast<double>(dims))));
    out += r.variant + "," + std::to_string(r.size) + "," + std::to_string(actions) + "," +
           std::to_string(r.n) + "," + fmt(r.mean_final) + "," + fmt(r.std_final) + "," +
           fmt(r.sem_final) + "\n";
  }
  return out;
}

std::map<std::string, std::string> render_predict_figures(const std::string& curves_csv_text,
                                                          const std::string& summary_csv_text) {
  std::map<std::string, std::string> files;
  // Mean normalized curve per (size, variant), in first-appearance order.
  std::vector<std::string> sizes, variants;
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, std::size_t>>> acc;
  for (const auto& row : parse_csv(curves_csv_text)) {
    const auto& size = row.at("size");
    const auto& variant = row.at("variant");
    if (std::find(sizes.begin(), sizes.end(), size) == sizes.end()) sizes.push_back(size);
    if (std::find(variants.begin(), variants.end(), variant) == variants.end()) variants.push_back(variant);
    auto& curve = acc[{size, variant}];
    const auto it = static_cast<std::size_t>(std::stoul(row.at("iteration")));
    if (curve.size() <= it) curve.resize(it + 1, {0.0, 0});
    curve[it].first += to_double(row.at("normalized"));
    curve[it].second += 1;
  }
  for (const auto& size : sizes) {
    std::vector<svg::Series> series;
    for (const auto& variant : variants) {
      const auto found = acc.find({size, variant});
      if (found == acc.end()) continue;
      svg::Series s{variant, {}, {}};
      for (std::size_t i = 0; i < found->second.size(); ++i) {
        if (found->second[i].second == 0) continue;
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(found->second[i].first / static_cast<double>(found->second[i].second));
      }
      series.push_back(std::move(s));
    }
    files["curves_size" + size + ".svg"] = svg::line_chart(
        {"Normalized RMS error, " + size + " sub-actions per dimension", "iteration",
         "mean normalized RMS error", true},
        series);
  }
  std::vector<svg::Bar> bars;
  for (const auto& row : parse_csv(summary_csv_text)) {
    bars.push_back({row.at("actions") + " actions", row.at("variant"), to_double(row.at("mean_final")),
                    to_double(row.at("sem_final"))});
  }
  files["final_error.svg"] =
      svg::bar_chart({"Final RMS error", "action-space size", "mean RMS error", true}, bars);
  return files;
}

bandit::StudyResult cmd_predict(const PredictConfig& config, const Progress& progress) {
  std::filesystem::create_directories(config.out_dir);
  std::mutex mu;
  auto result = bandit::run_prediction_study(config.study, [&](std::size_t done, std::size_t total) {
    if (!progress) return;
    std::lock_guard lock(mu);
    progress("trial " + std::to_string(done) + "/" + std::to_string(total));
  });
  const auto resolved = describe(config);
  const auto curves = curves_csv(result, resolved);
  const auto summary = summary_csv(result, resolved);
  write_text(config.out_dir / "curves.csv", curves);
  write_text(config.out_dir / "summary.csv", summary);
  for (const auto& [name, doc] : render_predict_figures(curves, summary)) {
    write_text(config.out_dir / name, doc);
  }
  return result;
}

// ---- reinforcement learning ------------------------------------------------------

std::string AgentVariant::label() const {
  if (flat) return "flat";
  return "r" + std::to_string(rank) + "-" + (mixer == MixerKind::summation ? "sum" : "uni");
}

RlConfig rl_config(const Settings& s) {
  RlConfig c;
  env_settings(s, c.env);
  const auto ranks = s.get_size_list("rank", {1});
  const bool baseline = s.get_bool("baseline", false);
  MixerKind mixer = MixerKind::summation;
  try {
    mixer = parse_mixer(s.get_string("mixer", "sum"));
  } catch (const Error&) {
    bad_field("mixer", "expected sum or universal");
  }
  for (auto r : ranks) c.variants.push_back({false, r, mixer});
  if (baseline) c.variants.push_back({true, c.env.dims, MixerKind::summation});
  c.seeds = s.get_size("seeds", c.seeds);
  c.steps = s.get_size("steps", c.steps);
  c.eval_period = s.get_size("eval_period", c.eval_period);
  c.eval_episodes = s.get_size("eval_episodes", c.eval_episodes);
  c.torso_hidden = s.get_size_list("torso_hidden", c.torso_hidden);
  c.head_hidden_total = s.get_size("head_hidden", c.head_hidden_total);
  c.match_flat_params = s.get_bool("match_flat_params", c.match_flat_params);
  auto& a = c.agent;
  a.minibatch = s.get_size("minibatch", a.minibatch);
  a.replay_capacity = s.get_size("replay_capacity", a.replay_capacity);
  a.target_period = s.get_size("target_period", a.target_period);
  a.warmup = s.get_size("warmup", a.warmup);
  a.gamma = s.get_double("gamma", a.gamma);
  a.adam.learning_rate = s.get_double("lr", a.adam.learning_rate);
  a.adam.epsilon = s.get_double("adam_epsilon", a.adam.epsilon);
  a.exploration.final = s.get_double("epsilon_final", a.exploration.final);
  a.exploration.final_step = s.get_size("epsilon_final_step", a.exploration.final_step);
  a.eval_epsilon = s.get_double("eval_epsilon", a.eval_epsilon);
  c.workers = s.get_size("workers", c.workers);
  c.master_seed = resolve_master_seed(s);
  c.out_dir = s.get_string("out", c.out_dir.string());
  s.reject_unused();

  if (c.variants.empty()) bad_field("rank", "no agent selected (empty rank list without baseline)");
  for (const auto& v : c.variants) {
    if (!v.flat && (v.rank == 0 || v.rank > c.env.dims)) bad_field("rank", "must lie in 1..dims");
  }
  if (c.seeds == 0) bad_field("seeds", "must be positive");
  if (c.eval_period == 0) bad_field("eval_period", "must be positive");
  if (c.eval_episodes == 0) bad_field("eval_episodes", "must be positive");
  if (c.head_hidden_total == 0) bad_field("head_hidden", "must be positive");
  if (a.minibatch == 0) bad_field("minibatch", "must be positive");
  if (a.replay_capacity == 0) bad_field("replay_capacity", "must be positive");
  if (a.target_period == 0) bad_field("target_period", "must be positive");
  if (!(a.gamma >= 0 && a.gamma <= 1)) bad_field("gamma", "must lie in [0, 1]");
  if (!(a.adam.learning_rate > 0)) bad_field("lr", "must be positive");
  if (!(a.adam.epsilon > 0)) bad_field("adam_epsilon", "must be positive");
  if (a.exploration.final_step == 0) bad_field("epsilon_final_step", "must be positive");
  if (!(a.eval_epsilon >= 0 && a.eval_epsilon <= 1)) bad_field("eval_epsilon", "must lie in [0, 1]");
  if (!(a.exploration.final >= 0 && a.exploration.final <= 1)) bad_field("epsilon_final", "must lie in [0, 1]");
  return c;
}

ResolvedConfig describe(const RlConfig& c) {
  ResolvedConfig out{{"mode", "rl"}};
  describe_env(c.env, out);
  std::string variants;
  for (std::size_t i = 0; i < c.variants.size(); ++i) variants += (i ? "," : "") + c.variants[i].label();
  out.emplace_back("variants", variants);
  out.emplace_back("seeds", std::to_string(c.seeds));
  out.emplace_back("steps", std::to_string(c.steps));
  out.emplace_back("eval_period", std::to_string(c.eval_period));
  out.emplace_back("eval_episodes", std::to_string(c.eval_episodes));
  out.emplace_back("torso_hidden", join(c.torso_hidden));
  out.emplace_back("head_hidden", std::to_string(c.head_hidden_total));
  out.emplace_back("match_flat_params", c.match_flat_params ? "true" : "false");
  out.emplace_back("minibatch", std::to_string(c.agent.minibatch));
  out.emplace_back("replay_capacity", std::to_string(c.agent.replay_capacity));
  out.emplace_back("target_period", std::to_string(c.agent.target_period));
  out.emplace_back("warmup", std::to_string(c.agent.warmup));
  out.emplace_back("gamma", fmt(c.agent.gamma));
  out.emplace_back("lr", fmt(c.agent.adam.learning_rate));
  out.emplace_back("adam_epsilon", fmt(c.agent.adam.epsilon));
  out.emplace_back("epsilon_final", fmt(c.agent.exploration.final));
  out.emplace_back("epsilon_final_step", std::to_string(c.agent.exploration.final_step));
  out.emplace_back("eval_epsilon", fmt(c.agent.eval_epsilon));
  out.emplace_back("seed", std::to_string(c.master_seed));
  return out;
}

HypergraphQModel make_agent_model(const envs::Environment& env, const AgentVariant& variant,
                                  const std::vector<std::size_t>& torso_hidden,
                                  std::size_t head_hidden_total) {
  const std::size_t n = env.action_space().n_vertices();
  ModelConfig mc{env.action_space(), variant.flat ? full_edge_hypergraph(n) : rank_hypergraph(n, variant.rank)};
  mc.block_kind = BlockKind::neural;
  mc.observation_width = env.observation_width();
  mc.torso_hidden = torso_hidden;
  mc.head_hidden_total = head_hidden_total;
  mc.mixer = variant.flat ? MixerKind::summation : variant.mixer;
  return HypergraphQModel(std::move(mc));
}

std::size_t matched_flat_head_hidden(const envs::Environment& env,
                                     const std::vector<std::size_t>& torso_hidden,
                                     std::size_t head_hidden_total) {
  const std::size_t budget =
      make_agent_model(env, {false, 1, MixerKind::summation}, torso_hidden, head_hidden_total).param_count();
  std::size_t h = 1;
  while (make_agent_model(env, {true, 0, MixerKind::summation}, torso_hidden, h + 1).param_count() <= budget) ++h;
  return h;
}

HypergraphQModel make_variant_model(const RlConfig& config, const envs::Environment& env,
                                    const AgentVariant& variant) {
  std::size_t head = config.head_hidden_total;
  if (variant.flat && config.match_flat_params) {
    head = matched_flat_head_hidden(env, config.torso_hidden, config.head_hidden_total);
  }
  return make_agent_model(env, variant, config.torso_hidden, head);
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t seed_index) {
  return Rng(master_seed).split("rl-run").split(seed_index).next_u64();
}

std::string to_json_line(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["seed_index"] = r.seed_index;
  j["seed"] = r.seed;
  j["step"] = r.step;
  j["mean_return"] = r.mean_return;
  j["std_return"] = r.std_return;
  j["epsilon"] = r.epsilon;
  j["loss_avg"] = r.loss_avg ? nlohmann::ordered_json(*r.loss_avg) : nlohmann::ordered_json(nullptr);
  j["optimal_return"] =
      r.optimal_return ? nlohmann::ordered_json(*r.optimal_return) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

EvalRecord eval_record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EvalRecord r;
    r.variant = j.at("variant").get<std::string>();
    r.seed_index = j.at("seed_index").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.step = j.at("step").get<std::size_t>();
    r.mean_return = j.at("mean_return").get<double>();
    r.std_return = j.at("std_return").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    if (!j.at("loss_avg").is_null()) r.loss_avg = j.at("loss_avg").get<double>();
    if (!j.at("optimal_return").is_null()) r.optimal_return = j.at("optimal_return").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, std::string("bad evaluation record: ") + e.what());
  }
}

RunResult run_rl(const RlConfig& config, const AgentVariant& variant, std::size_t seed_index) {
  const std::uint64_t seed = run_seed(config.master_seed, seed_index);
  envs::EnvSpec spec = config.env;
  spec.seed = seed;
  auto env = envs::make_env(spec);
  auto eval_env = envs::make_env(spec);
  const auto optimum = envs::optimal_return(spec);

  HypergraphQModel model = make_variant_model(config, *env, variant);
  Rng init_rng = Rng(seed).split("init");
  model.initialize(init_rng);
  rl::Agent agent(std::move(model), config.agent, seed);

  RunResult result;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  auto evaluate = [&] {
    std::vector<double> returns;
    for (std::size_t e = 0; e < config.eval_episodes; ++e) {
      returns.push_back(rl::run_episode(agent, *eval_env, false).episode_return);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    EvalRecord rec;
    rec.variant = variant.label();
    rec.seed_index = seed_index;
    rec.seed = seed;
    rec.step = agent.env_steps();
    rec.mean_return = mean;
    rec.std_return = std::sqrt(var / static_cast<double>(returns.size()));
    rec.epsilon = agent.current_epsilon();
    if (loss_count > 0) rec.loss_avg = loss_sum / static_cast<double>(loss_count);
    rec.optimal_return = optimum;
    result.records.push_back(rec);
    loss_sum = 0.0;
    loss_count = 0;
  };

  evaluate();
  std::size_t next_eval = config.eval_period;
  while (agent.env_steps() < config.steps) {
    const std::size_t budget = std::min(config.steps, next_eval) - agent.env_steps();
    const auto ep = rl::run_episode(agent, *env, true, budget);
    loss_sum += ep.loss_sum;
    loss_count += ep.loss_count;
    if (agent.env_steps() >= next_eval || agent.env_steps() >= config.steps) {
      evaluate();
      while (next_eval <= agent.env_steps()) next_eval += config.eval_period;
    }
  }
  result.model = agent.online();
  return result;
}

RlResult cmd_rl(const RlConfig& config, const Progress& progress) {
  std::filesystem::create_directories(config.out_dir / "checkpoints");
  const std::size_t n_runs = config.variants.size() * config.seeds;
  std::vector<RunResult> runs(n_runs);
  std::mutex mu;
  std::size_t done = 0;
  parallel_for(n_runs, config.workers, [&](std::size_t job) {
    const auto& variant = config.variants[job / config.seeds];
    const std::size_t seed_index = job % config.seeds;
    runs[job] = run_rl(config, variant, seed_index);
    save_model(runs[job].model, (config.out_dir / "checkpoints" /
                                 (variant.label() + "-s" + std::to_string(seed_index) + ".ckpt")).string());
    std::lock_guard lock(mu);
    ++done;
    if (progress) {
      const auto& last = runs[job].records.back();
      progress(variant.label() + " seed " + std::to_string(seed_index) + " final return " +
               fmt(last.mean_return) + " (" + std::to_string(done) + "/" + std::to_string(n_runs) + ")");
    }
  });

  RlResult result;
  const auto resolved = describe(config);
  nlohmann::ordered_json header;
  for (const auto& [k, v] : resolved) header["config"][k] = v;
  std::string jsonl = header.dump() + "\n";
  std::string final_csv = config_comment(resolved) + "variant,seed_index,seed,final_return,optimal_return,fraction\n";
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      jsonl += to_json_line(r) + "\n";
      result.records.push_back(r);
    }
    const auto& last = run.records.back();
    final_csv += last.variant + "," + std::to_string(last.seed_index) + "," + std::to_string(last.seed) + "," +
                 fmt(last.mean_return) + "," + (last.optimal_return ? fmt(*last.optimal_return) : "") + "," +
                 (last.optimal_return ? fmt(last.mean_return / *last.optimal_return) : "") + "\n";
  }
  write_text(config.out_dir / "curves.jsonl", jsonl);
  write_text(config.out_dir / "final.csv", final_csv);
  write_text(config.out_dir / "learning_curves.svg", learning_curves_svg(jsonl));
  return result;
}

std::string learning_curves_svg(const std::string& jsonl_text) {
  std::vector<std::string> variants;
  std::map<std::string, std::map<std::size_t, std::pair<double, std::size_t>>> acc;
  std::istringstream is(jsonl_text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.find("\"config\"") != std::string::npos) continue;
    const auto r = eval_record_from_json(line);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    auto& cell = acc[r.variant][r.step];
    cell.first += r.mean_return;
    cell.second += 1;
  }
  std::vector<svg::Series> series;
  for (const auto& v : variants) {
    svg::Series s{v, {}, {}};
    for (const auto& [step, cell] : acc[v]) {
      s.x.push_back(static_cast<double>(step));
      s.y.push_back(cell.first / static_cast<double>(cell.second));
    }
    series.push_back(std::move(s));
  }
  return svg::line_chart({"Evaluation return", "environment step", "mean return over seeds", false}, series);
}

// ---- representation analysis -------------------------------------------------

RepresentationAccumulator::RepresentationAccumulator(const Hypergraph& h)
    : hypergraph_(h),
      sum_(h.n_edges(), 0.0),
      min_(h.n_edges(), std::numeric_limits<double>::infinity()),
      max_(h.n_edges(), -std::numeric_limits<double>::infinity()) {}

void RepresentationAccumulator::add(std::span<const double> representation) {
  if (representation.size() != sum_.size()) {
    throw Error(ErrorCode::dimension, "representation length does not match the hypergraph");
  }
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    sum_[j] += representation[j];
    min_[j] = std::min(min_[j], representation[j]);
    max_[j] = std::max(max_[j], representation[j]);
  }
  ++count_;
}

RepresentationStats RepresentationAccumulator::stats() const {
  RepresentationStats s;
  s.samples = count_;
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    EdgeStats e;
    e.vertices = hypergraph_.edge(j).vertices();
    if (count_ > 0) {
      e.mean = sum_[j] / static_cast<double>(count_);
      e.min = min_[j];
      e.max = max_[j];
      // Rounding in the running sum must not push the mean outside [min, max].
      e.mean = std::clamp(e.mean, e.min, e.max);
    }
    s.edges.push_back(std::move(e));
  }
  return s;
}

RepresentationStats analyze_representations(const std::vector<HypergraphQModel>& models,
                                            const envs::EnvSpec& env_spec, std::size_t steps) {
  if (models.empty()) throw Error(ErrorCode::usage, "no models to analyze");
  RepresentationAccumulator acc(models.front().hypergraph());
  for (const auto& model : models) {
    auto env = envs::make_env(env_spec);
    if (!(model.space() == env->action_space())) {
      throw Error(ErrorCode::incompatible_checkpoint, "checkpoint action space does not match the environment");
    }
    if (model.config().block_kind == BlockKind::neural &&
        model.config().observation_width != env->observation_width()) {
      throw Error(ErrorCode::incompatible_checkpoint, "checkpoint observation width does not match the environment");
    }
    if (!(model.hypergraph() == models.front().hypergraph())) {
      throw Error(ErrorCode::incompatible_checkpoint, "checkpoints use different hypergraphs");
    }
    std::vector<double> state = env->reset();
    for (std::size_t t = 0; t < steps; ++t) {
      const FlatActionIndex a = model.greedy_action(state);
      const auto tuple = flat_to_tuple(model.space(), a);
      acc.add(model.action_representation(state, tuple).values);
      auto r = env->step(a);
      state = (r.terminal || r.timeout) ? env->reset() : std::move(r.observation);
    }
  }
  return acc.stats();
}

AnalyzeConfig analyze_config(const Settings& s) {
  AnalyzeConfig c;
  c.checkpoint_dir = s.get_string("ckpt_dir", "");
  env_settings(s, c.env);
  c.env.seed = s.get_u64("env_seed", 0);
  c.steps = s.get_size("steps", c.steps);
  c.out_dir = s.get_string("out", c.out_dir.string());
  s.reject_unused();
  if (c.checkpoint_dir.empty()) bad_field("ckpt_dir", "a checkpoint directory is required");
  if (c.steps == 0) bad_field("steps", "must be positive");
  return c;
}

ResolvedConfig describe(const AnalyzeConfig& c) {
  ResolvedConfig out{{"mode", "analyze"}, {"ckpt_dir", c.checkpoint_dir.string()}};
  describe_env(c.env, out);
  out.emplace_back("env_seed", std::to_string(c.env.seed));
  out.emplace_back("steps", std::to_string(c.steps));
  return out;
}

std::string representation_csv(const RepresentationStats& stats, const ResolvedConfig& config) {
  std::string out = config_comment(config);
  out += "edge,vertices,samples,mean,min,max\n";
  for (std::size_t j = 0; j < stats.edges.size(); ++j) {
    const auto& e = stats.edges[j];
    std::string verts;
    for (std::size_t i = 0; i < e.vertices.size(); ++i) verts += (i ? " " : "") + std::to_string(e.vertices[i]);
    out += std::to_string(j) + "," + verts + "," + std::to_string(stats.samples) + "," + fmt(e.mean) + "," +
           fmt(e.min) + "," + fmt(e.max) + "\n";
  }
  return out;
}

RepresentationStats cmd_analyze_representations(const AnalyzeConfig& config) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(config.checkpoint_dir)) {
    throw Error(ErrorCode::io, "not a directory: " + config.checkpoint_dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(config.checkpoint_dir)) {
    if (entry.path().extension() == ".ckpt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::io, "no .ckpt files in " + config.checkpoint_dir.string());
  std::vector<HypergraphQModel> models;
  for (const auto& f : files) models.push_back(load_model(f.string()));
  const auto stats = analyze_representations(models, config.env, config.steps);

  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "reps.csv", representation_csv(stats, describe(config)));
  std::vector<svg::Bar> bars;
  for (const auto& e : stats.edges) {
    std::string name = "{";
    for (std::size_t i = 0; i < e.vertices.size(); ++i) name += (i ? "," : "") + std::to_string(e.vertices[i]);
    name += "}";
    bars.push_back({name, "mean", e.mean, 0.0});
  }
  write_text(config.out_dir / "reps.svg",
             svg::bar_chart({"Greedy action representation per hyperedge", "hyperedge", "mean value", false}, bars));
  return stats;
}

// ---- score normalization -------------------------------------------------------

double normalized_score(double agent, double human, double random) {
  if (human == random) throw Error(ErrorCode::undefined_normalization, "human and random scores coincide");
  return (agent - random) / (human - random);
}

double relative_score(double score_a, double score_b, double human, double random) {
  const double denom = std::max(score_b, human) - random;
  if (denom == 0.0) throw Error(ErrorCode::undefined_normalization, "relative score denominator is zero");
  return (score_a - score_b) / denom;
}

}  // namespace hyperq::exp
