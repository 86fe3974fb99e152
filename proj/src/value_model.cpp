#include "hyperq/value_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hyperq/error.hpp"

namespace hyperq {

std::string_view to_string(MixerKind k) {
  return k == MixerKind::summation ? "sum" : "universal";
}

MixerKind parse_mixer(std::string_view s) {
  if (s == "sum" || s == "summation") return MixerKind::summation;
  if (s == "universal" || s == "uni") return MixerKind::universal;
  throw Error(ErrorCode::config, "unknown mixer '" + std::string(s) + "'");
}

std::size_t head_width(std::size_t total_hidden_units, std::size_t n_heads) {
  if (total_hidden_units == 0 || n_heads == 0) {
    throw Error(ErrorCode::range, "head_width needs positive arguments");
  }
  return (total_hidden_units + n_heads - 1) / n_heads;
}

HypergraphQModel::HypergraphQModel(ModelConfig config) : config_(std::move(config)) {
  const auto& h = config_.hypergraph;
  if (h.n_vertices() != config_.space.n_vertices()) {
    throw Error(ErrorCode::dimension, "hypergraph and action space disagree on vertex count");
  }
  if (auto report = validate(h); !report.ok()) {
    throw Error(ErrorCode::invalid_hypergraph, report.message);
  }
  const std::size_t ne = h.n_edges();
  for (std::size_t j = 0; j < ne; ++j) indexers_.emplace_back(h.edge(j), config_.space);
  const std::size_t n_actions = config_.space.total_size();
  if (n_actions <= (std::size_t{1} << 24) / std::max<std::size_t>(ne, 1)) {
    auto table = std::make_shared<std::vector<std::uint32_t>>(n_actions * ne);
    for (std::size_t a = 0; a < n_actions; ++a) {
      for (std::size_t j = 0; j < ne; ++j) {
        (*table)[a * ne + j] = static_cast<std::uint32_t>(indexers_[j].local_index(a));
      }
    }
    gather_table_ = std::move(table);
  }

  if (config_.block_kind == BlockKind::neural) {
    if (config_.observation_width == 0 || config_.head_hidden_total == 0) {
      throw Error(ErrorCode::config, "neural blocks need observation_width and head_hidden_total");
    }
    std::size_t feature_width = config_.observation_width;
    if (!config_.torso_hidden.empty()) {
      nn::DenseNetworkSpec torso;
      torso.layer_sizes.push_back(config_.observation_width);
      for (std::size_t w : config_.torso_hidden) {
        torso.layer_sizes.push_back(w);
        torso.activations.push_back(nn::Activation::relu);
      }
      torso_offset_ = params_.add_network("torso", torso);
      torso_spec_ = torso;
      feature_width = config_.torso_hidden.back();
    }
    const std::size_t hw = head_width(config_.head_hidden_total, ne);
    for (std::size_t j = 0; j < ne; ++j) {
      auto spec = nn::DenseNetworkSpec::mlp(feature_width, {hw}, indexers_[j].output_count());
      block_offsets_.push_back(params_.add_network("head" + std::to_string(j), spec));
      block_sizes_.push_back(spec.param_count());
      head_specs_.push_back(std::move(spec));
    }
  } else {
    for (std::size_t j = 0; j < ne; ++j) {
      block_offsets_.push_back(params_.add("table" + std::to_string(j), indexers_[j].output_count()));
      block_sizes_.push_back(indexers_[j].output_count());
    }
  }
  if (config_.mixer == MixerKind::universal) {
    nn::DenseNetworkSpec mixer;
    mixer.layer_sizes = {ne, config_.mixer_hidden, 1};
    mixer.activations = {config_.mixer_activation, nn::Activation::linear};
    mixer_offset_ = params_.add_network("mixer", mixer);
    mixer_spec_ = mixer;
  }
}

std::span<double> HypergraphQModel::block_table(std::size_t edge) {
  if (config_.block_kind != BlockKind::tabular) throw Error(ErrorCode::usage, "model has no tables");
  return params_.view(block_offsets_.at(edge), block_sizes_.at(edge));
}

std::span<const double> HypergraphQModel::block_table(std::size_t edge) const {
  if (config_.block_kind != BlockKind::tabular) throw Error(ErrorCode::usage, "model has no tables");
  return params_.view(block_offsets_.at(edge), block_sizes_.at(edge));
}

std::span<double> HypergraphQModel::mixer_params() {
  if (!mixer_spec_) return {};
  return params_.view(mixer_offset_, mixer_spec_->param_count());
}

std::span<double> HypergraphQModel::torso_params() {
  if (!torso_spec_) return {};
  return params_.view(torso_offset_, torso_spec_->param_count());
}

std::span<double> HypergraphQModel::head_params(std::size_t edge) {
  if (config_.block_kind != BlockKind::neural) throw Error(ErrorCode::usage, "model has no heads");
  return params_.view(block_offsets_.at(edge), block_sizes_.at(edge));
}

void HypergraphQModel::initialize(Rng& rng) {
  if (torso_spec_) {
    Rng r = rng.split("torso");
    nn::init_xavier(*torso_spec_, torso_params(), r);
  }
  for (std::size_t j = 0; j < n_edges(); ++j) {
    if (config_.block_kind == BlockKind::neural) {
      Rng r = rng.split("head").split(j);
      nn::init_xavier(head_specs_[j], head_params(j), r);
    } else {
      auto t = block_table(j);
      std::fill(t.begin(), t.end(), 0.0);
    }
  }
  if (mixer_spec_) {
    Rng r = rng.split("mixer");
    nn::init_xavier(*mixer_spec_, mixer_params(), r);
  }
}

void HypergraphQModel::evaluate(std::span<const double> state, Workspace& ws) const {
  const std::size_t ne = n_edges();
  ws.owner = this;
  ws.blocks.resize(ne);
  ws.scratch_repr.resize(ne);
  ws.scratch_grad.resize(ne);
  const auto all = params_.values();
  if (config_.block_kind == BlockKind::tabular) {
    for (std::size_t j = 0; j < ne; ++j) ws.blocks[j] = all.subspan(block_offsets_[j], block_sizes_[j]);
    return;
  }
  if (state.size() != config_.observation_width) {
    throw Error(ErrorCode::dimension, "state width " + std::to_string(state.size()) + " != " +
                                          std::to_string(config_.observation_width));
  }
  ws.input.assign(state.begin(), state.end());
  if (torso_spec_) {
    ws.features = nn::forward(*torso_spec_, all.subspan(torso_offset_, torso_spec_->param_count()),
                              ws.input, ws.torso_cache);
  } else {
    ws.features = ws.input;
  }
  ws.head_caches.resize(ne);
  for (std::size_t j = 0; j < ne; ++j) {
    ws.blocks[j] = nn::forward(head_specs_[j], all.subspan(block_offsets_[j], block_sizes_[j]),
                               ws.features, ws.head_caches[j]);
  }
}

void HypergraphQModel::gather(const Workspace& ws, FlatActionIndex a, std::span<double> repr) const {
  if (gather_table_) {
    const std::uint32_t* row = gather_table_->data() + a * repr.size();
    for (std::size_t j = 0; j < repr.size(); ++j) repr[j] = ws.blocks[j][row[j]];
    return;
  }
  for (std::size_t j = 0; j < repr.size(); ++j) repr[j] = ws.blocks[j][indexers_[j].local_index(a)];
}

double HypergraphQModel::mix(std::span<const double> repr, nn::ForwardCache& cache) const {
  if (!mixer_spec_) {
    double s = 0.0;
    for (double x : repr) s += x;
    return s;
  }
  const auto all = params_.values();
  return nn::forward(*mixer_spec_, all.subspan(mixer_offset_, mixer_spec_->param_count()), repr,
                     cache)[0];
}

double HypergraphQModel::q_value(Workspace& ws, FlatActionIndex a) const {
  gather(ws, a, ws.scratch_repr);
  return mix(ws.scratch_repr, ws.mixer_cache);
}

std::vector<double> HypergraphQModel::q_values_all(Workspace& ws) const {
  const std::size_t n = space().total_size();
  std::vector<double> q(n);
  if (!mixer_spec_) {
    // Block-wise accumulation: every output is read once per action it serves.
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t j = 0; j < n_edges(); ++j) {
      const auto block = ws.blocks[j];
      for (std::size_t a = 0; a < n; ++a) q[a] += block[local_index(j, a)];
    }
    return q;
  }
  for (std::size_t a = 0; a < n; ++a) q[a] = q_value(ws, a);
  return q;
}

void HypergraphQModel::accumulate_gradient(Workspace& ws, FlatActionIndex a, double dq,
                                           std::span<double> grads) const {
  if (grads.size() != params_.size()) throw Error(ErrorCode::dimension, "gradient buffer size");
  if (ws.owner != this) throw Error(ErrorCode::usage, "workspace was evaluated on another model");
  const std::size_t ne = n_edges();
  auto& repr_grad = ws.scratch_grad;
  if (mixer_spec_) {
    gather(ws, a, ws.scratch_repr);
    const auto all = params_.values();
    const auto mp = all.subspan(mixer_offset_, mixer_spec_->param_count());
    nn::forward(*mixer_spec_, mp, ws.scratch_repr, ws.mixer_cache);
    const double out_grad[1] = {dq};
    nn::backward(*mixer_spec_, mp, ws.mixer_cache, out_grad,
                 grads.subspan(mixer_offset_, mixer_spec_->param_count()), repr_grad);
  } else {
    std::fill(repr_grad.begin(), repr_grad.end(), dq);
  }

  if (config_.block_kind == BlockKind::tabular) {
    for (std::size_t j = 0; j < ne; ++j) {
      grads[block_offsets_[j] + local_index(j, a)] += repr_grad[j];
    }
    return;
  }

  const auto all = params_.values();
  thread_local std::vector<double> out_grad, feat_grad, feat_total;
  feat_total.assign(ws.features.size(), 0.0);
  feat_grad.resize(ws.features.size());
  for (std::size_t j = 0; j < ne; ++j) {
    if (repr_grad[j] == 0.0) continue;
    out_grad.assign(indexers_[j].output_count(), 0.0);
    out_grad[local_index(j, a)] = repr_grad[j];
    const auto hp = all.subspan(block_offsets_[j], block_sizes_[j]);
    nn::backward(head_specs_[j], hp, ws.head_caches[j], out_grad,
                 grads.subspan(block_offsets_[j], block_sizes_[j]),
                 torso_spec_ ? std::span<double>(feat_grad) : std::span<double>());
    if (torso_spec_) {
      for (std::size_t k = 0; k < feat_total.size(); ++k) feat_total[k] += feat_grad[k];
    }
  }
  if (torso_spec_) {
    const std::size_t np = torso_spec_->param_count();
    nn::backward(*torso_spec_, all.subspan(torso_offset_, np), ws.torso_cache, feat_total,
                 grads.subspan(torso_offset_, np));
  }
}

void HypergraphQModel::check_action(std::span<const std::size_t> a) const {
  if (!space().contains(a)) throw Error(ErrorCode::invalid_action, "action not in model's space");
}

ActionRepresentation HypergraphQModel::action_representation(std::span<const double> state,
                                                             std::span<const std::size_t> a) const {
  check_action(a);
  Workspace ws;
  evaluate(state, ws);
  ActionRepresentation r{std::vector<double>(n_edges())};
  gather(ws, tuple_to_flat(space(), a), r.values);
  return r;
}

double HypergraphQModel::q_value(std::span<const double> state,
                                 std::span<const std::size_t> a) const {
  check_action(a);
  Workspace ws;
  evaluate(state, ws);
  return q_value(ws, tuple_to_flat(space(), a));
}

std::vector<double> HypergraphQModel::q_values_all(std::span<const double> state) const {
  Workspace ws;
  evaluate(state, ws);
  return q_values_all(ws);
}

FlatActionIndex HypergraphQModel::greedy_action(Workspace& ws) const {
  const auto q = q_values_all(ws);
  // max_element returns the first maximum, i.e. the lowest flat index on ties.
  return static_cast<FlatActionIndex>(std::max_element(q.begin(), q.end()) - q.begin());
}

FlatActionIndex HypergraphQModel::greedy_action(std::span<const double> state) const {
  Workspace ws;
  evaluate(state, ws);
  return greedy_action(ws);
}

FlatActionIndex HypergraphQModel::decentralized_greedy(std::span<const double> state) const {
  const auto& h = hypergraph();
  if (mixer_spec_) {
    throw Error(ErrorCode::unsupported_structure,
                "decentralized maximization needs a summation mixer");
  }
  if (h.rank() != 1 || h.n_edges() != h.n_vertices()) {
    throw Error(ErrorCode::unsupported_structure,
                "decentralized maximization needs a 1-complete hypergraph");
  }
  Workspace ws;
  evaluate(state, ws);
  ActionTuple a(space().n_vertices());
  for (std::size_t j = 0; j < h.n_edges(); ++j) {
    const auto block = ws.blocks[j];
    a[h.edge(j).vertices()[0]] =
        static_cast<std::size_t>(std::max_element(block.begin(), block.end()) - block.begin());
  }
  return tuple_to_flat(space(), a);
}

std::string encode_edges(const Hypergraph& h) {
  std::string out;
  for (std::size_t j = 0; j < h.n_edges(); ++j) {
    if (j) out += ';';
    const auto& v = h.edge(j).vertices();
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(v[k]);
    }
  }
  return out;
}

Hypergraph decode_edges(std::size_t n_vertices, std::string_view text) {
  std::vector<std::vector<std::size_t>> edges;
  std::stringstream ss{std::string(text)};
  std::string edge;
  while (std::getline(ss, edge, ';')) {
    std::vector<std::size_t> vs;
    std::stringstream es(edge);
    std::string v;
    while (std::getline(es, v, ',')) {
      try {
        vs.push_back(std::stoul(v));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::config, "bad edge list '" + std::string(text) + "'");
      }
    }
    edges.push_back(std::move(vs));
  }
  return Hypergraph::checked(n_vertices, edges);
}

std::vector<std::string> HypergraphQModel::header_lines() const {
  std::vector<std::string> lines;
  std::string space_line = "space";
  for (std::size_t c : space().cardinalities()) space_line += " " + std::to_string(c);
  lines.push_back(space_line);
  lines.push_back("edges " + encode_edges(hypergraph()));
  lines.push_back(std::string("block_kind ") +
                  (config_.block_kind == BlockKind::tabular ? "tabular" : "neural"));
  lines.push_back("observation_width " + std::to_string(config_.observation_width));
  std::string torso = "torso_hidden";
  for (std::size_t w : config_.torso_hidden) torso += " " + std::to_string(w);
  lines.push_back(torso);
  lines.push_back("head_hidden_total " + std::to_string(config_.head_hidden_total));
  lines.push_back("mixer " + std::string(to_string(config_.mixer)));
  lines.push_back("mixer_hidden " + std::to_string(config_.mixer_hidden));
  lines.push_back("mixer_activation " + std::string(nn::to_string(config_.mixer_activation)));
  if (torso_spec_) lines.push_back("spec torso " + nn::encode_spec(*torso_spec_));
  for (std::size_t j = 0; j < head_specs_.size(); ++j) {
    lines.push_back("spec head" + std::to_string(j) + " " + nn::encode_spec(head_specs_[j]));
  }
  if (mixer_spec_) lines.push_back("spec mixer " + nn::encode_spec(*mixer_spec_));
  for (const auto& s : params_.slices()) {
    lines.push_back("slice " + s.name + " " + std::to_string(s.offset) + " " + std::to_string(s.size));
  }
  return lines;
}

void save_model(const HypergraphQModel& model, std::ostream& os) {
  nn::save_checkpoint(os, model.header_lines(), model.params().values());
}

void save_model(const HypergraphQModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
  save_model(model, os);
}

HypergraphQModel load_model(std::istream& is) {
  auto ck = nn::load_checkpoint(is);
  ModelConfig cfg;
  std::string edges;
  auto bad = [](const std::string& why) { return Error(ErrorCode::incompatible_checkpoint, why); };
  try {
    for (const auto& line : ck.header_lines) {
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "space") {
        std::vector<std::size_t> cards;
        std::size_t c;
        while (ls >> c) cards.push_back(c);
        cfg.space = ActionSpace(cards);
      } else if (key == "edges") {
        ls >> edges;
      } else if (key == "block_kind") {
        std::string k;
        ls >> k;
        cfg.block_kind = k == "neural" ? BlockKind::neural : BlockKind::tabular;
      } else if (key == "observation_width") {
        ls >> cfg.observation_width;
      } else if (key == "torso_hidden") {
        std::size_t w;
        while (ls >> w) cfg.torso_hidden.push_back(w);
      } else if (key == "head_hidden_total") {
        ls >> cfg.head_hidden_total;
      } else if (key == "mixer") {
        std::string k;
        ls >> k;
        cfg.mixer = parse_mixer(k);
      } else if (key == "mixer_hidden") {
        ls >> cfg.mixer_hidden;
      } else if (key == "mixer_activation") {
        std::string k;
        ls >> k;
        cfg.mixer_activation = nn::parse_activation(k);
      }
    }
    if (cfg.space.n_vertices() == 0) throw bad("checkpoint has no action space");
    cfg.hypergraph = decode_edges(cfg.space.n_vertices(), edges);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::incompatible_checkpoint) throw;
    throw bad(e.what());
  }
  HypergraphQModel model(cfg);
  if (model.header_lines() != ck.header_lines) throw bad("parameter layout does not match header");
  if (ck.params.size() != model.param_count()) throw bad("parameter count mismatch");
  std::copy(ck.params.begin(), ck.params.end(), model.params().values().begin());
  return model;
}

HypergraphQModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  return load_model(is);
}

TableFit fit_summation_tables(const ActionSpace& space, const Hypergraph& h,
                              std::span<const double> target) {
  if (target.size() != space.total_size()) throw Error(ErrorCode::dimension, "target table size");
  std::vector<EdgeIndexer> ix;
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  for (const auto& e : h.edges()) {
    ix.emplace_back(e, space);
    offsets.push_back(cols);
    cols += ix.back().output_count();
  }
  const auto rows = static_cast<Eigen::Index>(space.total_size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(cols));
  Eigen::VectorXd y(rows);
  for (std::size_t a = 0; a < space.total_size(); ++a) {
    const auto r = static_cast<Eigen::Index>(a);
    y(r) = target[a];
    for (std::size_t j = 0; j < ix.size(); ++j) {
      design(r, static_cast<Eigen::Index>(offsets[j] + ix[j].local_index(a))) = 1.0;
    }
  }
  const Eigen::VectorXd x = design.completeOrthogonalDecomposition().solve(y);
  const Eigen::VectorXd residual = design * x - y;
  TableFit fit;
  fit.rms_residual = std::sqrt(residual.squaredNorm() / static_cast<double>(rows));
  for (std::size_t j = 0; j < ix.size(); ++j) {
    fit.tables.emplace_back(x.data() + offsets[j], x.data() + offsets[j] + ix[j].output_count());
  }
  return fit;
}

}  // namespace hyperq
