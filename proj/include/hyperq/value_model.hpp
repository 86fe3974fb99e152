#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperq/action_space.hpp"
#include "hyperq/hypergraph.hpp"
#include "hyperq/nn.hpp"
#include "hyperq/rng.hpp"

namespace hyperq {

enum class MixerKind { summation, universal };
enum class BlockKind { tabular, neural };

std::string_view to_string(MixerKind k);
MixerKind parse_mixer(std::string_view s);

struct ModelConfig {
  ActionSpace space;
  Hypergraph hypergraph;
  BlockKind block_kind = BlockKind::tabular;
  /// Neural models only: state width, torso hidden layers (empty means the
  /// blocks read the raw state), and the hidden units shared out across heads.
  std::size_t observation_width = 0;
  std::vector<std::size_t> torso_hidden;
  std::size_t head_hidden_total = 0;
  MixerKind mixer = MixerKind::summation;
  std::size_t mixer_hidden = 10;
  nn::Activation mixer_activation = nn::Activation::relu;
};

/// Hidden units per head when `total_hidden_units` are split across `n_heads`.
std::size_t head_width(std::size_t total_hidden_units, std::size_t n_heads);

/// One value per hyperedge for a fixed (state, action).
struct ActionRepresentation {
  std::vector<double> values;
};

/// Q(s, a) = mixer(U_1(psi(s), a^{E_1}), ..., U_Ne(psi(s), a^{E_Ne})).
///
/// All parameters (torso, heads or tables, mixer) live in one ParamStore so
/// one Adam state covers the whole model. Copying a model copies its
/// parameters, which is how target networks are made.
class HypergraphQModel {
 public:
  /// Scratch state from `evaluate`; valid until the model's parameters change.
  /// Block views point either into the model's tables or into head caches.
  struct Workspace {
    nn::ForwardCache torso_cache;
    std::vector<nn::ForwardCache> head_caches;
    std::vector<std::span<const double>> blocks;
    std::vector<double> input;
    std::span<const double> features;
    std::vector<double> scratch_repr;
    std::vector<double> scratch_grad;
    nn::ForwardCache mixer_cache;
    const HypergraphQModel* owner = nullptr;

    Workspace() = default;
    Workspace(Workspace&&) = default;
    Workspace& operator=(Workspace&&) = default;
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;
  };

  HypergraphQModel() = default;
  explicit HypergraphQModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ActionSpace& space() const { return config_.space; }
  const Hypergraph& hypergraph() const { return config_.hypergraph; }
  std::size_t n_edges() const { return config_.hypergraph.n_edges(); }
  std::size_t param_count() const { return params_.size(); }

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  std::span<double> block_table(std::size_t edge);
  std::span<const double> block_table(std::size_t edge) const;
  std::span<double> mixer_params();
  const std::optional<nn::DenseNetworkSpec>& mixer_spec() const { return mixer_spec_; }
  const std::optional<nn::DenseNetworkSpec>& torso_spec() const { return torso_spec_; }
  const nn::DenseNetworkSpec& head_spec(std::size_t edge) const { return head_specs_.at(edge); }
  std::span<double> torso_params();
  std::span<double> head_params(std::size_t edge);
  const EdgeIndexer& indexer(std::size_t edge) const { return indexers_[edge]; }
  /// Output slot of block `edge` used by flat action `a`.
  std::size_t local_index(std::size_t edge, FlatActionIndex a) const {
    return gather_table_ ? (*gather_table_)[a * n_edges() + edge] : indexers_[edge].local_index(a);
  }

  /// Tables zero; torso, heads and mixer Xavier-uniform with zero biases.
  void initialize(Rng& rng);

  void evaluate(std::span<const double> state, Workspace& ws) const;
  void gather(const Workspace& ws, FlatActionIndex a, std::span<double> repr) const;
  double mix(std::span<const double> repr, nn::ForwardCache& cache) const;
  double q_value(Workspace& ws, FlatActionIndex a) const;
  std::vector<double> q_values_all(Workspace& ws) const;
  /// Adds dq * dQ(s, a)/dtheta into `grads` (length param_count()).
  void accumulate_gradient(Workspace& ws, FlatActionIndex a, double dq,
                           std::span<double> grads) const;

  ActionRepresentation action_representation(std::span<const double> state,
                                             std::span<const std::size_t> a) const;
  double q_value(std::span<const double> state, std::span<const std::size_t> a) const;
  std::vector<double> q_values_all(std::span<const double> state) const;
  /// Exhaustive argmax; ties go to the lowest flat index.
  FlatActionIndex greedy_action(std::span<const double> state) const;
  FlatActionIndex greedy_action(Workspace& ws) const;
  /// Per-vertex argmax. Requires a 1-complete hypergraph and a summation mixer.
  FlatActionIndex decentralized_greedy(std::span<const double> state) const;

  std::vector<std::string> header_lines() const;

 private:
  void check_action(std::span<const std::size_t> a) const;

  ModelConfig config_;
  nn::ParamStore params_;
  std::vector<EdgeIndexer> indexers_;
  // Precomputed local indices, [action][edge]; shared between copies.
  std::shared_ptr<const std::vector<std::uint32_t>> gather_table_;
  std::vector<std::size_t> block_offsets_;
  std::vector<std::size_t> block_sizes_;
  std::optional<nn::DenseNetworkSpec> torso_spec_;
  std::size_t torso_offset_ = 0;
  std::vector<nn::DenseNetworkSpec> head_specs_;
  std::optional<nn::DenseNetworkSpec> mixer_spec_;
  std::size_t mixer_offset_ = 0;
};

void save_model(const HypergraphQModel& model, const std::string& path);
void save_model(const HypergraphQModel& model, std::ostream& os);
/// Throws `incompatible_checkpoint` for malformed files or layout mismatches.
HypergraphQModel load_model(const std::string& path);
HypergraphQModel load_model(std::istream& is);

std::string encode_edges(const Hypergraph& h);
Hypergraph decode_edges(std::size_t n_vertices, std::string_view text);

struct TableFit {
  std::vector<std::vector<double>> tables;  // one per edge
  double rms_residual = 0.0;
};

/// Least-squares block tables for a summation model over `target`
/// (indexed by flat action), minimum-norm when the design is rank deficient.
TableFit fit_summation_tables(const ActionSpace& space, const Hypergraph& h,
                              std::span<const double> target);

}  // namespace hyperq
