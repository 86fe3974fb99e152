#pragma once

// Dense networks with reverse-mode gradients, Adam, and initializers.
//
// Parameter layout for a network: for each layer transition l, a row-major
// weight matrix [out][in] followed by the bias vector [out]. Networks read
// their parameters from a span so several networks can share one flat store.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperq/rng.hpp"

namespace hyperq::nn {

enum class Activation { relu, tanh, sigmoid, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

inline constexpr Activation kAllActivations[] = {Activation::relu, Activation::tanh,
                                                 Activation::sigmoid, Activation::linear};

double activate(Activation a, double x);
/// Derivative given the pre-activation `x` and the output `y`. ReLU'(0) = 0.
double activate_grad(Activation a, double x, double y);

struct DenseNetworkSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  std::vector<Activation> activations;   // one per transition

  /// Hidden layers use `hidden`, the output is linear.
  static DenseNetworkSpec mlp(std::size_t input, const std::vector<std::size_t>& hidden,
                              std::size_t output, Activation hidden_activation = Activation::relu);

  std::size_t n_transitions() const { return activations.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t param_count() const;
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
  }
  /// Throws `dimension` when sizes and activations disagree or a size is 0.
  void check() const;

  friend bool operator==(const DenseNetworkSpec&, const DenseNetworkSpec&) = default;
};

/// Encodes e.g. "7:10:relu,1:linear" (input, then size:activation per layer).
std::string encode_spec(const DenseNetworkSpec& spec);
DenseNetworkSpec decode_spec(std::string_view text);

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat 64-bit parameter array partitioned into named, disjoint slices.
class ParamStore {
 public:
  /// Appends a zero-filled slice and returns its offset.
  std::size_t add(std::string name, std::size_t size);
  /// Adds "<prefix>.l<k>.w" / "<prefix>.l<k>.b" slices for a network; returns
  /// the offset of its contiguous block.
  std::size_t add_network(const std::string& prefix, const DenseNetworkSpec& spec);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  const ParamSlice& slice(std::string_view name) const;
  std::span<double> view(std::size_t offset, std::size_t size) {
    return std::span<double>(values_).subspan(offset, size);
  }
  std::span<const double> view(std::size_t offset, std::size_t size) const {
    return std::span<const double>(values_).subspan(offset, size);
  }

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<double> values_;
  std::vector<ParamSlice> slices_;
};

inline bool operator==(const ParamSlice& a, const ParamSlice& b) {
  return a.name == b.name && a.offset == b.offset && a.size == b.size;
}

/// Per-layer pre- and post-activations from a forward pass.
struct ForwardCache {
  std::vector<std::vector<double>> pre;   // [transition][unit]
  std::vector<std::vector<double>> post;  // [layer][unit]; post[0] is the input
  std::vector<std::size_t> layer_sizes;
  const double* params_tag = nullptr;
  bool valid = false;

  std::span<const double> output() const { return post.back(); }
};

/// Runs the network; the output lives in `cache.output()`.
std::span<const double> forward(const DenseNetworkSpec& spec, std::span<const double> params,
                                std::span<const double> input, ForwardCache& cache);
std::vector<double> forward(const DenseNetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input);

/// Accumulates d(output . output_grad)/d(params) into `param_grad` (+=) and
/// writes the input gradient into `input_grad` when it is non-empty. Throws
/// `usage` when the cache does not come from a forward pass of this spec on
/// these params.
void backward(const DenseNetworkSpec& spec, std::span<const double> params,
              const ForwardCache& cache, std::span<const double> output_grad,
              std::span<double> param_grad, std::span<double> input_grad = {});

struct Gradients {
  std::vector<double> params;
  std::vector<double> input;
};
Gradients backward(const DenseNetworkSpec& spec, std::span<const double> params,
                   const ForwardCache& cache, std::span<const double> output_grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 0.0003125;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::size_t n) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam; updates every coordinate (dense semantics).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

std::vector<double> xavier_uniform_init(Rng& rng, std::size_t fan_in, std::size_t fan_out);
/// Throws `range` unless lo < hi.
std::vector<double> uniform_init(Rng& rng, double lo, double hi, std::size_t n);

/// Xavier-uniform weights per layer (one child stream each), zero biases.
void init_xavier(const DenseNetworkSpec& spec, std::span<double> params, Rng& rng);
/// Every weight and bias uniform in [lo, hi].
void init_uniform(const DenseNetworkSpec& spec, std::span<double> params, Rng& rng, double lo,
                  double hi);

struct GradCheckResult {
  bool passed = false;
  double worst_relative_error = 0.0;
  std::size_t worst_index = 0;  // params first, then inputs
};

/// Relative error |a - n| / max(|a|, |n|, 1e-3) between analytic and central
/// finite-difference gradients of output . probe, over every parameter and
/// input coordinate.
GradCheckResult grad_check(const DenseNetworkSpec& spec, std::span<const double> params,
                           std::span<const double> input, double tol, double step = 1e-5);

/// Same check for an arbitrary scalar function and a claimed gradient.
GradCheckResult grad_check_function(
    const std::vector<double>& point, const std::vector<double>& analytic,
    const std::function<double(const std::vector<double>&)>& f, double tol, double step = 1e-5);

/// Checkpoint: text header (spec, slices, count) then little-endian doubles.
void save_checkpoint(std::ostream& os, const std::vector<std::string>& header_lines,
                     std::span<const double> params);
struct LoadedCheckpoint {
  std::vector<std::string> header_lines;
  std::vector<double> params;
};
LoadedCheckpoint load_checkpoint(std::istream& is);

}  // namespace hyperq::nn
