#include "hyperq/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hyperq/error.hpp"

namespace hyperq::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  for (Activation a : kAllActivations) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::config, "unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::linear: return x;
  }
  return x;
}

double activate_grad(Activation a, double x, double y) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

DenseNetworkSpec DenseNetworkSpec::mlp(std::size_t input, const std::vector<std::size_t>& hidden,
                                       std::size_t output, Activation hidden_activation) {
  DenseNetworkSpec s;
  s.layer_sizes.push_back(input);
  for (std::size_t h : hidden) {
    s.layer_sizes.push_back(h);
    s.activations.push_back(hidden_activation);
  }
  s.layer_sizes.push_back(output);
  s.activations.push_back(Activation::linear);
  return s;
}

std::size_t DenseNetworkSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

std::size_t DenseNetworkSpec::weight_offset(std::size_t layer) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer; ++l) n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return n;
}

void DenseNetworkSpec::check() const {
  if (layer_sizes.size() < 2 || activations.size() + 1 != layer_sizes.size()) {
    throw Error(ErrorCode::dimension, "network needs one activation per layer transition");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw Error(ErrorCode::dimension, "layer sizes must be positive");
  }
}

std::string encode_spec(const DenseNetworkSpec& spec) {
  std::ostringstream os;
  os << spec.layer_sizes.front();
  for (std::size_t l = 0; l < spec.n_transitions(); ++l) {
    os << ',' << spec.layer_sizes[l + 1] << ':' << to_string(spec.activations[l]);
  }
  return os.str();
}

DenseNetworkSpec decode_spec(std::string_view text) {
  DenseNetworkSpec spec;
  std::stringstream ss{std::string(text)};
  std::string item;
  bool first = true;
  while (std::getline(ss, item, ',')) {
    try {
      if (first) {
        spec.layer_sizes.push_back(std::stoul(item));
        first = false;
        continue;
      }
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw Error(ErrorCode::config, "bad layer '" + item + "'");
      spec.layer_sizes.push_back(std::stoul(item.substr(0, colon)));
      spec.activations.push_back(parse_activation(item.substr(colon + 1)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::config, "bad network spec '" + std::string(text) + "'");
    }
  }
  spec.check();
  return spec;
}

std::size_t ParamStore::add(std::string name, std::size_t size) {
  const std::size_t offset = values_.size();
  values_.resize(offset + size, 0.0);
  slices_.push_back({std::move(name), offset, size});
  return offset;
}

std::size_t ParamStore::add_network(const std::string& prefix, const DenseNetworkSpec& spec) {
  spec.check();
  const std::size_t base = values_.size();
  for (std::size_t l = 0; l < spec.n_transitions(); ++l) {
    add(prefix + ".l" + std::to_string(l) + ".w", spec.layer_sizes[l] * spec.layer_sizes[l + 1]);
    add(prefix + ".l" + std::to_string(l) + ".b", spec.layer_sizes[l + 1]);
  }
  return base;
}

const ParamSlice& ParamStore::slice(std::string_view name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::usage, "no parameter slice named '" + std::string(name) + "'");
}

std::span<const double> forward(const DenseNetworkSpec& spec, std::span<const double> params,
                                std::span<const double> input, ForwardCache& cache) {
  if (input.size() != spec.input_size()) {
    throw Error(ErrorCode::dimension, "input width " + std::to_string(input.size()) +
                                          " != " + std::to_string(spec.input_size()));
  }
  if (params.size() < spec.param_count()) {
    throw Error(ErrorCode::dimension, "parameter span too short for network");
  }
  const std::size_t n = spec.n_transitions();
  if (cache.layer_sizes != spec.layer_sizes) {
    cache.layer_sizes = spec.layer_sizes;
    cache.pre.resize(n);
    cache.post.resize(n + 1);
    for (std::size_t l = 0; l <= n; ++l) cache.post[l].resize(spec.layer_sizes[l]);
    for (std::size_t l = 0; l < n; ++l) cache.pre[l].resize(spec.layer_sizes[l + 1]);
  }
  std::copy(input.begin(), input.end(), cache.post[0].begin());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < n; ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + in * out;
    const double* x = cache.post[l].data();
    double* z = cache.pre[l].data();
    double* y = cache.post[l + 1].data();
    const Activation act = spec.activations[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      z[o] = acc;
      y[o] = activate(act, acc);
    }
    offset += in * out + out;
  }
  cache.params_tag = params.data();
  cache.valid = true;
  return cache.post[n];
}

std::vector<double> forward(const DenseNetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input) {
  ForwardCache cache;
  auto out = forward(spec, params, input, cache);
  return {out.begin(), out.end()};
}

void backward(const DenseNetworkSpec& spec, std::span<const double> params,
              const ForwardCache& cache, std::span<const double> output_grad,
              std::span<double> param_grad, std::span<double> input_grad) {
  if (!cache.valid || cache.layer_sizes != spec.layer_sizes || cache.params_tag != params.data()) {
    throw Error(ErrorCode::usage, "forward cache does not match this network");
  }
  if (output_grad.size() != spec.output_size()) {
    throw Error(ErrorCode::dimension, "output gradient width mismatch");
  }
  if (param_grad.size() < spec.param_count()) {
    throw Error(ErrorCode::dimension, "parameter gradient span too short");
  }
  if (!input_grad.empty() && input_grad.size() != spec.input_size()) {
    throw Error(ErrorCode::dimension, "input gradient width mismatch");
  }
  const std::size_t n = spec.n_transitions();
  // dL/dy for the current layer's output; reused buffers keep this allocation-light.
  thread_local std::vector<double> grad_out, grad_in;
  grad_out.assign(output_grad.begin(), output_grad.end());
  for (std::size_t l = n; l-- > 0;) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const std::size_t w_off = spec.weight_offset(l);
    const double* w = params.data() + w_off;
    double* gw = param_grad.data() + w_off;
    double* gb = gw + in * out;
    const double* x = cache.post[l].data();
    const double* z = cache.pre[l].data();
    const double* y = cache.post[l + 1].data();
    const bool need_input = l > 0 || !input_grad.empty();
    grad_in.assign(need_input ? in : 0, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = grad_out[o];
      if (g == 0.0) continue;
      const double delta = g * activate_grad(spec.activations[l], z[o], y[o]);
      if (delta == 0.0) continue;
      gb[o] += delta;
      double* gw_row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) gw_row[i] += delta * x[i];
      if (need_input) {
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) grad_in[i] += delta * row[i];
      }
    }
    if (l > 0) grad_out.swap(grad_in);
  }
  if (!input_grad.empty()) {
    const auto& src = n > 0 ? grad_in : grad_out;
    std::copy(src.begin(), src.end(), input_grad.begin());
  }
}

Gradients backward(const DenseNetworkSpec& spec, std::span<const double> params,
                   const ForwardCache& cache, std::span<const double> output_grad) {
  Gradients g{std::vector<double>(spec.param_count(), 0.0),
              std::vector<double>(spec.input_size(), 0.0)};
  backward(spec, params, cache, output_grad, g.params, g.input);
  return g;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorCode::dimension, "adam_step shape mismatch");
  }
  const AdamConfig& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  // Locals keep the loop free of loads that could alias the arrays.
  const double b1 = c.beta1, b2 = c.beta2, eps = c.epsilon;
  const double step = c.learning_rate / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  double* m = state.m.data();
  double* v = state.v.data();
  double* p = params.data();
  const double* g = grads.data();
  const std::size_t n = params.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double mi = b1 * m[i] + (1.0 - b1) * g[i];
    const double vi = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    m[i] = mi;
    v[i] = vi;
    p[i] -= step * mi / (std::sqrt(vi) * inv_sqrt_bc2 + eps);
  }
}

std::vector<double> xavier_uniform_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw Error(ErrorCode::range, "xavier fans must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& x : w) x = rng.uniform(-bound, bound);
  return w;
}

std::vector<double> uniform_init(Rng& rng, double lo, double hi, std::size_t n) {
  if (!(lo < hi)) throw Error(ErrorCode::range, "uniform_init needs lo < hi");
  std::vector<double> out(n);
  for (double& x : out) x = rng.uniform(lo, hi);
  return out;
}

void init_xavier(const DenseNetworkSpec& spec, std::span<double> params, Rng& rng) {
  for (std::size_t l = 0; l < spec.n_transitions(); ++l) {
    Rng layer_rng = rng.split(l);
    const auto w = xavier_uniform_init(layer_rng, spec.layer_sizes[l], spec.layer_sizes[l + 1]);
    std::copy(w.begin(), w.end(), params.begin() + static_cast<std::ptrdiff_t>(spec.weight_offset(l)));
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(spec.bias_offset(l)),
                spec.layer_sizes[l + 1], 0.0);
  }
}

void init_uniform(const DenseNetworkSpec& spec, std::span<double> params, Rng& rng, double lo,
                  double hi) {
  const auto values = uniform_init(rng, lo, hi, spec.param_count());
  std::copy(values.begin(), values.end(), params.begin());
}

namespace {

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
}

}  // namespace

GradCheckResult grad_check_function(const std::vector<double>& point,
                                    const std::vector<double>& analytic,
                                    const std::function<double(const std::vector<double>&)>& f,
                                    double tol, double step) {
  if (point.size() != analytic.size()) throw Error(ErrorCode::dimension, "gradient size mismatch");
  GradCheckResult r;
  std::vector<double> x = point;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    if (err > r.worst_relative_error) {
      r.worst_relative_error = err;
      r.worst_index = i;
    }
  }
  r.passed = r.worst_relative_error < tol;
  return r;
}

GradCheckResult grad_check(const DenseNetworkSpec& spec, std::span<const double> params,
                           std::span<const double> input, double tol, double step) {
  spec.check();
  std::vector<double> probe(spec.output_size());
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = (i % 2 == 0 ? 1.0 : -0.5) / (1.0 + 0.25 * i);

  const std::size_t np = spec.param_count();
  std::vector<double> point(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(np));
  point.insert(point.end(), input.begin(), input.end());

  std::vector<double> analytic(point.size(), 0.0);
  {
    ForwardCache cache;
    forward(spec, params.first(np), input, cache);
    backward(spec, params.first(np), cache, probe, std::span<double>(analytic).first(np),
             std::span<double>(analytic).subspan(np));
  }
  auto objective = [&](const std::vector<double>& x) {
    const auto out = forward(spec, std::span<const double>(x).first(np),
                             std::span<const double>(x).subspan(np));
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * probe[i];
    return s;
  };
  return grad_check_function(point, analytic, objective, tol, step);
}

void save_checkpoint(std::ostream& os, const std::vector<std::string>& header_lines,
                     std::span<const double> params) {
  os << "hyperq-checkpoint 1\n";
  for (const auto& line : header_lines) os << line << '\n';
  os << "params " << params.size() << '\n' << "end_header\n";
  for (double p : params) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(p);
    char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
    os.write(bytes, 8);
  }
  if (!os) throw Error(ErrorCode::io, "failed writing checkpoint");
}

LoadedCheckpoint load_checkpoint(std::istream& is) {
  LoadedCheckpoint ck;
  std::string line;
  if (!std::getline(is, line) || line != "hyperq-checkpoint 1") {
    throw Error(ErrorCode::incompatible_checkpoint, "missing checkpoint magic");
  }
  std::size_t count = 0;
  bool have_count = false;
  while (std::getline(is, line)) {
    if (line == "end_header") break;
    if (line.rfind("params ", 0) == 0) {
      count = std::stoull(line.substr(7));
      have_count = true;
      continue;
    }
    ck.header_lines.push_back(line);
  }
  if (!have_count) throw Error(ErrorCode::incompatible_checkpoint, "checkpoint has no param count");
  ck.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
      throw Error(ErrorCode::incompatible_checkpoint, "truncated parameter array");
    }
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    ck.params[i] = std::bit_cast<double>(bits);
  }
  return ck;
}

}  // namespace hyperq::nn
