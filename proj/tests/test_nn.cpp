#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hyperq/error.hpp"
#include "hyperq/nn.hpp"
#include "hyperq/rng.hpp"

using namespace hyperq;
using namespace hyperq::nn;

namespace {

double plain_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct evaluation of a dense network from its row-major layout.
std::vector<double> reference_forward(const DenseNetworkSpec& spec, const std::vector<double>& p,
                                      std::vector<double> x) {
  for (std::size_t l = 0; l < spec.n_transitions(); ++l) {
    const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double z = p[spec.bias_offset(l) + o];
      for (std::size_t i = 0; i < in; ++i) z += p[spec.weight_offset(l) + o * in + i] * x[i];
      switch (spec.activations[l]) {
        case Activation::relu: y[o] = z > 0 ? z : 0; break;
        case Activation::tanh: y[o] = std::tanh(z); break;
        case Activation::sigmoid: y[o] = plain_sigmoid(z); break;
        case Activation::linear: y[o] = z; break;
      }
    }
    x = std::move(y);
  }
  return x;
}

DenseNetworkSpec random_spec(Rng& rng) {
  DenseNetworkSpec s;
  const std::size_t depth = 1 + rng.uniform_index(3);
  s.layer_sizes.push_back(1 + rng.uniform_index(5));
  for (std::size_t l = 0; l < depth; ++l) {
    s.layer_sizes.push_back(1 + rng.uniform_index(6));
    s.activations.push_back(kAllActivations[rng.uniform_index(4)]);
  }
  return s;
}

}  // namespace

TEST(Activations, ValuesAndDerivatives) {
  EXPECT_EQ(activate(Activation::relu, -1.5), 0.0);
  EXPECT_EQ(activate(Activation::relu, 2.5), 2.5);
  EXPECT_EQ(activate_grad(Activation::relu, 0.0, 0.0), 0.0);
  EXPECT_EQ(activate_grad(Activation::relu, 1e-300, 1e-300), 1.0);
  EXPECT_NEAR(activate(Activation::sigmoid, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(activate(Activation::tanh, 0.3), std::tanh(0.3), 1e-15);
  for (double x : {-3.0, -0.2, 0.0, 0.7, 4.0}) {
    const double s = activate(Activation::sigmoid, x);
    EXPECT_NEAR(activate_grad(Activation::sigmoid, x, s), s * (1 - s), 1e-15);
    const double t = activate(Activation::tanh, x);
    EXPECT_NEAR(activate_grad(Activation::tanh, x, t), 1 - t * t, 1e-15);
    EXPECT_EQ(activate_grad(Activation::linear, x, x), 1.0);
  }
}

TEST(Activations, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(activate(Activation::sigmoid, -800.0), 0.0);
  EXPECT_EQ(activate(Activation::sigmoid, 800.0), 1.0);
  EXPECT_TRUE(std::isfinite(activate(Activation::sigmoid, -1e308)));
}

TEST(Activations, NamesRoundTrip) {
  for (auto a : kAllActivations) EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_THROW(parse_activation("swish"), Error);
}

TEST(DenseNetwork, ParamCountAndLayout) {
  const auto spec = DenseNetworkSpec::mlp(3, {4}, 2);
  EXPECT_EQ(spec.param_count(), 3u * 4 + 4 + 4 * 2 + 2);
  EXPECT_EQ(spec.weight_offset(0), 0u);
  EXPECT_EQ(spec.bias_offset(0), 12u);
  EXPECT_EQ(spec.weight_offset(1), 16u);
  EXPECT_EQ(spec.activations.back(), Activation::linear);
}

TEST(DenseNetwork, SpecTextRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_spec(rng);
    const auto back = decode_spec(encode_spec(s));
    EXPECT_EQ(back.layer_sizes, s.layer_sizes);
    EXPECT_EQ(back.activations, s.activations);
  }
  EXPECT_EQ(encode_spec(DenseNetworkSpec::mlp(7, {10}, 1)), "7,10:relu,1:linear");
  EXPECT_THROW(decode_spec("7,x:relu"), Error);
}

TEST(DenseNetwork, ForwardMatchesReference) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = random_spec(rng);
    const auto p = uniform_init(rng, -1, 1, spec.param_count());
    const auto x = uniform_init(rng, -2, 2, spec.input_size());
    const auto got = forward(spec, p, x);
    const auto want = reference_forward(spec, p, x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(DenseNetwork, HandComputedTwoLayerNet) {
  // 2 -> 2 (relu) -> 1 (linear)
  DenseNetworkSpec spec{{2, 2, 1}, {Activation::relu, Activation::linear}};
  const std::vector<double> p{1, -1, 0.5, 2, 0, -3, 2, 1, 0.25};
  // hidden: relu(1*1 - 1*2 + 0) = 0, relu(0.5*1 + 2*2 - 3) = 1.5; out: 2*0 + 1*1.5 + 0.25
  EXPECT_DOUBLE_EQ(forward(spec, p, std::vector<double>{1, 2})[0], 1.75);
}

TEST(DenseNetwork, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const auto spec = random_spec(rng);
    std::vector<double> p(spec.param_count());
    init_xavier(spec, p, rng);
    for (auto& b : p) b += rng.uniform(-0.3, 0.3);
    const auto x = uniform_init(rng, -1, 1, spec.input_size());
    const auto res = grad_check(spec, p, x, 1e-5);
    EXPECT_TRUE(res.passed) << encode_spec(spec) << " worst " << res.worst_relative_error;
  }
}

TEST(DenseNetwork, BackwardAccumulatesAndRejectsStaleCache) {
  const auto spec = DenseNetworkSpec::mlp(2, {3}, 1, Activation::tanh);
  Rng rng(4);
  std::vector<double> p(spec.param_count());
  init_xavier(spec, p, rng);
  ForwardCache cache;
  forward(spec, p, std::vector<double>{0.3, -0.4}, cache);
  std::vector<double> g1(p.size(), 0.0), g2(p.size(), 0.0);
  const std::vector<double> og{1.0};
  backward(spec, p, cache, og, g1);
  backward(spec, p, cache, og, g2);
  backward(spec, p, cache, og, g2);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(g2[i], 2 * g1[i], 1e-15);

  std::vector<double> other = p;
  EXPECT_THROW(backward(spec, other, cache, og, g1), Error);
  ForwardCache empty;
  EXPECT_THROW(backward(spec, p, empty, og, g1), Error);
}

TEST(Adam, MatchesTextbookUpdate) {
  Rng rng(8);
  const std::size_t n = 37;
  AdamConfig cfg{0.01, 0.9, 0.999, 1e-3};
  AdamState st(cfg, n);
  auto params = uniform_init(rng, -1, 1, n);
  auto ref = params;
  std::vector<double> m(n, 0), v(n, 0);
  for (int t = 1; t <= 25; ++t) {
    const auto g = uniform_init(rng, -2, 2, n);
    adam_step(st, params, g);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
      ref[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    }
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(params[i], ref[i], 1e-12);
  EXPECT_EQ(st.t, 25u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState st(AdamConfig{0.001, 0.9, 0.999, 1e-8}, 3);
  std::vector<double> p{0, 0, 0};
  const std::vector<double> g{5.0, -0.01, 0.0};
  adam_step(st, p, g);
  EXPECT_NEAR(p[0], -0.001, 1e-9);
  EXPECT_NEAR(p[1], 0.001, 1e-6);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Init, XavierBoundsAndZeroBiases) {
  Rng rng(12);
  const auto spec = DenseNetworkSpec::mlp(30, {20}, 10);
  std::vector<double> p(spec.param_count(), 7.0);
  init_xavier(spec, p, rng);
  for (std::size_t l = 0; l < spec.n_transitions(); ++l) {
    const double fan_in = static_cast<double>(spec.layer_sizes[l]);
    const double fan_out = static_cast<double>(spec.layer_sizes[l + 1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = spec.weight_offset(l); i < spec.bias_offset(l); ++i) {
      EXPECT_LE(std::abs(p[i]), bound);
    }
    for (std::size_t i = spec.bias_offset(l); i < spec.bias_offset(l) + spec.layer_sizes[l + 1]; ++i) {
      EXPECT_EQ(p[i], 0.0);
    }
  }
  EXPECT_THROW(uniform_init(rng, 1.0, 1.0, 3), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  const auto params = uniform_init(rng, -1e6, 1e6, 100);
  std::stringstream ss;
  save_checkpoint(ss, {"spec 3,4:relu,1:linear", "note x"}, params);
  const auto loaded = load_checkpoint(ss);
  EXPECT_EQ(loaded.params, params);
  EXPECT_EQ(loaded.header_lines, (std::vector<std::string>{"spec 3,4:relu,1:linear", "note x"}));
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("not a checkpoint\n");
  EXPECT_THROW(load_checkpoint(ss), Error);
  std::stringstream truncated;
  save_checkpoint(truncated, {}, std::vector<double>{1, 2, 3});
  std::string s = truncated.str();
  s.resize(s.size() - 4);
  std::stringstream cut(s);
  EXPECT_THROW(load_checkpoint(cut), Error);
}
