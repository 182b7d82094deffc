// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "trigrid/decoder.hpp"

namespace trigrid {
namespace {

Decoder<double> random_decoder(int in, std::vector<int> hidden, int k, unsigned seed,
                               Activation act = Activation::ReLU) {
  auto d = Decoder<double>::zeros(in, hidden, k, act);
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 0.7);
  for (auto& l : d.layers) {
    for (auto& w : l.weight) w = n(rng);
    for (auto& b : l.bias) b = n(rng);
  }
  return d;
}

// Naive oracle: explicit per-element matmul with its own activations.
std::vector<double> oracle_decode(const Decoder<double>& d, std::vector<double> x) {
  for (std::size_t li = 0; li < d.layers.size(); ++li) {
    const auto& l = d.layers[li];
    std::vector<double> y(l.out);
    for (int o = 0; o < l.out; ++o) {
      double acc = l.bias[o];
      for (int i = 0; i < l.in; ++i) acc += l.weight[o * l.in + i] * x[i];
      if (li + 1 < d.layers.size()) {
        acc = d.hidden_activation == Activation::ReLU ? std::max(acc, 0.0) : std::log(1.0 + std::exp(acc));
      }
      y[o] = acc;
    }
    x = y;
  }
  std::vector<double> out(x.size());
  out[0] = std::log(1.0 + std::exp(x[0]));
  for (std::size_t c = 1; c < x.size(); ++c) out[c] = 1.0 / (1.0 + std::exp(-x[c]));
  return out;
}

TEST(Decoder, ZeroParametersGiveClosedFormValues) {
  const auto d = Decoder<double>::zeros(4, std::vector<int>{8}, 3);
  std::vector<double> f{0.3, -1.0, 2.0, 0.5};
  const auto out = decode<double>(d, f);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].sigma, std::log(2.0), 1e-15);
  for (double r : out[0].radiance) EXPECT_EQ(r, 0.5);
}

TEST(Decoder, DensityBiasOnZeroFeature) {
  auto d = Decoder<double>::zeros(3, std::vector<int>{}, 3);
  d.layers[0].bias[0] = 1.7;
  std::vector<double> f(3, 0.0);
  EXPECT_NEAR(decode<double>(d, f)[0].sigma, std::log1p(std::exp(1.7)), 1e-14);
}

TEST(Decoder, MatchesMatmulOracle) {
  for (auto act : {Activation::ReLU, Activation::Softplus}) {
    const auto d = random_decoder(8, {16, 12}, 3, 5, act);
    std::mt19937 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> f(8 * 20);
    for (auto& v : f) v = n(rng);
    const auto out = decode<double>(d, f);
    for (int p = 0; p < 20; ++p) {
      const auto o = oracle_decode(d, std::vector<double>(f.begin() + 8 * p, f.begin() + 8 * p + 8));
      EXPECT_NEAR(out[p].sigma, o[0], 1e-6);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out[p].radiance[c], o[c + 1], 1e-6);
    }
  }
}

TEST(Decoder, Errors) {
  const auto d = random_decoder(4, {8}, 3, 1);
  std::vector<double> bad(6);
  EXPECT_THROW(decode<double>(d, bad), InvalidInput);
  auto broken = d;
  broken.layers[1].in = 7;
  std::vector<double> f(4);
  EXPECT_THROW(decode<double>(broken, f), InvalidInput);
  auto nan = d;
  nan.layers[0].weight[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(decode<double>(nan, f), InvalidState);
  std::vector<double> ds(1), dr(2);
  EXPECT_THROW(decode_backward<double>(d, f, ds, dr), InvalidInput);
}

TEST(DecoderBackward, ZeroUpstreamGivesZeroGradients) {
  const auto d = random_decoder(4, {8}, 3, 2);
  std::vector<double> f{0.1, 0.2, -0.3, 0.4}, ds(1, 0.0), dr(3, 0.0);
  const auto g = decode_backward<double>(d, f, ds, dr);
  for (const auto& l : g.params.layers) {
    for (double v : l.weight) EXPECT_EQ(v, 0.0);
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
  }
  for (double v : g.features) EXPECT_EQ(v, 0.0);
}

TEST(DecoderBackward, LinearLayerOutputSum) {
  // zero parameters put every logit at 0; upstream chosen so d(loss)/d(logit) = 1
  const auto d = Decoder<double>::zeros(3, std::vector<int>{}, 3);
  std::vector<double> f{0.5, -1.5, 2.0};
  std::vector<double> ds{2.0}, dr{4.0, 4.0, 4.0};
  const auto g = decode_backward<double>(d, f, ds, dr);
  const auto& gl = g.params.layers[0];
  for (int o = 0; o < 4; ++o) {
    EXPECT_DOUBLE_EQ(gl.bias[o], 1.0);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(gl.weight[o * 3 + i], f[i]);
  }
}

TEST(DecoderBackward, FiniteDifferences) {
  for (auto act : {Activation::ReLU, Activation::Softplus}) {
    auto d = random_decoder(5, {7, 6}, 3, 9, act);
    std::mt19937 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> f(5 * 4), ds(4), dr(12);
    for (auto& v : f) v = n(rng);
    for (auto& v : ds) v = n(rng);
    for (auto& v : dr) v = n(rng);
    auto loss = [&](const Decoder<double>& dd, const std::vector<double>& ff) {
      const auto out = decode<double>(dd, ff);
      double l = 0.0;
      for (std::size_t p = 0; p < out.size(); ++p) {
        l += ds[p] * out[p].sigma;
        for (int c = 0; c < 3; ++c) l += dr[p * 3 + c] * out[p].radiance[c];
      }
      return l;
    };
    const auto g = decode_backward<double>(d, f, ds, dr);
    const double h = 1e-6;
    auto check = [&](double& param, double analytic, auto&& eval) {
      const double keep = param;
      param = keep + h;
      const double lp = eval();
      param = keep - h;
      const double lm = eval();
      param = keep;
      const double fd = (lp - lm) / (2 * h);
      EXPECT_LT(std::abs(fd - analytic), 1e-4 * std::max(1.0, std::abs(fd)));
    };
    for (std::size_t li = 0; li < d.layers.size(); ++li) {
      for (std::size_t i = 0; i < d.layers[li].weight.size(); ++i)
        check(d.layers[li].weight[i], g.params.layers[li].weight[i], [&] { return loss(d, f); });
      for (std::size_t i = 0; i < d.layers[li].bias.size(); ++i)
        check(d.layers[li].bias[i], g.params.layers[li].bias[i], [&] { return loss(d, f); });
    }
    for (std::size_t i = 0; i < f.size(); ++i) check(f[i], g.features[i], [&] { return loss(d, f); });
  }
}

TEST(Activation, StringRoundTrip) {
  EXPECT_EQ(activation_from_string(to_string(Activation::Softplus)), Activation::Softplus);
  EXPECT_EQ(activation_from_string("relu"), Activation::ReLU);
  EXPECT_THROW(activation_from_string("tanh"), InvalidInput);
}

TEST(Activation, SoftplusIsStableForLargeInputs) {
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

}  // namespace
}  // namespace trigrid
