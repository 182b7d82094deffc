// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trigrid/common.hpp"

namespace trigrid {

enum class Activation : int { ReLU = 0, Softplus = 1 };

inline std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "softplus"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "softplus") return Activation::Softplus;
  throw InvalidInput("unknown activation '" + s + "'");
}

/// Dense layer, weight stored row-major as out x in.
template <std::floating_point T>
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Tiny MLP mapping an aggregated feature to (density, radiance). The last
/// layer has 1 + k outputs: a density logit followed by k radiance logits.
/// density = softplus(logit), radiance = sigmoid(logits).
template <std::floating_point T>
struct Decoder {
  std::vector<DenseLayer<T>> layers;
  Activation hidden_activation = Activation::ReLU;

  static Decoder zeros(int in, std::span<const int> hidden, int radiance_channels,
                       Activation act = Activation::ReLU) {
    Decoder d;
    d.hidden_activation = act;
    int prev = in;
    std::vector<int> widths(hidden.begin(), hidden.end());
    widths.push_back(1 + radiance_channels);
    for (int w : widths) {
      if (prev < 1 || w < 1) throw InvalidInput("decoder layer widths must be positive");
      d.layers.push_back({prev, w, std::vector<T>(static_cast<std::size_t>(prev) * w, T(0)),
                          std::vector<T>(w, T(0))});
      prev = w;
    }
    return d;
  }

  int input_width() const { return layers.empty() ? 0 : layers.front().in; }
  int output_width() const { return layers.empty() ? 0 : layers.back().out; }
  int radiance_channels() const { return output_width() - 1; }
  std::vector<int> hidden_widths() const {
    std::vector<int> w;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) w.push_back(layers[i].out);
    return w;
  }
  int max_width() const {
    int m = input_width();
    for (const auto& l : layers) m = std::max(m, l.out);
    return m;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw InvalidInput("decoder has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out ||
          l.bias.size() != static_cast<std::size_t>(l.out)) {
        throw InvalidInput("decoder layer " + std::to_string(i) + " has inconsistent storage");
      }
      if (i > 0 && layers[i - 1].out != l.in) {
        throw InvalidInput("decoder layer shapes do not chain at layer " + std::to_string(i));
      }
    }
    if (output_width() < 2) throw InvalidInput("decoder needs a density and >= 1 radiance output");
  }

  void check_finite() const {
    for (const auto& l : layers) {
      for (T v : l.weight)
        if (!std::isfinite(v)) throw InvalidState("decoder holds a non-finite weight");
      for (T v : l.bias)
        if (!std::isfinite(v)) throw InvalidState("decoder holds a non-finite bias");
    }
  }

  friend bool operator==(const Decoder&, const Decoder&) = default;
};

/// Scratch space for one decoder evaluation; keeps the per-layer inputs
/// (activated values) needed by the reverse pass.
template <std::floating_point T>
struct DecoderWorkspace {
  std::vector<std::vector<T>> inputs;  // input to each layer
  std::vector<T> output;               // raw logits of the last layer
  std::vector<T> grad_a;
  std::vector<T> grad_b;

  void prepare(const Decoder<T>& d) {
    if (inputs.size() != d.layers.size()) inputs.resize(d.layers.size());
    for (std::size_t i = 0; i < d.layers.size(); ++i) inputs[i].resize(d.layers[i].in);
    output.resize(d.output_width());
    grad_a.resize(d.max_width());
    grad_b.resize(d.max_width());
  }
};

template <std::floating_point T>
struct DecodedSample {
  T sigma = 0;
  std::vector<T> radiance;
};

namespace detail {

template <typename T>
T hidden_forward(Activation a, T x) {
  return a == Activation::ReLU ? (x > T(0) ? x : T(0)) : softplus(x);
}

/// Derivative expressed through the activated value y: ReLU' = [y > 0],
/// softplus'(x) = sigmoid(x) = 1 - exp(-y).
template <typename T>
T hidden_derivative_from_output(Activation a, T y) {
  return a == Activation::ReLU ? (y > T(0) ? T(1) : T(0)) : -std::expm1(-y);
}

}  // namespace detail

/// Evaluates the decoder on one feature; writes sigma and k radiance values.
/// The workspace must have been prepared for `d`.
template <std::floating_point T>
void decode_point(const Decoder<T>& d, std::span<const T> feature, DecoderWorkspace<T>& ws,
                  T& sigma, std::span<T> radiance) {
  std::copy(feature.begin(), feature.end(), ws.inputs[0].begin());
  const std::size_t L = d.layers.size();
  for (std::size_t li = 0; li < L; ++li) {
    const auto& layer = d.layers[li];
    const T* x = ws.inputs[li].data();
    const bool last = li + 1 == L;
    T* y = last ? ws.output.data() : ws.inputs[li + 1].data();
    for (int o = 0; o < layer.out; ++o) {
      const T* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      T acc = layer.bias[o];
      for (int i = 0; i < layer.in; ++i) acc += w[i] * x[i];
      y[o] = last ? acc : detail::hidden_forward(d.hidden_activation, acc);
    }
  }
  sigma = softplus(ws.output[0]);
  for (std::size_t c = 0; c < radiance.size(); ++c) radiance[c] = sigmoid(ws.output[c + 1]);
}

/// Reverse pass for the most recent decode_point on `ws`. Takes d(loss)/d(sigma)
/// and d(loss)/d(radiance); accumulates parameter gradients into `grad` (may be
/// null) and writes d(loss)/d(feature) into `dfeature` (may be empty).
template <std::floating_point T>
void decode_point_backward(const Decoder<T>& d, DecoderWorkspace<T>& ws, T dsigma,
                           std::span<const T> dradiance, Decoder<T>* grad,
                           std::span<T> dfeature) {
  const std::size_t L = d.layers.size();
  T* g = ws.grad_a.data();
  T* gnext = ws.grad_b.data();
  // through the output activations
  g[0] = dsigma * sigmoid(ws.output[0]);
  for (std::size_t c = 0; c < dradiance.size(); ++c) {
    const T s = sigmoid(ws.output[c + 1]);
    g[c + 1] = dradiance[c] * s * (T(1) - s);
  }
  for (std::size_t li = L; li-- > 0;) {
    const auto& layer = d.layers[li];
    const T* x = ws.inputs[li].data();
    if (grad) {
      auto& gl = grad->layers[li];
      for (int o = 0; o < layer.out; ++o) {
        const T go = g[o];
        if (go == T(0)) continue;
        T* gw = gl.weight.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) gw[i] += go * x[i];
        gl.bias[o] += go;
      }
    }
    if (li == 0 && dfeature.empty()) break;
    std::fill(gnext, gnext + layer.in, T(0));
    for (int o = 0; o < layer.out; ++o) {
      const T go = g[o];
      if (go == T(0)) continue;
      const T* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gnext[i] += go * w[i];
    }
    if (li > 0) {
      // x is the activated output of the previous layer
      for (int i = 0; i < layer.in; ++i) {
        gnext[i] *= detail::hidden_derivative_from_output(d.hidden_activation, x[i]);
      }
    }
    std::swap(g, gnext);
  }
  if (!dfeature.empty()) std::copy(g, g + d.input_width(), dfeature.begin());
}

/// Batched decode. `features` is N x C row-major.
template <std::floating_point T>
std::vector<DecodedSample<T>> decode(const Decoder<T>& d, std::span<const T> features) {
  d.validate();
  d.check_finite();
  const auto C = static_cast<std::size_t>(d.input_width());
  if (features.size() % C != 0) {
    throw InvalidInput("decode: feature buffer is not a multiple of the decoder input width");
  }
  DecoderWorkspace<T> ws;
  ws.prepare(d);
  std::vector<DecodedSample<T>> out(features.size() / C);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n].radiance.resize(d.radiance_channels());
    decode_point(d, features.subspan(n * C, C), ws, out[n].sigma, std::span<T>(out[n].radiance));
  }
  return out;
}

template <std::floating_point T>
struct DecodeGrad {
  Decoder<T> params;          // d loss / d weights and biases
  std::vector<T> features;    // d loss / d input features, N x C
};

/// Batched reverse pass. `dsigma` has N entries, `dradiance` N x k.
template <std::floating_point T>
DecodeGrad<T> decode_backward(const Decoder<T>& d, std::span<const T> features,
                              std::span<const T> dsigma, std::span<const T> dradiance) {
  d.validate();
  d.check_finite();
  const auto C = static_cast<std::size_t>(d.input_width());
  const auto k = static_cast<std::size_t>(d.radiance_channels());
  if (features.size() % C != 0) {
    throw InvalidInput("decode_backward: feature buffer is not a multiple of the input width");
  }
  const std::size_t n = features.size() / C;
  if (dsigma.size() != n || dradiance.size() != n * k) {
    throw InvalidInput("decode_backward: upstream gradient shape mismatch");
  }
  DecodeGrad<T> r;
  r.params = Decoder<T>::zeros(d.input_width(), d.hidden_widths(), static_cast<int>(k),
                               d.hidden_activation);
  r.features.assign(features.size(), T(0));
  DecoderWorkspace<T> ws;
  ws.prepare(d);
  std::vector<T> rad(k);
  for (std::size_t i = 0; i < n; ++i) {
    T sigma;
    decode_point(d, features.subspan(i * C, C), ws, sigma, std::span<T>(rad));
    decode_point_backward(d, ws, dsigma[i], dradiance.subspan(i * k, k), &r.params,
                          std::span<T>(r.features.data() + i * C, C));
  }
  return r;
}

}  // namespace trigrid
