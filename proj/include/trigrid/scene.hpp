// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "trigrid/common.hpp"
#include "trigrid/decoder.hpp"
#include "trigrid/tri_grid.hpp"

namespace trigrid {

/// Learnable background raster. Stored unconstrained; the visible color is
/// sigmoid(param), so every value lies in (0, 1).
template <std::floating_point T>
struct Background {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> params;

  static Background zeros(int h, int w, int k) {
    if (h < 1 || w < 1 || k < 1) throw InvalidInput("background dimensions must be positive");
    return {h, w, k, std::vector<T>(static_cast<std::size_t>(h) * w * k, T(0))};
  }

  T value(int row, int col, int c) const {
    return sigmoid(params[(static_cast<std::size_t>(row) * width + col) * channels + c]);
  }

  Image<T> image() const {
    Image<T> img(height, width, channels);
    for (std::size_t i = 0; i < params.size(); ++i) img.data[i] = sigmoid(params[i]);
    return img;
  }

  /// Sets the raster so that image() reproduces `img` (values clamped into
  /// the open unit interval).
  void set_image(const Image<T>& img) {
    if (img.height != height || img.width != width || img.channels != channels) {
      throw InvalidInput("background image shape mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const T v = std::clamp(img.data[i], T(1e-4), T(1) - T(1e-4));
      params[i] = logit(v);
    }
  }

  friend bool operator==(const Background&, const Background&) = default;
};

/// Everything the fitter optimizes.
template <std::floating_point T>
struct Scene {
  TriGrid<T> trigrid;
  Decoder<T> decoder;
  Background<T> background;

  void validate() const {
    trigrid.validate();
    decoder.validate();
    decoder.check_finite();
    if (decoder.input_width() != trigrid.channels) {
      throw InvalidInput("decoder input width must equal the tri-grid channel count");
    }
    if (background.channels != decoder.radiance_channels()) {
      throw InvalidInput("background channels must equal the decoder radiance channels");
    }
    if (background.params.size() !=
        static_cast<std::size_t>(background.height) * background.width * background.channels) {
      throw InvalidInput("background storage does not match its shape");
    }
  }

  std::size_t parameter_count() const {
    return trigrid.parameter_count() + decoder.parameter_count() + background.params.size();
  }

  /// Same shapes, all parameters zero. Used as a gradient accumulator.
  Scene zeros_like() const {
    Scene s;
    s.trigrid = TriGrid<T>::zeros(trigrid.depth, trigrid.height, trigrid.width, trigrid.channels,
                                  trigrid.bounds);
    s.decoder = Decoder<T>::zeros(decoder.input_width(), decoder.hidden_widths(),
                                  decoder.radiance_channels(), decoder.hidden_activation);
    s.background = Background<T>::zeros(background.height, background.width, background.channels);
    return s;
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Parameter blocks in checkpoint order: planes_xy, planes_yz, planes_xz,
/// then (weight, bias) per decoder layer, then the background raster.
template <std::floating_point T>
std::vector<std::span<T>> parameter_blocks(Scene<T>& s) {
  std::vector<std::span<T>> b;
  for (auto& p : s.trigrid.planes) b.emplace_back(p);
  for (auto& l : s.decoder.layers) {
    b.emplace_back(l.weight);
    b.emplace_back(l.bias);
  }
  b.emplace_back(s.background.params);
  return b;
}

template <std::floating_point T>
std::vector<std::span<const T>> parameter_blocks(const Scene<T>& s) {
  std::vector<std::span<const T>> b;
  for (const auto& p : s.trigrid.planes) b.emplace_back(p);
  for (const auto& l : s.decoder.layers) {
    b.emplace_back(l.weight);
    b.emplace_back(l.bias);
  }
  b.emplace_back(s.background.params);
  return b;
}

/// Parameter groups reported by gradient checks.
enum class ParamGroup { TriGrid, Decoder, Background };

template <std::floating_point T>
ParamGroup group_of_block(const Scene<T>& s, std::size_t block) {
  if (block < 3) return ParamGroup::TriGrid;
  if (block < 3 + 2 * s.decoder.layers.size()) return ParamGroup::Decoder;
  return ParamGroup::Background;
}

/// a += b, block by block.
template <std::floating_point T>
void accumulate(Scene<T>& a, const Scene<T>& b) {
  auto da = parameter_blocks(a);
  auto db = parameter_blocks(b);
  for (std::size_t i = 0; i < da.size(); ++i) {
    for (std::size_t j = 0; j < da[i].size(); ++j) da[i][j] += db[i][j];
  }
}

template <std::floating_point T>
void fill_zero(Scene<T>& a) {
  for (auto blk : parameter_blocks(a)) std::fill(blk.begin(), blk.end(), T(0));
}

struct SceneConfig {
  int depth = 3;
  int resolution = 32;  // H = W of every plane
  int channels = 8;
  std::vector<int> hidden = {64};
  int radiance_channels = 3;
  Activation activation = Activation::ReLU;
  int image_height = 64;
  int image_width = 64;
  Bounds bounds{};
  double feature_std = 0.1;
};

/// Fresh scene: tri-grid features ~ N(0, feature_std^2), decoder weights ~
/// N(0, 1 / fan_in) with zero biases, background parameters zero (mid-gray).
template <std::floating_point T>
Scene<T> make_scene(const SceneConfig& cfg, std::uint64_t seed) {
  Scene<T> s;
  s.trigrid = TriGrid<T>::zeros(cfg.depth, cfg.resolution, cfg.resolution, cfg.channels,
                                cfg.bounds);
  s.decoder = Decoder<T>::zeros(cfg.channels, cfg.hidden, cfg.radiance_channels, cfg.activation);
  s.background = Background<T>::zeros(cfg.image_height, cfg.image_width, cfg.radiance_channels);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : s.trigrid.planes) {
    for (auto& v : p) v = static_cast<T>(cfg.feature_std * normal(gen));
  }
  for (auto& l : s.decoder.layers) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (auto& w : l.weight) w = static_cast<T>(stddev * normal(gen));
  }
  s.validate();
  return s;
}

}  // namespace trigrid
