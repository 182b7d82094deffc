// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "trigrid/fitting.hpp"
#include "trigrid/scene.hpp"

namespace trigrid {

struct GradcheckOptions {
  int size = 8;            // render is size x size
  int samples = 16;
  int resolution = 6;
  int channels = 4;
  int hidden = 16;
  int coords_per_group = 24;
  double step = 1e-6;         // central-difference step for scene parameters
  double camera_step = 1e-7;  // step for residual components
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct GroupCheck {
  std::string group;
  int depth = 0;
  int checked = 0;
  double max_relative_error = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  bool pass() const {
    return !groups.empty() &&
           std::all_of(groups.begin(), groups.end(), [](const GroupCheck& g) { return g.pass; });
  }
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

namespace detail {

/// Random scene, target and residual for a gradient check at depth `depth`.
struct GradcheckProblem {
  Scene<double> scene;
  TrainView<double> view;
  FitConfig config;
};

inline GradcheckProblem make_gradcheck_problem(int depth, const GradcheckOptions& o) {
  SceneConfig sc;
  sc.depth = depth;
  sc.resolution = o.resolution;
  sc.channels = o.channels;
  sc.hidden = {o.hidden};
  sc.image_height = sc.image_width = o.size;
  sc.feature_std = 0.3;
  GradcheckProblem p;
  p.scene = make_scene<double>(sc, o.seed + static_cast<std::uint64_t>(depth));
  std::mt19937_64 gen(o.seed * 7919 + depth);
  std::uniform_real_distribution<double> u(0.0, 1.0), small(-0.05, 0.05);
  for (auto& v : p.scene.background.params) v = 2.0 * u(gen) - 1.0;
  for (auto& l : p.scene.decoder.layers)
    for (auto& b : l.bias) b = small(gen);
  p.view.id = "gradcheck";
  p.view.camera.yaw = 0.4;
  p.view.camera.pitch = 0.15;
  p.view.camera.height = p.view.camera.width = o.size;
  p.view.camera = enclose_bounds(p.view.camera, Bounds{});
  p.view.rgb = Image<double>(o.size, o.size, 3);
  p.view.mask = Image<double>(o.size, o.size, 1);
  for (auto& v : p.view.rgb.data) v = u(gen);
  for (auto& v : p.view.mask.data) v = u(gen);
  p.view.residual = {small(gen), small(gen), small(gen), small(gen), small(gen)};
  p.config.samples = o.samples;
  p.config.residuals = true;
  p.config.lambda_cam = 0.5;
  p.config.jitter = false;
  return p;
}

/// Indices of the `n` largest-magnitude entries of `g`.
inline std::vector<std::size_t> top_entries(std::span<const double> g, int n) {
  std::vector<std::size_t> idx(g.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(n), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(g[a]) > std::abs(g[b]) || (std::abs(g[a]) == std::abs(g[b]) && a < b);
  });
  idx.resize(k);
  return idx;
}

}  // namespace detail

/// Compares analytic gradients of loss_and_grads against central differences
/// for each parameter group (tri-grid, decoder, background, residual) at the
/// given depth. Checks the largest-magnitude gradient entries of each group.
inline std::vector<GroupCheck> gradcheck_depth(int depth, const GradcheckOptions& o) {
  auto p = detail::make_gradcheck_problem(depth, o);
  const auto base = loss_and_grads(p.scene, p.view, p.config);
  auto loss_at = [&]() { return loss_and_grads(p.scene, p.view, p.config).loss; };

  std::vector<GroupCheck> out;
  const char* names[] = {"trigrid", "decoder", "background"};
  for (int gi = 0; gi < 3; ++gi) {
    GroupCheck gc{names[gi], depth, 0, 0.0, true};
    auto params = parameter_blocks(p.scene);
    const auto grads = parameter_blocks(std::as_const(base.scene));
    // flatten the group
    std::vector<std::pair<std::size_t, std::size_t>> where;
    std::vector<double> flat;
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (static_cast<int>(group_of_block(p.scene, b)) != gi) continue;
      for (std::size_t i = 0; i < grads[b].size(); ++i) {
        where.emplace_back(b, i);
        flat.push_back(grads[b][i]);
      }
    }
    for (std::size_t f : detail::top_entries(flat, o.coords_per_group)) {
      auto [b, i] = where[f];
      double& x = params[b][i];
      const double x0 = x;
      x = x0 + o.step;
      const double lp = loss_at();
      x = x0 - o.step;
      const double lm = loss_at();
      x = x0;
      const double numeric = (lp - lm) / (2.0 * o.step);
      gc.max_relative_error = std::max(gc.max_relative_error, relative_error(flat[f], numeric));
      ++gc.checked;
    }
    gc.pass = gc.checked > 0 && gc.max_relative_error < o.tolerance;
    out.push_back(gc);
  }

  GroupCheck rc{"residual", depth, 0, 0.0, true};
  for (int c = 0; c < kCameraParams; ++c) {
    auto r = p.view.residual.to_array();
    const double r0 = r[c];
    r[c] = r0 + o.camera_step;
    p.view.residual = CameraResidual::from_array(r);
    const double lp = loss_at();
    r[c] = r0 - o.camera_step;
    p.view.residual = CameraResidual::from_array(r);
    const double lm = loss_at();
    r[c] = r0;
    p.view.residual = CameraResidual::from_array(r);
    const double numeric = (lp - lm) / (2.0 * o.camera_step);
    rc.max_relative_error = std::max(rc.max_relative_error, relative_error(base.residuals[0][c], numeric));
    ++rc.checked;
  }
  rc.pass = rc.max_relative_error < o.tolerance;
  out.push_back(rc);
  return out;
}

inline GradcheckReport gradcheck(const GradcheckOptions& o = {}, std::vector<int> depths = {1, 3}) {
  GradcheckReport r;
  for (int d : depths) {
    auto g = gradcheck_depth(d, o);
    r.groups.insert(r.groups.end(), g.begin(), g.end());
  }
  return r;
}

}  // namespace trigrid
