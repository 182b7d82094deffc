// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "trigrid/alignment.hpp"
#include "trigrid/camera.hpp"
#include "trigrid/common.hpp"
#include "trigrid/fitting.hpp"
#include "trigrid/rng.hpp"

// Ground-truth generator. Ray generation and shading here are written
// independently of the volume renderer so the two can check each other.

namespace trigrid {

enum class AlbedoKind { Asymmetric, Symmetric };

inline std::string to_string(AlbedoKind a) {
  return a == AlbedoKind::Asymmetric ? "asymmetric" : "symmetric";
}
inline AlbedoKind albedo_from_string(const std::string& s) {
  if (s == "asymmetric") return AlbedoKind::Asymmetric;
  if (s == "symmetric") return AlbedoKind::Symmetric;
  throw InvalidInput("unknown albedo '" + s + "'");
}

/// Ellipsoid head stand-in centered at the origin.
struct ProxyScene {
  Vec3d semi_axes{0.55, 0.7, 0.6};
  AlbedoKind albedo = AlbedoKind::Asymmetric;
  std::array<double, 3> background{0.5, 0.5, 0.5};

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (!(semi_axes[a] > 0.0 && semi_axes[a] <= 1.0)) {
        throw InvalidInput("proxy semi-axes must lie in (0, 1]");
      }
    }
  }
};

namespace synth {

using Color = std::array<double, 3>;

/// Albedo at a point of the unit sphere (ellipsoid point divided by its axes).
/// Front (+z): two-tone checker with dark eyes and a red mouth. Back:
/// diagonal stripes.
inline Color albedo(AlbedoKind kind, const Vec3d& q) {
  if (kind == AlbedoKind::Symmetric) return {0.7, 0.55, 0.45};
  if (q.z > 0.0) {
    for (double ex : {-0.3, 0.3}) {
      if (std::hypot(q.x - ex, q.y - 0.25) < 0.12) return {0.08, 0.08, 0.12};
    }
    const double mx = q.x / 0.25, my = (q.y + 0.35) / 0.08;
    if (mx * mx + my * my < 1.0) return {0.75, 0.12, 0.12};
    const int cell = static_cast<int>(std::floor(q.x / 0.25)) + static_cast<int>(std::floor(q.y / 0.25));
    return (cell & 1) ? Color{0.9, 0.7, 0.55} : Color{0.65, 0.45, 0.35};
  }
  const int band = static_cast<int>(std::floor((q.x + q.y) / 0.2));
  return (band & 1) ? Color{0.25, 0.2, 0.65} : Color{0.2, 0.6, 0.3};
}

/// World-fixed light from straight above plus ambient.
inline double shading(const Vec3d& normal) { return 0.6 + 0.4 * std::max(0.0, normal.y); }

struct Pinhole {
  Vec3d eye, right, up, forward;
  double focal = 1.0;
  double px = 0.0, py = 0.0;  // principal point, continuous pixel coordinates

  explicit Pinhole(const OrbitCamera& cam) {
    const double cp = std::cos(cam.pitch);
    eye = {cam.radius * cp * std::sin(cam.yaw), cam.radius * std::sin(cam.pitch),
           cam.radius * cp * std::cos(cam.yaw)};
    forward = (-1.0 / norm(eye)) * eye;
    Vec3d r = cross(forward, Vec3d{0.0, 1.0, 0.0});
    r = (1.0 / norm(r)) * r;
    const Vec3d u = cross(r, forward);
    right = std::cos(cam.roll) * r + std::sin(cam.roll) * u;
    up = -std::sin(cam.roll) * r + std::cos(cam.roll) * u;
    focal = cam.height / (2.0 * std::tan(cam.fov_y / 2.0));
    px = cam.width / 2.0 + cam.cx;
    py = cam.height / 2.0 + cam.cy;
  }

  /// Unit direction through continuous image point (x, y).
  Vec3d direction(double x, double y) const {
    const Vec3d d = ((x - px) / focal) * right + (-(y - py) / focal) * up + forward;
    return (1.0 / norm(d)) * d;
  }

  Point2 project(const Vec3d& p) const {
    const Vec3d v = p - eye;
    const double z = dot(v, forward);
    return {px + focal * dot(v, right) / z, py - focal * dot(v, up) / z};
  }
};

/// Nearest positive hit of the ray with the ellipsoid, if any.
inline std::optional<double> hit_ellipsoid(const Vec3d& a, const Vec3d& o, const Vec3d& d) {
  const Vec3d os{o.x / a.x, o.y / a.y, o.z / a.z};
  const Vec3d ds{d.x / a.x, d.y / a.y, d.z / a.z};
  const double qa = dot(ds, ds), qb = 2.0 * dot(os, ds), qc = dot(os, os) - 1.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-qb - sq) / (2.0 * qa);
  const double t1 = (-qb + sq) / (2.0 * qa);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

/// Surface point of the ellipsoid at unit-sphere position (qx, qy) on the front.
inline Vec3d front_point(const Vec3d& a, double qx, double qy) {
  const double qz = std::sqrt(std::max(0.0, 1.0 - qx * qx - qy * qy));
  return {a.x * qx, a.y * qy, a.z * qz};
}

}  // namespace synth

struct ProxyRender {
  Image<double> rgb;   // H x W x 3
  Image<double> mask;  // H x W x 1, binary
};

/// Ray-traces the proxy: hit pixels get shaded albedo and mask 1, misses get
/// the background color and mask 0.
inline ProxyRender render_proxy(const ProxyScene& proxy, const OrbitCamera& cam) {
  proxy.validate();
  cam.validate();
  const synth::Pinhole pin(cam);
  const Vec3d& a = proxy.semi_axes;
  ProxyRender out{Image<double>(cam.height, cam.width, 3), Image<double>(cam.height, cam.width, 1)};
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Vec3d d = pin.direction(c + 0.5, r + 0.5);
      const auto t = synth::hit_ellipsoid(a, pin.eye, d);
      if (!t) {
        for (int ch = 0; ch < 3; ++ch) out.rgb.at(r, c, ch) = proxy.background[ch];
        continue;
      }
      const Vec3d p = pin.eye + *t * d;
      const Vec3d q{p.x / a.x, p.y / a.y, p.z / a.z};
      Vec3d n{q.x / a.x, q.y / a.y, q.z / a.z};
      n = (1.0 / norm(n)) * n;
      const auto alb = synth::albedo(proxy.albedo, q);
      const double sh = synth::shading(n);
      for (int ch = 0; ch < 3; ++ch) out.rgb.at(r, c, ch) = alb[ch] * sh;
      out.mask.at(r, c) = 1.0;
    }
  }
  return out;
}

/// Landmarks of the proxy face projected through `cam`: eye centers, nose
/// tip, mouth corners, all taken on the front of the ellipsoid.
inline LandmarkSet proxy_landmarks(const ProxyScene& proxy, const OrbitCamera& cam) {
  const synth::Pinhole pin(cam);
  const Vec3d& a = proxy.semi_axes;
  LandmarkSet lm;
  lm.points[LandmarkSet::kLeftEye] = pin.project(synth::front_point(a, -0.3, 0.25));
  lm.points[LandmarkSet::kRightEye] = pin.project(synth::front_point(a, 0.3, 0.25));
  lm.points[LandmarkSet::kNose] = pin.project(synth::front_point(a, 0.0, 0.0));
  lm.points[LandmarkSet::kMouthLeft] = pin.project(synth::front_point(a, -0.25, -0.35));
  lm.points[LandmarkSet::kMouthRight] = pin.project(synth::front_point(a, 0.25, -0.35));
  return lm;
}

/// Tight image-space box around the projected ellipsoid silhouette, from the
/// dual conic of the ellipsoid under the pinhole projection.
inline HeadBox proxy_head_box(const ProxyScene& proxy, const OrbitCamera& cam) {
  const synth::Pinhole pin(cam);
  const Vec3d& a = proxy.semi_axes;
  // rows of P = K [R | -R eye] with image y pointing down
  const std::array<Vec3d, 3> rows = {pin.focal * pin.right + pin.px * pin.forward,
                                     -pin.focal * pin.up + pin.py * pin.forward, pin.forward};
  std::array<std::array<double, 4>, 3> P{};
  for (int i = 0; i < 3; ++i) {
    P[i] = {rows[i].x, rows[i].y, rows[i].z, -dot(rows[i], pin.eye)};
  }
  const std::array<double, 4> q = {a.x * a.x, a.y * a.y, a.z * a.z, -1.0};
  std::array<std::array<double, 3>, 3> C{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int m = 0; m < 4; ++m) C[i][j] += P[i][m] * q[m] * P[j][m];
  auto extent = [&](int axis) {
    // tangent lines x_axis = u satisfy C00 - 2u C02 + u^2 C22 = 0 (axis-permuted)
    const double caa = C[axis][axis], ca2 = C[axis][2], c22 = C[2][2];
    const double disc = std::sqrt(std::max(0.0, ca2 * ca2 - caa * c22));
    const double u0 = (ca2 - disc) / c22, u1 = (ca2 + disc) / c22;
    return std::pair{std::min(u0, u1), std::max(u0, u1)};
  };
  const auto [x0, x1] = extent(0);
  const auto [y0, y1] = extent(1);
  return {{0.5 * (x0 + x1), 0.5 * (y0 + y1)}, x1 - x0, y1 - y0, "synthetic"};
}

struct DatasetConfig {
  int views = 16;
  int size = 64;
  double noise_yaw = 0.0;    // labels get yaw + U(-noise_yaw, noise_yaw)
  double crop_drift = 0.0;   // renders get principal offsets U(-drift, drift) px
  double pitch_range = 0.3;  // pitch ~ U(-range, range)
  double radius = 2.7;
  double fov_y = 0.7;
  double landmark_max_yaw = std::numbers::pi / 3.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (views < 2) throw InvalidInput("dataset needs at least 2 views");
    if (size < 2) throw InvalidInput("image size must be >= 2");
    if (!(noise_yaw >= 0.0) || !std::isfinite(noise_yaw)) {
      throw InvalidInput("yaw noise must be finite and >= 0");
    }
    if (!(crop_drift >= 0.0) || !std::isfinite(crop_drift)) {
      throw InvalidInput("crop drift must be finite and >= 0");
    }
    if (!(pitch_range >= 0.0 && pitch_range < 0.5 * std::numbers::pi)) {
      throw InvalidInput("pitch range must lie in [0, pi/2)");
    }
  }
};

struct SyntheticView {
  std::string id;
  ProxyRender image;
  OrbitCamera truth;  // camera the image was rendered with
  OrbitCamera label;  // camera reported to the fitter
  std::optional<LandmarkSet> landmarks;
  HeadBox box;
};

struct DatasetBundle {
  std::vector<SyntheticView> views;
  DatasetConfig config;
  ProxyScene proxy;
};

inline OrbitCamera proxy_camera(double yaw, double pitch, const DatasetConfig& cfg) {
  OrbitCamera cam;
  cam.yaw = wrap_angle(yaw);
  cam.pitch = pitch;
  cam.radius = cfg.radius;
  cam.fov_y = cfg.fov_y;
  cam.height = cam.width = cfg.size;
  return enclose_bounds(cam, Bounds{});
}

inline SyntheticView make_view(const ProxyScene& proxy, std::string id, const OrbitCamera& truth,
                               const OrbitCamera& label, const DatasetConfig& cfg) {
  SyntheticView v{std::move(id), render_proxy(proxy, truth), truth, label, std::nullopt,
                  proxy_head_box(proxy, truth)};
  if (std::abs(truth.yaw) < cfg.landmark_max_yaw) v.landmarks = proxy_landmarks(proxy, truth);
  return v;
}

/// Views with yaws stratified over [0, 2 pi) (one uniform draw per equal
/// sector, then wrapped to (-pi, pi]) and uniform pitch.
inline DatasetBundle make_dataset(const ProxyScene& proxy, const DatasetConfig& cfg) {
  cfg.validate();
  proxy.validate();
  const CounterRng rng(cfg.seed);
  DatasetBundle b{{}, cfg, proxy};
  for (int i = 0; i < cfg.views; ++i) {
    const auto key = static_cast<std::uint64_t>(i);
    const double yaw = 2.0 * std::numbers::pi * (i + rng.uniform(key, 0)) / cfg.views;
    const double pitch = rng.uniform(-cfg.pitch_range, cfg.pitch_range, key, 1);
    OrbitCamera truth = proxy_camera(yaw, pitch, cfg);
    OrbitCamera label = truth;
    if (cfg.noise_yaw > 0.0) label.yaw += rng.uniform(-cfg.noise_yaw, cfg.noise_yaw, key, 2);
    if (cfg.crop_drift > 0.0) {
      truth.cx = rng.uniform(-cfg.crop_drift, cfg.crop_drift, key, 3);
      truth.cy = rng.uniform(-cfg.crop_drift, cfg.crop_drift, key, 4);
    }
    char id[32];
    std::snprintf(id, sizeof id, "view_%04d", i);
    b.views.push_back(make_view(proxy, id, truth, label, cfg));
  }
  return b;
}

/// Noise-free views at the given (yaw, pitch) pairs, e.g. for held-out sets.
inline std::vector<SyntheticView> make_views_at(const ProxyScene& proxy,
                                                const std::vector<std::pair<double, double>>& poses,
                                                const DatasetConfig& cfg,
                                                const std::string& prefix = "heldout") {
  std::vector<SyntheticView> out;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const OrbitCamera cam = proxy_camera(poses[i].first, poses[i].second, cfg);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04zu", prefix.c_str(), i);
    out.push_back(make_view(proxy, id, cam, cam, cfg));
  }
  return out;
}

/// Training view for the fitter. The fitter sees the label camera; the
/// residual starts at zero.
template <std::floating_point T>
TrainView<T> to_train_view(const SyntheticView& v) {
  TrainView<T> t;
  t.id = v.id;
  t.rgb = Image<T>(v.image.rgb.height, v.image.rgb.width, v.image.rgb.channels);
  t.mask = Image<T>(v.image.mask.height, v.image.mask.width, 1);
  for (std::size_t i = 0; i < t.rgb.data.size(); ++i) t.rgb.data[i] = static_cast<T>(v.image.rgb.data[i]);
  for (std::size_t i = 0; i < t.mask.data.size(); ++i) t.mask.data[i] = static_cast<T>(v.image.mask.data[i]);
  t.camera = v.label;
  return t;
}

template <std::floating_point T>
std::vector<TrainView<T>> to_train_views(const std::vector<SyntheticView>& views) {
  std::vector<TrainView<T>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(to_train_view<T>(v));
  return out;
}

}  // namespace trigrid
