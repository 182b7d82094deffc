// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "trigrid/camera.hpp"
#include "trigrid/common.hpp"
#include "trigrid/parallel.hpp"
#include "trigrid/rng.hpp"
#include "trigrid/scene.hpp"

namespace trigrid {

struct RenderOptions {
  int samples = 48;
  bool jitter = false;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Sample depths along a ray and the segment length each sample stands for.
struct SampleDepths {
  std::vector<double> t;
  std::vector<double> delta;
};

/// Splits [t_near, t_far] into n equal bins and takes one depth per bin: the
/// bin midpoint, or a uniform draw keyed by (seed, ray_key, bin) when
/// jittering. delta_i = t_{i+1} - t_i, the last one being the bin width.
inline SampleDepths stratified_samples(const Ray& ray, int n, bool jitter, std::uint64_t seed,
                                       std::uint64_t ray_key = 0) {
  if (n < 2) throw InvalidInput("stratified_samples needs at least 2 samples");
  if (!(ray.t_near < ray.t_far)) throw InvalidInput("ray requires t_near < t_far");
  SampleDepths s;
  s.t.resize(n);
  s.delta.resize(n);
  const double bin = (ray.t_far - ray.t_near) / n;
  const CounterRng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double u = jitter ? rng.uniform(ray_key, static_cast<std::uint64_t>(i)) : 0.5;
    s.t[i] = ray.t_near + (i + u) * bin;
  }
  for (int i = 0; i + 1 < n; ++i) s.delta[i] = s.t[i + 1] - s.t[i];
  s.delta[n - 1] = bin;
  return s;
}

/// Alpha compositing of per-segment constant densities:
///   alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i} (1 - alpha_j),
///   w_i = T_i alpha_i, raw = sum w_i f_i, mask = sum w_i = 1 - T_{n+1}.
/// `radiance` is n x k. Returns the mask; `transmittance` (n + 1 entries, may
/// be empty) receives T_1..T_{n+1}.
template <std::floating_point T>
T alpha_composite(std::span<const T> sigma, std::span<const double> delta,
                  std::span<const T> radiance, std::span<T> raw, std::span<T> transmittance = {}) {
  const std::size_t n = sigma.size();
  const std::size_t k = raw.size();
  std::fill(raw.begin(), raw.end(), T(0));
  T trans = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(sigma[i])) throw InvalidState("non-finite density in volume rendering");
    if (!transmittance.empty()) transmittance[i] = trans;
    const T alpha = -std::expm1(-sigma[i] * static_cast<T>(delta[i]));
    const T w = trans * alpha;
    for (std::size_t c = 0; c < k; ++c) raw[c] += w * radiance[i * k + c];
    trans *= T(1) - alpha;
  }
  if (!transmittance.empty()) transmittance[n] = trans;
  return T(1) - trans;
}

/// Renders one ray through an arbitrary field f(point, radiance_out) -> sigma.
/// Used for analytic media; the scene path below shares the compositing rule.
template <std::floating_point T, typename Field>
T render_field_ray(Field&& field, const Ray& ray, const SampleDepths& s, std::span<T> raw) {
  const std::size_t n = s.t.size();
  const std::size_t k = raw.size();
  std::vector<T> sigma(n), rad(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3d p = ray.origin + s.t[i] * ray.direction;
    sigma[i] = field(p, std::span<T>(rad.data() + i * k, k));
  }
  return alpha_composite<T>(sigma, s.delta, rad, raw);
}

/// Forward and reverse evaluation of single rays through a scene. Keeps the
/// per-sample state of the last forward() for backward(). Samples outside the
/// scene bounds carry zero density. Not thread-safe; use one per worker.
template <std::floating_point T>
class RayTracer {
 public:
  /// Sums of d(loss)/d(sample point) weighted for the camera chain rule:
  /// dL/d(origin) = sum g_i, dL/d(direction) = sum t_i g_i.
  struct PointSums {
    Vec3d origin{};
    Vec3d direction{};
  };

  RayTracer(const Scene<T>& scene, int max_samples)
      : scene_(scene),
        k_(scene.decoder.radiance_channels()),
        c_(scene.trigrid.channels),
        points_(max_samples),
        inside_(max_samples),
        sigma_(max_samples),
        radiance_(static_cast<std::size_t>(max_samples) * k_),
        trans_(max_samples + 1),
        feature_(c_),
        ws_(max_samples),
        dfeature_(c_),
        dradiance_(k_) {
    for (auto& w : ws_) w.prepare(scene.decoder);
  }

  /// Writes raw radiance (k values) and returns the mask. `depth` receives the
  /// expected termination depth sum w_i t_i if non-null.
  T forward(const Ray& ray, const SampleDepths& s, std::span<T> raw, T* depth = nullptr) {
    n_ = static_cast<int>(s.t.size());
    if (n_ > static_cast<int>(points_.size())) throw InvalidInput("too many samples for tracer");
    t_ = s.t.data();
    delta_ = s.delta.data();
    const Bounds& b = scene_.trigrid.bounds;
    for (int i = 0; i < n_; ++i) {
      const Vec3d p = ray.origin + s.t[i] * ray.direction;
      points_[i] = {static_cast<T>(p.x), static_cast<T>(p.y), static_cast<T>(p.z)};
      inside_[i] = b.contains(p);
      std::span<T> rad(radiance_.data() + static_cast<std::size_t>(i) * k_, k_);
      if (inside_[i]) {
        sample_point(scene_.trigrid, points_[i], std::span<T>(feature_));
        decode_point(scene_.decoder, std::span<const T>(feature_), ws_[i], sigma_[i], rad);
      } else {
        sigma_[i] = 0;
        std::fill(rad.begin(), rad.end(), T(0));
      }
    }
    const T mask = alpha_composite<T>(std::span<const T>(sigma_.data(), n_),
                                      std::span<const double>(delta_, n_),
                                      std::span<const T>(radiance_.data(),
                                                         static_cast<std::size_t>(n_) * k_),
                                      raw, std::span<T>(trans_.data(), n_ + 1));
    if (depth) {
      T d = 0;
      for (int i = 0; i < n_; ++i) d += (trans_[i] - trans_[i + 1]) * static_cast<T>(t_[i]);
      *depth = d;
    }
    return mask;
  }

  /// Reverse pass of the last forward(). `draw` is d(loss)/d(raw radiance),
  /// `dmask` is d(loss)/d(mask). Accumulates into `grad` (may be null).
  PointSums backward(std::span<const T> draw, T dmask, Scene<T>* grad, bool point_grads) {
    PointSums sums;
    const T t_final = trans_[n_];
    T suffix = 0;  // sum_{j > i} w_j (draw . f_j)
    for (int i = n_ - 1; i >= 0; --i) {
      if (!inside_[i]) continue;
      const T* f = radiance_.data() + static_cast<std::size_t>(i) * k_;
      T draw_f = 0;
      for (int c = 0; c < k_; ++c) draw_f += draw[c] * f[c];
      const T delta = static_cast<T>(delta_[i]);
      const T w = trans_[i] - trans_[i + 1];
      const T dsigma = delta * (trans_[i + 1] * draw_f - suffix) + dmask * delta * t_final;
      suffix += w * draw_f;
      for (int c = 0; c < k_; ++c) dradiance_[c] = w * draw[c];
      if (dsigma == T(0) && w == T(0)) continue;
      decode_point_backward(scene_.decoder, ws_[i], dsigma, std::span<const T>(dradiance_),
                            grad ? &grad->decoder : nullptr, std::span<T>(dfeature_));
      const Vec3<T> gp = sample_point_backward(scene_.trigrid, points_[i],
                                               std::span<const T>(dfeature_),
                                               grad ? &grad->trigrid : nullptr);
      if (point_grads) {
        const Vec3d g{static_cast<double>(gp.x), static_cast<double>(gp.y),
                      static_cast<double>(gp.z)};
        sums.origin += g;
        sums.direction += t_[i] * g;
      }
    }
    return sums;
  }

 private:
  const Scene<T>& scene_;
  int k_;
  int c_;
  int n_ = 0;
  const double* t_ = nullptr;
  const double* delta_ = nullptr;
  std::vector<Vec3<T>> points_;
  std::vector<char> inside_;
  std::vector<T> sigma_;
  std::vector<T> radiance_;
  std::vector<T> trans_;
  std::vector<T> feature_;
  std::vector<DecoderWorkspace<T>> ws_;
  std::vector<T> dfeature_;
  std::vector<T> dradiance_;
};

/// Chain rule from ray-space point sums to the five camera parameters
/// (yaw, pitch, radius, cx, cy; cx and cy per pixel).
inline std::array<double, kCameraParams> camera_gradient(const RayJacobian& j,
                                                         const Vec3d& d_origin,
                                                         const Vec3d& d_direction) {
  std::array<double, kCameraParams> g{};
  for (int p = 0; p < kCameraParams; ++p) {
    g[p] = dot(d_origin, j.origin[p]) + dot(d_direction, j.direction[p]);
  }
  return g;
}

/// Gradient w.r.t. a CameraResidual given the gradient w.r.t. camera parameters.
inline std::array<double, kCameraParams> residual_gradient(
    const OrbitCamera& cam, const std::array<double, kCameraParams>& camera_grad) {
  auto g = camera_grad;
  g[kCx] *= residual_pixel_scale(cam);
  g[kCy] *= residual_pixel_scale(cam);
  return g;
}

template <std::floating_point T>
struct RenderOutput {
  Image<T> raw;        // H x W x k
  Image<T> mask;       // H x W x 1
  Image<T> composite;  // H x W x k, empty when no background was composed
  Image<T> depth;      // H x W x 1, expected termination depth
};

/// Renders a batch of rays. Returns raw (N x k) and mask (N) buffers.
template <std::floating_point T>
std::pair<std::vector<T>, std::vector<T>> volume_render_rays(const Scene<T>& scene,
                                                            std::span<const Ray> rays,
                                                            const RenderOptions& opt) {
  scene.validate();
  const int k = scene.decoder.radiance_channels();
  std::vector<T> raw(rays.size() * k), mask(rays.size());
  parallel_ranges(rays.size(), opt.workers, [&](int, std::size_t b, std::size_t e) {
    RayTracer<T> tracer(scene, opt.samples);
    for (std::size_t i = b; i < e; ++i) {
      const auto s = stratified_samples(rays[i], opt.samples, opt.jitter, opt.seed, i);
      mask[i] = tracer.forward(rays[i], s, std::span<T>(raw.data() + i * k, k));
    }
  });
  return {std::move(raw), std::move(mask)};
}

/// I^gen = (1 - I^m) I^bg + I^r, per pixel and channel.
template <std::floating_point T>
Image<T> composite(const Image<T>& raw, const Image<T>& mask, const Image<T>& background) {
  if (mask.channels != 1 || raw.height != mask.height || raw.width != mask.width ||
      !raw.same_shape(background)) {
    throw InvalidInput("composite: raw, mask and background shapes disagree");
  }
  Image<T> out(raw.height, raw.width, raw.channels);
  for (int r = 0; r < raw.height; ++r) {
    for (int c = 0; c < raw.width; ++c) {
      const T m = mask.at(r, c);
      for (int ch = 0; ch < raw.channels; ++ch) {
        out.at(r, c, ch) = (T(1) - m) * background.at(r, c, ch) + raw.at(r, c, ch);
      }
    }
  }
  return out;
}

/// Bilinear upsampling by an integer factor with half-pixel centers
/// (align_corners = false); edges clamp.
template <typename T>
Image<T> bilinear_upsample(const Image<T>& img, int factor) {
  if (factor < 1) throw InvalidInput("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return img;
  Image<T> out(img.height * factor, img.width * factor, img.channels);
  auto axis = [factor](int o, int n, int& i0, int& i1, double& f) {
    double x = (o + 0.5) / factor - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<int>(x);
    i1 = std::min(i0 + 1, n - 1);
    f = x - i0;
  };
  for (int r = 0; r < out.height; ++r) {
    int r0, r1;
    double fr;
    axis(r, img.height, r0, r1, fr);
    for (int c = 0; c < out.width; ++c) {
      int c0, c1;
      double fc;
      axis(c, img.width, c0, c1, fc);
      for (int ch = 0; ch < img.channels; ++ch) {
        const double top = (1 - fc) * img.at(r0, c0, ch) + fc * img.at(r0, c1, ch);
        const double bot = (1 - fc) * img.at(r1, c0, ch) + fc * img.at(r1, c1, ch);
        out.at(r, c, ch) = static_cast<T>((1 - fr) * top + fr * bot);
      }
    }
  }
  return out;
}

/// Background raster at a camera's resolution: the stored raster itself, or
/// its bilinear upsampling when the camera is an integer multiple larger.
template <std::floating_point T>
Image<T> background_for(const Scene<T>& scene, const OrbitCamera& cam) {
  const auto& bg = scene.background;
  if (cam.height == bg.height && cam.width == bg.width) return bg.image();
  if (cam.height % bg.height == 0 && cam.width % bg.width == 0 &&
      cam.height / bg.height == cam.width / bg.width) {
    return bilinear_upsample(bg.image(), cam.height / bg.height);
  }
  throw InvalidInput("camera resolution is not an integer multiple of the background raster");
}

/// Full-frame render: raw radiance, mask, depth, and the composite over the
/// scene background.
template <std::floating_point T>
RenderOutput<T> volume_render(const Scene<T>& scene, const OrbitCamera& cam,
                              const RenderOptions& opt) {
  scene.validate();
  cam.validate();
  const int k = scene.decoder.radiance_channels();
  RenderOutput<T> out{Image<T>(cam.height, cam.width, k), Image<T>(cam.height, cam.width, 1), {},
                      Image<T>(cam.height, cam.width, 1)};
  parallel_ranges(static_cast<std::size_t>(cam.height), opt.workers,
                  [&](int, std::size_t rb, std::size_t re) {
                    RayTracer<T> tracer(scene, opt.samples);
                    for (std::size_t r = rb; r < re; ++r) {
                      for (int c = 0; c < cam.width; ++c) {
                        const Ray ray = camera_ray(cam, static_cast<int>(r), c);
                        const auto key = r * cam.width + c;
                        const auto s = stratified_samples(ray, opt.samples, opt.jitter, opt.seed, key);
                        T depth = 0;
                        out.mask.at(static_cast<int>(r), c) = tracer.forward(
                            ray, s,
                            std::span<T>(&out.raw.at(static_cast<int>(r), c, 0), k), &depth);
                        out.depth.at(static_cast<int>(r), c) = depth;
                      }
                    }
                  });
  out.composite = composite(out.raw, out.mask, background_for(scene, cam));
  return out;
}

template <std::floating_point T>
struct RenderGrad {
  Scene<T> scene;                               // d loss / d scene parameters
  std::array<double, kCameraParams> camera{};   // d loss / d (yaw, pitch, radius, cx, cy)
};

/// Reverse pass of volume_render for upstream gradients on I^r (H x W x k) and
/// I^m (H x W x 1). The background does not enter I^r or I^m, so its gradient
/// is zero here; the fitting loss adds it through the composite.
template <std::floating_point T>
RenderGrad<T> volume_render_backward(const Scene<T>& scene, const OrbitCamera& cam,
                                     const RenderOptions& opt, const Image<T>& upstream_raw,
                                     const Image<T>& upstream_mask) {
  scene.validate();
  cam.validate();
  const int k = scene.decoder.radiance_channels();
  if (upstream_raw.height != cam.height || upstream_raw.width != cam.width ||
      upstream_raw.channels != k || upstream_mask.height != cam.height ||
      upstream_mask.width != cam.width || upstream_mask.channels != 1) {
    throw InvalidInput("volume_render_backward: upstream gradient shape mismatch");
  }
  const int workers = std::max(1, opt.workers);
  std::vector<Scene<T>> grads(workers, scene.zeros_like());
  std::vector<std::array<double, kCameraParams>> cam_grads(workers);
  parallel_ranges(static_cast<std::size_t>(cam.height), workers,
                  [&](int w, std::size_t rb, std::size_t re) {
                    RayTracer<T> tracer(scene, opt.samples);
                    std::vector<T> raw(k);
                    for (std::size_t r = rb; r < re; ++r) {
                      const int row = static_cast<int>(r);
                      for (int c = 0; c < cam.width; ++c) {
                        const Ray ray = camera_ray(cam, row, c);
                        const auto key = r * cam.width + c;
                        const auto s = stratified_samples(ray, opt.samples, opt.jitter, opt.seed, key);
                        tracer.forward(ray, s, std::span<T>(raw));
                        const auto sums = tracer.backward(
                            std::span<const T>(&upstream_raw.at(row, c, 0), k),
                            upstream_mask.at(row, c), &grads[w], true);
                        const auto g = camera_gradient(camera_ray_jacobian(cam, row, c),
                                                       sums.origin, sums.direction);
                        for (int p = 0; p < kCameraParams; ++p) cam_grads[w][p] += g[p];
                      }
                    }
                  });
  RenderGrad<T> out{std::move(grads[0]), cam_grads[0]};
  for (int w = 1; w < workers; ++w) {
    accumulate(out.scene, grads[w]);
    for (int p = 0; p < kCameraParams; ++p) out.camera[p] += cam_grads[w][p];
  }
  return out;
}

/// Seven-channel raster fed to a tri-discriminator: upsampled RGB, high
/// resolution RGB, upsampled mask, in that channel order.
template <std::floating_point T>
struct DiscriminatorInput {
  Image<T> raster;  // H x W x 7
};

template <std::floating_point T>
DiscriminatorInput<T> assemble_discriminator_input(const Image<T>& rgb_up, const Image<T>& rgb_high,
                                                   const Image<T>& mask_up) {
  if (rgb_up.channels != 3 || rgb_high.channels != 3 || mask_up.channels != 1) {
    throw InvalidInput("discriminator input needs 3 + 3 + 1 channels");
  }
  if (rgb_up.height != rgb_high.height || rgb_up.width != rgb_high.width ||
      rgb_up.height != mask_up.height || rgb_up.width != mask_up.width) {
    throw InvalidInput("discriminator input parts must share spatial size");
  }
  DiscriminatorInput<T> d{Image<T>(rgb_up.height, rgb_up.width, 7)};
  for (int r = 0; r < rgb_up.height; ++r) {
    for (int c = 0; c < rgb_up.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        d.raster.at(r, c, ch) = rgb_up.at(r, c, ch);
        d.raster.at(r, c, 3 + ch) = rgb_high.at(r, c, ch);
      }
      d.raster.at(r, c, 6) = mask_up.at(r, c);
    }
  }
  return d;
}

/// Camera rendering the same view at `factor` times the resolution.
inline OrbitCamera scaled_camera(OrbitCamera cam, int factor) {
  cam.height *= factor;
  cam.width *= factor;
  cam.cx *= factor;
  cam.cy *= factor;
  return cam;
}

/// Renders the low-resolution composite and mask at `cam`, upsamples both by
/// `factor`, renders the high-resolution stand-in directly at the scaled
/// camera, and stacks the three.
template <std::floating_point T>
DiscriminatorInput<T> render_discriminator_input(const Scene<T>& scene, const OrbitCamera& cam,
                                                 int factor, const RenderOptions& opt) {
  const auto low = volume_render(scene, cam, opt);
  const auto high = volume_render(scene, scaled_camera(cam, factor), opt);
  return assemble_discriminator_input(bilinear_upsample(low.composite, factor), high.composite,
                                      bilinear_upsample(low.mask, factor));
}

}  // namespace trigrid
