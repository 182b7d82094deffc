// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trigrid/camera.hpp"
#include "trigrid/common.hpp"
#include "trigrid/parallel.hpp"
#include "trigrid/render.hpp"
#include "trigrid/rng.hpp"
#include "trigrid/scene.hpp"

namespace trigrid {

/// One supervised image: target composite, target foreground mask, the
/// labeled camera, and the learnable residual attached to it.
template <std::floating_point T>
struct TrainView {
  std::string id;
  Image<T> rgb;   // H x W x k
  Image<T> mask;  // H x W x 1
  OrbitCamera camera;
  CameraResidual residual;

  void validate() const {
    camera.validate();
    if (rgb.height != camera.height || rgb.width != camera.width) {
      throw InvalidInput("view '" + id + "': target size differs from its camera");
    }
    if (mask.height != rgb.height || mask.width != rgb.width || mask.channels != 1) {
      throw InvalidInput("view '" + id + "': mask shape differs from the target");
    }
    for (T m : mask.data) {
      if (!(m >= T(0) && m <= T(1))) throw InvalidInput("view '" + id + "': mask outside [0, 1]");
    }
  }

  /// Camera actually used for rendering: label plus residual.
  OrbitCamera render_camera() const { return apply_camera_residual(camera, residual); }
};

enum class OptimizerKind { Adam, Momentum };

inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "momentum"; }
inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "momentum") return OptimizerKind::Momentum;
  throw InvalidInput("unknown optimizer '" + s + "'");
}

struct FitConfig {
  int iterations = 2000;
  double lr_scene = 1e-2;
  double lr_residual = 1e-3;
  double lambda_mask = 1.0;
  double lambda_cam = 0.1;
  int samples = 48;
  int batch = 1024;  // pixels per step, drawn across all views
  std::uint64_t seed = 0;
  bool residuals = true;
  int residual_warmup = 750;  // steps fitting the scene alone before residuals move
  bool jitter = true;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;  // heavy-ball momentum, or Adam beta1
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int workers = 1;

  void validate() const {
    if (iterations < 0) throw InvalidInput("iterations must be >= 0");
    if (residual_warmup < 0) throw InvalidInput("residual warm-up must be >= 0");
    if (!(lr_scene > 0) || !(lr_residual > 0)) throw InvalidInput("learning rates must be positive");
    if (!(lambda_mask > 0)) throw InvalidInput("lambda_mask must be positive");
    if (!(lambda_cam >= 0)) throw InvalidInput("lambda_cam must be >= 0");
    if (samples < 2) throw InvalidInput("samples per ray must be >= 2");
    if (batch < 1) throw InvalidInput("batch must be >= 1");
    if (!(momentum >= 0 && momentum < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw InvalidInput("momentum coefficients must lie in [0, 1)");
    }
    if (workers < 1) throw InvalidInput("workers must be >= 1");
  }
};

/// Loss terms and gradients for a set of pixels.
template <std::floating_point T>
struct LossAndGrads {
  double loss = 0.0;
  double photometric = 0.0;  // mean squared composite error
  double mask = 0.0;         // mean squared mask error (unweighted)
  double camera = 0.0;       // sum of squared residual norms (unweighted)
  Scene<T> scene;            // d loss / d scene parameters
  std::vector<std::array<double, kCameraParams>> residuals;  // d loss / d residual, per view
};

namespace detail {

struct PixelRef {
  int view = 0;
  int pixel = 0;
};

/// Photometric and mask terms over `pixels`, each term averaged over the
/// pixel list. Gradients are accumulated per worker and merged in worker
/// order so results are reproducible for a fixed worker count.
template <std::floating_point T>
void pixel_terms(const Scene<T>& scene, std::span<const TrainView<T>> views,
                 std::span<const OrbitCamera> cams, std::span<const PixelRef> pixels,
                 const FitConfig& cfg, bool camera_grads, std::uint64_t sample_seed,
                 std::vector<Scene<T>>& worker_grads, LossAndGrads<T>& out) {
  const int k = scene.decoder.radiance_channels();
  const std::size_t n = pixels.size();
  const double inv_photo = 1.0 / (static_cast<double>(n) * k);
  const double inv_mask = 1.0 / static_cast<double>(n);
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n)));
  if (static_cast<int>(worker_grads.size()) < workers) {
    worker_grads.resize(workers, scene.zeros_like());
  }
  for (int w = 0; w < workers; ++w) fill_zero(worker_grads[w]);
  std::vector<double> photo(workers, 0.0), mask(workers, 0.0);
  std::vector<std::vector<std::array<double, kCameraParams>>> cam_grads(
      workers, std::vector<std::array<double, kCameraParams>>(views.size()));

  parallel_ranges(n, workers, [&](int w, std::size_t b, std::size_t e) {
    RayTracer<T> tracer(scene, cfg.samples);
    std::vector<T> raw(k), draw(k);
    Scene<T>& g = worker_grads[w];
    const auto& bg = scene.background;
    for (std::size_t i = b; i < e; ++i) {
      const PixelRef& px = pixels[i];
      const auto& view = views[px.view];
      const OrbitCamera& cam = cams[px.view];
      const int row = px.pixel / cam.width;
      const int col = px.pixel % cam.width;
      const Ray ray = camera_ray(cam, row, col);
      const auto s = stratified_samples(ray, cfg.samples, cfg.jitter, sample_seed, i);
      const T m = tracer.forward(ray, s, std::span<T>(raw));
      T dmask = 0;
      for (int c = 0; c < k; ++c) {
        const std::size_t bi = (static_cast<std::size_t>(row) * bg.width + col) * k + c;
        const T bgc = sigmoid(bg.params[bi]);
        const T gen = (T(1) - m) * bgc + raw[c];
        const double err = static_cast<double>(gen) - static_cast<double>(view.rgb.at(row, col, c));
        photo[w] += err * err;
        const T dgen = static_cast<T>(2.0 * err * inv_photo);
        draw[c] = dgen;
        dmask -= dgen * bgc;
        g.background.params[bi] += dgen * (T(1) - m) * bgc * (T(1) - bgc);
      }
      const double merr = static_cast<double>(m) - static_cast<double>(view.mask.at(row, col));
      mask[w] += merr * merr;
      dmask += static_cast<T>(2.0 * cfg.lambda_mask * merr * inv_mask);
      const auto sums = tracer.backward(std::span<const T>(draw), dmask, &g, camera_grads);
      if (camera_grads) {
        const auto cg = residual_gradient(
            cam, camera_gradient(camera_ray_jacobian(cam, row, col), sums.origin, sums.direction));
        for (int p = 0; p < kCameraParams; ++p) cam_grads[w][px.view][p] += cg[p];
      }
    }
  });

  for (int w = 0; w < workers; ++w) {
    accumulate(out.scene, worker_grads[w]);
    out.photometric += photo[w];
    out.mask += mask[w];
    for (std::size_t v = 0; v < views.size(); ++v)
      for (int p = 0; p < kCameraParams; ++p) out.residuals[v][p] += cam_grads[w][v][p];
  }
  out.photometric *= inv_photo;
  out.mask *= inv_mask;
}

}  // namespace detail

/// Full-frame loss of one view:
///   mean |I^gen - rgb|^2 + lambda_mask mean (I^m - mask)^2 + lambda_cam |residual|^2
/// with gradients for the scene and (when cfg.residuals) the residual.
/// Sampling is deterministic (midpoints) regardless of cfg.jitter.
template <std::floating_point T>
LossAndGrads<T> loss_and_grads(const Scene<T>& scene, const TrainView<T>& view,
                               const FitConfig& cfg) {
  scene.validate();
  view.validate();
  cfg.validate();
  if (view.rgb.channels != scene.decoder.radiance_channels() ||
      view.rgb.height != scene.background.height || view.rgb.width != scene.background.width) {
    throw InvalidInput("view '" + view.id + "' does not match the scene's image shape");
  }
  FitConfig c = cfg;
  c.jitter = false;
  std::vector<detail::PixelRef> pixels(view.rgb.pixel_count());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = {0, static_cast<int>(i)};
  const OrbitCamera cam = cfg.residuals ? view.render_camera() : view.camera;
  LossAndGrads<T> out;
  out.scene = scene.zeros_like();
  out.residuals.assign(1, {});
  std::vector<Scene<T>> scratch;
  detail::pixel_terms<T>(scene, std::span<const TrainView<T>>(&view, 1),
                         std::span<const OrbitCamera>(&cam, 1), pixels, c, cfg.residuals, c.seed,
                         scratch, out);
  out.camera = cfg.residuals ? view.residual.squared_norm() : 0.0;
  out.loss = out.photometric + cfg.lambda_mask * out.mask + cfg.lambda_cam * out.camera;
  if (!std::isfinite(out.loss)) throw InvalidState("non-finite loss for view '" + view.id + "'");
  if (cfg.residuals) {
    const auto r = view.residual.to_array();
    for (int p = 0; p < kCameraParams; ++p) out.residuals[0][p] += 2.0 * cfg.lambda_cam * r[p];
  } else {
    out.residuals[0] = {};
  }
  return out;
}

struct ViewScore {
  std::string id;
  double psnr = 0.0;
  double mask_mse = 0.0;
};

struct FitReport {
  std::vector<double> loss_curve;
  std::vector<ViewScore> views;  // per training view, at label + residual
  double mask_mse = 0.0;         // mean over training views
  std::vector<std::pair<std::string, CameraResidual>> residuals;
  double mean_residual_norm() const {
    if (residuals.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [id, r] : residuals) s += r.norm();
    return s / static_cast<double>(residuals.size());
  }
};

template <std::floating_point T>
struct FitResult {
  Scene<T> scene;
  std::vector<CameraResidual> residuals;
  FitReport report;
};

/// First-order optimizer over flat parameter spans. Adam or heavy-ball
/// momentum; each span carries its own learning rate.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double beta1, double beta2, double eps)
      : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Registers a parameter block; returns its handle.
  std::size_t add(std::size_t size, double lr) {
    m_.emplace_back(size, 0.0);
    v_.emplace_back(kind_ == OptimizerKind::Adam ? size : 0, 0.0);
    lr_.push_back(lr);
    steps_.push_back(0);
    return m_.size() - 1;
  }

  template <typename P, typename G>
  void update(std::size_t handle, std::span<P> params, std::span<const G> grads) {
    auto& m = m_[handle];
    const double lr = lr_[handle];
    const int t = ++steps_[handle];  // Adam bias correction counts this block's own updates
    if (kind_ == OptimizerKind::Momentum) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1_ * m[i] + static_cast<double>(grads[i]);
        params[i] = static_cast<P>(params[i] - lr * m[i]);
      }
      return;
    }
    auto& v = v_[handle];
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      params[i] = static_cast<P>(params[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
    }
  }

 private:
  OptimizerKind kind_;
  double beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<double> lr_;
  std::vector<int> steps_;
};

/// Composite and mask rendered at `cam` with midpoint sampling.
template <std::floating_point T>
RenderOutput<T> render_view(const Scene<T>& scene, const OrbitCamera& cam, int samples,
                            int workers = 1) {
  RenderOptions o;
  o.samples = samples;
  o.workers = workers;
  return volume_render(scene, cam, o);
}

template <std::floating_point T>
ViewScore score_view(const Scene<T>& scene, const TrainView<T>& view, const OrbitCamera& cam,
                     int samples, int workers = 1) {
  const auto out = render_view(scene, cam, samples, workers);
  return {view.id, psnr(out.composite, view.rgb), mean_squared_error(out.mask, view.mask)};
}

/// Called after every step with (iteration, loss); return false to stop early.
using FitCallback = std::function<bool(int, double)>;

/// Multi-view reconstruction: minimizes the mean over views of the per-view
/// loss of loss_and_grads, estimating the image terms on random pixel
/// minibatches. Residuals start from the values stored in `views` when
/// cfg.residuals is set and stay untouched otherwise.
template <std::floating_point T>
FitResult<T> fit_scene(std::span<const TrainView<T>> views, const FitConfig& cfg, Scene<T> scene,
                       const FitCallback& callback = {}) {
  cfg.validate();
  scene.validate();
  if (views.empty()) throw InvalidInput("fit_scene needs at least one view");
  for (const auto& v : views) {
    v.validate();
    if (v.rgb.channels != scene.decoder.radiance_channels() ||
        v.rgb.height != scene.background.height || v.rgb.width != scene.background.width) {
      throw InvalidInput("view '" + v.id + "' does not match the scene's image shape");
    }
  }
  const std::size_t nv = views.size();
  std::vector<CameraResidual> residuals(nv);
  if (cfg.residuals)
    for (std::size_t v = 0; v < nv; ++v) residuals[v] = views[v].residual;

  Optimizer opt(cfg.optimizer, cfg.momentum, cfg.beta2, cfg.epsilon);
  std::vector<std::size_t> scene_handles;
  for (auto blk : parameter_blocks(scene)) scene_handles.push_back(opt.add(blk.size(), cfg.lr_scene));
  const std::size_t res_handle = opt.add(nv * kCameraParams, cfg.lr_residual);

  const CounterRng rng(cfg.seed);
  std::vector<detail::PixelRef> pixels(cfg.batch);
  std::vector<OrbitCamera> cams(nv);
  std::vector<Scene<T>> worker_grads;
  LossAndGrads<T> lg;
  lg.scene = scene.zeros_like();
  std::vector<double> res_params(nv * kCameraParams), res_grads(nv * kCameraParams);
  FitReport report;
  report.loss_curve.reserve(cfg.iterations);

  for (int it = 0; it < cfg.iterations; ++it) {
    try {
      for (std::size_t v = 0; v < nv; ++v) {
        cams[v] = cfg.residuals ? apply_camera_residual(views[v].camera, residuals[v]) : views[v].camera;
      }
    } catch (const InvalidState& e) {
      throw DivergenceError("fit diverged at iteration " + std::to_string(it) + ": " + e.what(), it - 1);
    }
    for (int b = 0; b < cfg.batch; ++b) {
      const auto v = static_cast<int>(rng.below(nv, static_cast<std::uint64_t>(it), b, 0));
      const auto p = static_cast<int>(rng.below(views[v].rgb.pixel_count(), it, b, 1));
      pixels[b] = {v, p};
    }
    fill_zero(lg.scene);
    lg.residuals.assign(nv, {});
    lg.photometric = lg.mask = 0.0;
    try {
      detail::pixel_terms<T>(scene, views, cams, pixels, cfg, cfg.residuals,
                             rng.bits(static_cast<std::uint64_t>(it), 0, 2), worker_grads, lg);
    } catch (const InvalidState& e) {
      // non-finite densities after a blown-up update
      throw DivergenceError("fit diverged at iteration " + std::to_string(it) + ": " + e.what(), it - 1);
    }
    double cam_term = 0.0;
    if (cfg.residuals) {
      for (std::size_t v = 0; v < nv; ++v) {
        cam_term += residuals[v].squared_norm();
        const auto r = residuals[v].to_array();
        for (int p = 0; p < kCameraParams; ++p) {
          lg.residuals[v][p] += 2.0 * cfg.lambda_cam * r[p] / static_cast<double>(nv);
        }
      }
      cam_term /= static_cast<double>(nv);
    }
    const double loss = lg.photometric + cfg.lambda_mask * lg.mask + cfg.lambda_cam * cam_term;
    if (!std::isfinite(loss)) {
      throw DivergenceError("fit diverged at iteration " + std::to_string(it), it - 1);
    }
    report.loss_curve.push_back(loss);

    auto params = parameter_blocks(scene);
    const auto grads = parameter_blocks(std::as_const(lg.scene));
    for (std::size_t i = 0; i < params.size(); ++i) opt.update(scene_handles[i], params[i], grads[i]);
    if (cfg.residuals && it >= cfg.residual_warmup) {
      for (std::size_t v = 0; v < nv; ++v) {
        const auto r = residuals[v].to_array();
        for (int p = 0; p < kCameraParams; ++p) {
          res_params[v * kCameraParams + p] = r[p];
          res_grads[v * kCameraParams + p] = lg.residuals[v][p];
        }
      }
      opt.update(res_handle, std::span<double>(res_params), std::span<const double>(res_grads));
      for (std::size_t v = 0; v < nv; ++v) {
        std::array<double, kCameraParams> r{};
        for (int p = 0; p < kCameraParams; ++p) r[p] = res_params[v * kCameraParams + p];
        residuals[v] = CameraResidual::from_array(r);
      }
    }
    for (auto blk : parameter_blocks(std::as_const(scene)))
      for (T x : blk)
        if (!std::isfinite(x)) {
          throw DivergenceError("fit diverged at iteration " + std::to_string(it) + ": non-finite parameter", it);
        }
    if (callback && !callback(it, loss)) break;
  }

  for (std::size_t v = 0; v < nv; ++v) {
    const OrbitCamera cam =
        cfg.residuals ? apply_camera_residual(views[v].camera, residuals[v]) : views[v].camera;
    report.views.push_back(score_view(scene, views[v], cam, cfg.samples, cfg.workers));
    report.mask_mse += report.views.back().mask_mse / static_cast<double>(nv);
    report.residuals.emplace_back(views[v].id, residuals[v]);
  }
  return {std::move(scene), std::move(residuals), std::move(report)};
}

// ---------------------------------------------------------------------------
// Representation ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  int depth = 0;
  int channels = 0;
  std::size_t parameters = 0;
  double front_psnr = 0.0;
  double back_psnr = 0.0;
};

struct AblationTable {
  AblationRow triplane;  // D = 1
  AblationRow trigrid;   // D = base depth
};

inline bool is_back_view(double yaw) { return std::abs(wrap_angle(yaw)) >= 0.5 * std::numbers::pi; }

/// Mean PSNR of `views` rendered at their labeled cameras, split by
/// front (|yaw| < 90 deg) and back.
template <std::floating_point T>
std::pair<double, double> front_back_psnr(const Scene<T>& scene, std::span<const TrainView<T>> views,
                                          int samples, int workers = 1) {
  double front = 0.0, back = 0.0;
  int nf = 0, nb = 0;
  for (const auto& v : views) {
    const double p = score_view(scene, v, v.camera, samples, workers).psnr;
    if (is_back_view(v.camera.yaw)) {
      back += p;
      ++nb;
    } else {
      front += p;
      ++nf;
    }
  }
  return {nf ? front / nf : 0.0, nb ? back / nb : 0.0};
}

/// Fits the same views twice, once with the configured depth and once as a
/// tri-plane (D = 1) whose channel count is multiplied by the base depth so
/// both tri-grids hold the same number of features. Everything else (seed,
/// budget, decoder widths) is shared.
template <std::floating_point T>
AblationTable ablate_representation(std::span<const TrainView<T>> train,
                                    std::span<const TrainView<T>> held_out, const FitConfig& cfg,
                                    const SceneConfig& base, std::uint64_t init_seed) {
  bool front = false, back = false;
  for (const auto& v : held_out) (is_back_view(v.camera.yaw) ? back : front) = true;
  if (!front || !back) throw InvalidInput("ablation needs held-out front and back views");
  auto run = [&](const SceneConfig& sc) {
    auto fit = fit_scene<T>(train, cfg, make_scene<T>(sc, init_seed));
    const auto [f, b] = front_back_psnr<T>(fit.scene, held_out, cfg.samples, cfg.workers);
    return AblationRow{sc.depth, sc.channels, fit.scene.parameter_count(), f, b};
  };
  SceneConfig plane = base;
  plane.depth = 1;
  plane.channels = base.channels * base.depth;
  AblationTable t;
  t.trigrid = run(base);
  t.triplane = run(plane);
  return t;
}

// ---------------------------------------------------------------------------
// Photometric camera registration
// ---------------------------------------------------------------------------

struct RegisterConfig {
  int iterations = 50;
  int samples = 48;
  double initial_damping = 1e-3;
  double tolerance = 1e-12;  // stop when the accepted loss decrease falls below this
  int workers = 1;
};

struct RegisterResult {
  OrbitCamera camera;
  double loss = 0.0;
  std::vector<double> loss_history;  // accepted losses, first entry = initial camera
  int iterations = 0;
};

namespace detail {

/// Full-frame composite error and, if requested, the Gauss-Newton system
/// J^T J and J^T r in residual units (yaw, pitch, radius, normalized cx, cy).
template <std::floating_point T>
double registration_system(const Scene<T>& scene, const Image<T>& target, const OrbitCamera& cam,
                           const RegisterConfig& cfg, bool build,
                           std::array<std::array<double, kCameraParams>, kCameraParams>* jtj,
                           std::array<double, kCameraParams>* jtr) {
  const int k = scene.decoder.radiance_channels();
  const auto bg = background_for(scene, cam);
  const int workers = std::max(1, cfg.workers);
  struct Acc {
    double sse = 0.0;
    std::array<std::array<double, kCameraParams>, kCameraParams> jtj{};
    std::array<double, kCameraParams> jtr{};
  };
  std::vector<Acc> acc(workers);
  parallel_ranges(static_cast<std::size_t>(cam.height), workers, [&](int w, std::size_t rb, std::size_t re) {
    RayTracer<T> tracer(scene, cfg.samples);
    std::vector<T> raw(k), draw(k);
    for (std::size_t r = rb; r < re; ++r) {
      const int row = static_cast<int>(r);
      for (int col = 0; col < cam.width; ++col) {
        const Ray ray = camera_ray(cam, row, col);
        const auto s = stratified_samples(ray, cfg.samples, false, 0);
        std::array<double, 8> err{};
        std::array<std::array<double, kCameraParams>, 8> jac{};
        const T m = tracer.forward(ray, s, std::span<T>(raw));
        for (int c = 0; c < k; ++c) {
          const double gen = (1.0 - m) * bg.at(row, col, c) + raw[c];
          err[c] = gen - target.at(row, col, c);
          acc[w].sse += err[c] * err[c];
        }
        if (!build) continue;
        const RayJacobian jr = camera_ray_jacobian(cam, row, col);
        for (int c = 0; c < k; ++c) {
          std::fill(draw.begin(), draw.end(), T(0));
          draw[c] = 1;
          const auto sums = tracer.backward(std::span<const T>(draw), -bg.at(row, col, c), nullptr, true);
          jac[c] = residual_gradient(cam, camera_gradient(jr, sums.origin, sums.direction));
        }
        for (int c = 0; c < k; ++c) {
          for (int a = 0; a < kCameraParams; ++a) {
            acc[w].jtr[a] += jac[c][a] * err[c];
            for (int b = 0; b < kCameraParams; ++b) acc[w].jtj[a][b] += jac[c][a] * jac[c][b];
          }
        }
      }
    }
  });
  double sse = 0.0;
  for (const auto& a : acc) {
    sse += a.sse;
    if (!build) continue;
    for (int i = 0; i < kCameraParams; ++i) {
      (*jtr)[i] += a.jtr[i];
      for (int j = 0; j < kCameraParams; ++j) (*jtj)[i][j] += a.jtj[i][j];
    }
  }
  return sse / static_cast<double>(target.data.size());
}

/// Solves the symmetric positive definite system a x = b by Gaussian
/// elimination with partial pivoting. Returns false if singular.
inline bool solve5(std::array<std::array<double, kCameraParams>, kCameraParams> a,
                   std::array<double, kCameraParams> b, std::array<double, kCameraParams>& x) {
  constexpr int n = kCameraParams;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (!(std::abs(a[piv][c]) > 0.0)) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int j = r + 1; j < n; ++j) s -= a[r][j] * x[j];
    x[r] = s / a[r][r];
  }
  return true;
}

}  // namespace detail

/// Refines (yaw, pitch, radius, cx, cy) of `initial` so the scene's composite
/// matches `target` in the pixel-wise L2 sense. Levenberg-Marquardt on the
/// full frame; a step is accepted only if it does not increase the loss.
template <std::floating_point T>
RegisterResult register_camera(const Scene<T>& scene, const Image<T>& target,
                               const OrbitCamera& initial, const RegisterConfig& cfg = {}) {
  scene.validate();
  initial.validate();
  if (target.height != initial.height || target.width != initial.width ||
      target.channels != scene.decoder.radiance_channels()) {
    throw InvalidInput("register_camera: target does not match the camera size");
  }
  if (target.channels > 8) throw InvalidInput("register_camera supports at most 8 channels");
  RegisterResult res;
  res.camera = initial;
  double damping = cfg.initial_damping;
  std::array<std::array<double, kCameraParams>, kCameraParams> jtj{};
  std::array<double, kCameraParams> jtr{};
  res.loss = detail::registration_system(scene, target, res.camera, cfg, true, &jtj, &jtr);
  if (!std::isfinite(res.loss)) throw DivergenceError("registration loss is not finite", -1);
  res.loss_history.push_back(res.loss);
  for (int it = 0; it < cfg.iterations && res.loss > 0.0; ++it) {
    res.iterations = it + 1;
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      auto a = jtj;
      for (int i = 0; i < kCameraParams; ++i) a[i][i] += damping * (jtj[i][i] + 1e-12);
      std::array<double, kCameraParams> neg{}, step{};
      for (int i = 0; i < kCameraParams; ++i) neg[i] = -jtr[i];
      if (!detail::solve5(a, neg, step)) {
        damping *= 10.0;
        continue;
      }
      OrbitCamera trial = res.camera;
      try {
        trial = apply_camera_residual(res.camera, CameraResidual::from_array(step));
      } catch (const InvalidState&) {
        damping *= 10.0;
        continue;
      }
      const double l = detail::registration_system(scene, target, trial, cfg, false, nullptr, nullptr);
      if (std::isfinite(l) && l <= res.loss) {
        const double gain = res.loss - l;
        res.camera = trial;
        res.loss = l;
        res.loss_history.push_back(l);
        damping = std::max(1e-9, damping * 0.3);
        accepted = true;
        if (gain < cfg.tolerance) return res;
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) break;
    jtj = {};
    jtr = {};
    detail::registration_system(scene, target, res.camera, cfg, true, &jtj, &jtr);
  }
  return res;
}

}  // namespace trigrid
