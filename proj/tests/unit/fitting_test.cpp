// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "trigrid/fitting.hpp"
#include "trigrid/io.hpp"
#include "trigrid/synthdata.hpp"

namespace trigrid {
namespace {

SceneConfig tiny_scene_config(int size = 16) {
  SceneConfig sc;
  sc.resolution = 8;
  sc.channels = 4;
  sc.hidden = {16};
  sc.image_height = sc.image_width = size;
  return sc;
}

FitConfig tiny_fit(int iters = 20) {
  FitConfig fc;
  fc.iterations = iters;
  fc.samples = 16;
  fc.batch = 128;
  fc.seed = 5;
  fc.residual_warmup = 0;
  return fc;
}

std::vector<TrainView<double>> tiny_views(int n = 4, double noise = 0.0) {
  DatasetConfig dc;
  dc.views = n;
  dc.size = 16;
  dc.noise_yaw = noise;
  dc.seed = 9;
  return to_train_views<double>(make_dataset(ProxyScene{}, dc).views);
}

/// A view whose target is the scene's own render at `cam`.
TrainView<double> self_view(const Scene<double>& s, const OrbitCamera& cam, int samples) {
  const auto out = render_view(s, cam, samples);
  TrainView<double> v;
  v.id = "self";
  v.rgb = out.composite;
  v.mask = out.mask;
  v.camera = cam;
  return v;
}

OrbitCamera tiny_camera(double yaw) {
  OrbitCamera c;
  c.yaw = yaw;
  c.height = c.width = 16;
  return enclose_bounds(c, Bounds{});
}

TEST(Loss, ZeroWhenTheSceneReproducesTheTarget) {
  const auto s = make_scene<double>(tiny_scene_config(), 1);
  const auto v = self_view(s, tiny_camera(0.4), 16);
  auto fc = tiny_fit();
  const auto lg = loss_and_grads(s, v, fc);
  EXPECT_EQ(lg.loss, 0.0);
  for (auto blk : parameter_blocks(lg.scene))
    for (double g : blk) EXPECT_EQ(g, 0.0);
}

TEST(Loss, ResidualRegularizerTerm) {
  const auto s = make_scene<double>(tiny_scene_config(), 1);
  auto v = self_view(s, apply_camera_residual(tiny_camera(0.4), {0.1, 0, 0, 0, 0}), 16);
  v.camera = tiny_camera(0.4);
  v.residual = {0.1, 0, 0, 0, 0};
  auto fc = tiny_fit();
  fc.lambda_cam = 1.0;
  const auto lg = loss_and_grads(s, v, fc);
  EXPECT_NEAR(lg.camera, 0.01, 1e-15);
  EXPECT_NEAR(lg.loss, 0.01, 1e-15);
  EXPECT_NEAR(lg.residuals[0][0], 0.2, 1e-12);
}

TEST(Loss, RejectsMismatchedViews) {
  const auto s = make_scene<double>(tiny_scene_config(), 1);
  auto v = self_view(s, tiny_camera(0.0), 16);
  v.mask.data[0] = 1.5;
  EXPECT_THROW(loss_and_grads(s, v, tiny_fit()), InvalidInput);
  const auto other = make_scene<double>(tiny_scene_config(8), 1);
  EXPECT_THROW(loss_and_grads(other, self_view(s, tiny_camera(0.0), 16), tiny_fit()), InvalidInput);
}

TEST(FitConfigTest, Validation) {
  auto bad = [](auto edit) {
    FitConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](FitConfig& c) { c.iterations = -1; }).validate(), InvalidInput);
  EXPECT_THROW(bad([](FitConfig& c) { c.lr_scene = 0; }).validate(), InvalidInput);
  EXPECT_THROW(bad([](FitConfig& c) { c.lambda_cam = -1; }).validate(), InvalidInput);
  EXPECT_THROW(bad([](FitConfig& c) { c.samples = 1; }).validate(), InvalidInput);
  EXPECT_THROW(bad([](FitConfig& c) { c.momentum = 1.0; }).validate(), InvalidInput);
  EXPECT_THROW(bad([](FitConfig& c) { c.residual_warmup = -1; }).validate(), InvalidInput);
  EXPECT_NO_THROW(FitConfig{}.validate());
  EXPECT_EQ(optimizer_from_string(to_string(OptimizerKind::Momentum)), OptimizerKind::Momentum);
  EXPECT_THROW(optimizer_from_string("sgd"), InvalidInput);
}

TEST(OptimizerTest, AdamFirstStepMovesByTheLearningRate) {
  Optimizer opt(OptimizerKind::Adam, 0.9, 0.999, 1e-12);
  const auto h = opt.add(3, 0.05);
  std::vector<double> p{1.0, 2.0, 3.0};
  const std::vector<double> g{4.0, -0.001, 0.0};
  opt.update(h, std::span<double>(p), std::span<const double>(g));
  EXPECT_NEAR(p[0], 0.95, 1e-9);
  EXPECT_NEAR(p[1], 2.05, 1e-6);
  EXPECT_EQ(p[2], 3.0);
}

TEST(OptimizerTest, AdamBiasCorrectionIsPerBlock) {
  // a block first updated late must still take a full lr-sized first step
  Optimizer opt(OptimizerKind::Adam, 0.9, 0.999, 1e-12);
  const auto a = opt.add(1, 0.1);
  const auto b = opt.add(1, 0.05);
  std::vector<double> pa{0.0}, pb{0.0};
  const std::vector<double> g{2.0};
  for (int i = 0; i < 20; ++i) opt.update(a, std::span<double>(pa), std::span<const double>(g));
  EXPECT_NEAR(pa[0], -2.0, 1e-9);
  opt.update(b, std::span<double>(pb), std::span<const double>(g));
  EXPECT_NEAR(pb[0], -0.05, 1e-9);
}

TEST(OptimizerTest, HeavyBallMomentum) {
  Optimizer opt(OptimizerKind::Momentum, 0.5, 0.0, 0.0);
  const auto h = opt.add(1, 0.1);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  opt.update(h, std::span<double>(p), std::span<const double>(g));
  EXPECT_NEAR(p[0], -0.1, 1e-15);
  opt.update(h, std::span<double>(p), std::span<const double>(g));
  EXPECT_NEAR(p[0], -0.1 - 0.1 * 1.5, 1e-15);
}

TEST(Fit, ZeroIterationsReturnsTheInitialScene) {
  const auto views = tiny_views();
  const auto init = make_scene<double>(tiny_scene_config(), 4);
  const auto r = fit_scene<double>(views, tiny_fit(0), init);
  EXPECT_EQ(r.scene, init);
  EXPECT_TRUE(r.report.loss_curve.empty());
  EXPECT_EQ(r.report.views.size(), views.size());
}

TEST(Fit, LossDecreases) {
  const auto views = tiny_views();
  const auto r = fit_scene<double>(views, tiny_fit(60), make_scene<double>(tiny_scene_config(), 4));
  ASSERT_EQ(r.report.loss_curve.size(), 60u);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) {
    head += r.report.loss_curve[i];
    tail += r.report.loss_curve[50 + i];
  }
  EXPECT_LT(tail, 0.7 * head);
}

TEST(Fit, BitwiseDeterministicForFixedWorkers) {
  const auto views = tiny_views(3, 0.05);
  for (int workers : {1, 3}) {
    auto fc = tiny_fit(8);
    fc.workers = workers;
    const auto a = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 2));
    const auto b = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 2));
    EXPECT_EQ(encode_checkpoint(a.scene), encode_checkpoint(b.scene));
    EXPECT_EQ(a.scene, b.scene);
    EXPECT_EQ(a.report.loss_curve, b.report.loss_curve);
    EXPECT_EQ(a.residuals, b.residuals);
  }
}

TEST(Fit, CallbackCanStopEarly) {
  const auto views = tiny_views();
  const auto r = fit_scene<double>(views, tiny_fit(50), make_scene<double>(tiny_scene_config(), 4),
                                   [](int it, double) { return it < 4; });
  EXPECT_EQ(r.report.loss_curve.size(), 5u);
}

TEST(Fit, DivergenceReportsLastGoodIteration) {
  const auto views = tiny_views();
  auto sc = tiny_scene_config();
  sc.activation = Activation::Softplus;  // ReLU units just die under a huge step
  auto expect_divergence = [&](const FitConfig& fc) {
    try {
      fit_scene<double>(views, fc, make_scene<double>(sc, 4));
      ADD_FAILURE() << "expected divergence";
    } catch (const DivergenceError& e) {
      EXPECT_EQ(e.last_good_iteration(), 0) << e.what();
    }
  };
  auto blown_scene = tiny_fit(50);
  blown_scene.optimizer = OptimizerKind::Momentum;
  blown_scene.residuals = false;
  blown_scene.lr_scene = 1e200;
  expect_divergence(blown_scene);
  auto blown_camera = tiny_fit(50);
  blown_camera.lr_residual = 1e6;
  expect_divergence(blown_camera);
}

TEST(Fit, ResidualsStayPutWhenDisabled) {
  auto views = tiny_views();
  views[0].residual = {0.05, 0, 0, 0, 0};
  auto fc = tiny_fit(5);
  fc.residuals = false;
  const auto r = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 4));
  for (const auto& res : r.residuals) EXPECT_EQ(res, CameraResidual{});
}

TEST(Fit, ResidualWarmupHoldsResidualsAtZero) {
  const auto views = tiny_views(4, 0.1);
  auto fc = tiny_fit(6);
  fc.lr_residual = 3e-3;
  fc.residual_warmup = 6;
  const auto held = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 4));
  for (const auto& res : held.residuals) EXPECT_EQ(res, CameraResidual{});
  fc.residual_warmup = 3;
  const auto moved = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 4));
  double norm = 0;
  for (const auto& res : moved.residuals) norm += res.norm();
  EXPECT_GT(norm, 0.0);
}

TEST(Fit, StrongerRegularizerKeepsResidualsSmaller) {
  const auto views = tiny_views(6, 0.1);
  double last = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.1, 10.0, 1000.0}) {
    auto fc = tiny_fit(40);
    fc.lambda_cam = lambda;
    fc.lr_residual = 3e-3;
    const auto r = fit_scene<double>(views, fc, make_scene<double>(tiny_scene_config(), 4));
    const double norm = r.report.mean_residual_norm();
    EXPECT_LE(norm, last * (1.0 + 1e-9)) << "lambda_cam " << lambda;
    last = norm;
  }
}

TEST(Register, StationaryAtTheTrueCamera) {
  const auto s = make_scene<double>(tiny_scene_config(), 6);
  const auto cam = tiny_camera(0.7);
  const auto target = render_view(s, cam, 16).composite;
  RegisterConfig rc;
  rc.samples = 16;
  const auto r = register_camera(s, target, cam, rc);
  EXPECT_NEAR(r.camera.yaw, cam.yaw, 1e-4);
  EXPECT_NEAR(r.camera.pitch, cam.pitch, 1e-4);
  EXPECT_NEAR(r.camera.radius, cam.radius, 1e-4);
  EXPECT_NEAR(r.camera.cx, cam.cx, 1e-4);
  EXPECT_NEAR(r.camera.cy, cam.cy, 1e-4);
}

TEST(Register, AcceptedLossesNeverIncrease) {
  SceneConfig sc = tiny_scene_config();
  sc.feature_std = 0.6;
  const auto s = make_scene<double>(sc, 6);
  const auto target = render_view(s, tiny_camera(0.5), 16).composite;
  RegisterConfig rc;
  rc.samples = 16;
  const auto r = register_camera(s, target, tiny_camera(0.42), rc);
  ASSERT_GE(r.loss_history.size(), 2u);
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) {
    EXPECT_LE(r.loss_history[i], r.loss_history[i - 1]);
  }
  EXPECT_LT(std::abs(r.camera.yaw - 0.5), 0.08);
  EXPECT_THROW(register_camera(s, Image<double>(8, 8, 3), tiny_camera(0.5), rc), InvalidInput);
}

TEST(Ablation, TableShape) {
  const auto train = tiny_views(4);
  DatasetConfig dc;
  dc.size = 16;
  const auto held = to_train_views<double>(
      make_views_at(ProxyScene{}, {{0.0, 0.0}, {std::numbers::pi, 0.0}}, dc));
  const auto t = ablate_representation<double>(train, held, tiny_fit(3), tiny_scene_config(), 1);
  EXPECT_EQ(t.trigrid.depth, 3);
  EXPECT_EQ(t.triplane.depth, 1);
  EXPECT_GT(t.trigrid.parameters, 0u);
  EXPECT_GT(t.triplane.parameters, 0u);
  for (const auto* row : {&t.trigrid, &t.triplane}) {
    EXPECT_TRUE(std::isfinite(row->front_psnr));
    EXPECT_TRUE(std::isfinite(row->back_psnr));
  }
  const auto front_only = to_train_views<double>(make_views_at(ProxyScene{}, {{0.0, 0.0}}, dc));
  EXPECT_THROW(ablate_representation<double>(train, front_only, tiny_fit(1), tiny_scene_config(), 1),
               InvalidInput);
}

TEST(Ablation, BackViewRule) {
  EXPECT_FALSE(is_back_view(0.0));
  EXPECT_FALSE(is_back_view(1.5));
  EXPECT_TRUE(is_back_view(std::numbers::pi / 2));
  EXPECT_TRUE(is_back_view(-std::numbers::pi / 2));
  EXPECT_TRUE(is_back_view(std::numbers::pi));
}

}  // namespace
}  // namespace trigrid
