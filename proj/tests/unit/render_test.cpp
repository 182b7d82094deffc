// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "trigrid/render.hpp"

namespace trigrid {
namespace {

Scene<double> small_scene(std::uint64_t seed = 3) {
  SceneConfig sc;
  sc.resolution = 6;
  sc.channels = 4;
  sc.hidden = {8};
  sc.image_height = sc.image_width = 8;
  sc.feature_std = 0.5;
  auto s = make_scene<double>(sc, seed);
  s.decoder.layers.back().bias[0] = 1.0;  // visibly dense
  return s;
}

OrbitCamera small_camera(double yaw = 0.3, int size = 8) {
  OrbitCamera c;
  c.yaw = yaw;
  c.pitch = 0.1;
  c.height = c.width = size;
  return enclose_bounds(c, Bounds{});
}

Ray unit_ray(double t0 = 0.0, double t1 = 1.0) { return {{0, 0, 0}, {0, 0, 1}, t0, t1}; }

TEST(Samples, MidpointsWithoutJitter) {
  const auto s = stratified_samples(unit_ray(), 4, false, 0);
  ASSERT_EQ(s.t.size(), 4u);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(s.t[i], expect[i]);
    EXPECT_DOUBLE_EQ(s.delta[i], 0.25);
  }
}

TEST(Samples, JitterStaysInBinsAndIsKeyed) {
  const auto a = stratified_samples(unit_ray(2.0, 4.0), 16, true, 7, 5);
  const auto b = stratified_samples(unit_ray(2.0, 4.0), 16, true, 7, 5);
  const auto c = stratified_samples(unit_ray(2.0, 4.0), 16, true, 7, 6);
  EXPECT_EQ(a.t, b.t);
  EXPECT_NE(a.t, c.t);
  for (int i = 0; i < 16; ++i) {
    EXPECT_GE(a.t[i], 2.0 + i * 0.125);
    EXPECT_LT(a.t[i], 2.0 + (i + 1) * 0.125);
  }
  for (int i = 0; i < 15; ++i) EXPECT_DOUBLE_EQ(a.delta[i], a.t[i + 1] - a.t[i]);
  EXPECT_DOUBLE_EQ(a.delta[15], 0.125);
}

TEST(Samples, Errors) {
  EXPECT_THROW(stratified_samples(unit_ray(), 1, false, 0), InvalidInput);
  EXPECT_THROW(stratified_samples(unit_ray(1.0, 1.0), 4, false, 0), InvalidInput);
}

template <typename Field>
std::pair<double, std::array<double, 3>> render_field(Field f, int n) {
  const auto s = stratified_samples(unit_ray(), n, false, 0);
  std::array<double, 3> raw{};
  const double m = render_field_ray<double>(f, unit_ray(), s, std::span<double>(raw));
  return {m, raw};
}

TEST(Compositing, ZeroDensityIsTransparent) {
  const auto [m, raw] = render_field([](const Vec3d&, std::span<double> c) {
    std::fill(c.begin(), c.end(), 0.8);
    return 0.0;
  }, 32);
  EXPECT_EQ(m, 0.0);
  for (double v : raw) EXPECT_EQ(v, 0.0);
}

TEST(Compositing, HomogeneousMediumIsExact) {
  for (int n : {2, 7, 64}) {
    const auto [m, raw] = render_field([](const Vec3d&, std::span<double> c) {
      c[0] = 0.2;
      c[1] = 0.5;
      c[2] = 0.9;
      return 2.0;
    }, n);
    const double expect = 1.0 - std::exp(-2.0);
    EXPECT_NEAR(m, expect, 1e-6);
    EXPECT_NEAR(raw[0], 0.2 * expect, 1e-6);
    EXPECT_NEAR(raw[2], 0.9 * expect, 1e-6);
  }
}

TEST(Compositing, TwoSegmentMediumMatchesFineQuadrature) {
  // sigma = 1.5, color 0.9 on [0, 0.375); sigma = 4, color 0.2 on [0.375, 1]
  auto sigma = [](double t) { return t < 0.375 ? 1.5 : 4.0; };
  auto color = [](double t) { return t < 0.375 ? 0.9 : 0.2; };
  const auto [m, raw] = render_field([&](const Vec3d& p, std::span<double> c) {
    std::fill(c.begin(), c.end(), color(p.z));
    return sigma(p.z);
  }, 64);
  // oracle: 1e5-step left-Riemann march of dT = -sigma T dt, dI = T sigma c dt
  const int steps = 100000;
  const double dt = 1.0 / steps;
  double trans = 1.0, radiance = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = (i + 0.5) * dt;
    const double a = 1.0 - std::exp(-sigma(t) * dt);
    radiance += trans * a * color(t);
    trans *= 1.0 - a;
  }
  EXPECT_NEAR(m, 1.0 - trans, 1e-4);
  EXPECT_NEAR(raw[0], radiance, 1e-4);
}

TEST(Compositing, ConservationAndBounds) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sigma(20), rad(20 * 3, 0.5), delta(20, 0.07), trans(21);
    for (auto& s : sigma) s = trial % 2 ? u(rng) : u(rng) * 1e-3;
    std::array<double, 3> raw{};
    const double m = alpha_composite<double>(sigma, delta, rad, raw, trans);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
    EXPECT_NEAR(m + trans[20], 1.0, 1e-12);
  }
  std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()}, d(2, 0.1), r(6);
  std::array<double, 3> raw{};
  EXPECT_THROW(alpha_composite<double>(bad, d, r, raw), InvalidState);
}

Image<double> filled(int h, int w, int c, double v) { return Image<double>(h, w, c, v); }

TEST(Composite, ClosedFormCases) {
  const auto raw = filled(2, 3, 3, 0.1), bg = filled(2, 3, 3, 0.8);
  EXPECT_EQ(composite(raw, filled(2, 3, 1, 1.0), bg), raw);
  EXPECT_EQ(composite(filled(2, 3, 3, 0.0), filled(2, 3, 1, 0.0), bg), bg);
  const auto g = composite(raw, filled(2, 3, 1, 0.25), bg);
  for (double v : g.data) EXPECT_NEAR(v, 0.7, 1e-15);
  EXPECT_THROW(composite(raw, filled(2, 2, 1, 0.0), bg), InvalidInput);
  EXPECT_THROW(composite(raw, filled(2, 3, 1, 0.0), filled(2, 3, 1, 0.0)), InvalidInput);
}

TEST(Composite, Superposition) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rnd = [&](int c) {
    Image<double> img(3, 4, c);
    for (auto& v : img.data) v = u(rng);
    return img;
  };
  const auto r1 = rnd(3), r2 = rnd(3), b1 = rnd(3), b2 = rnd(3), m1 = rnd(1), m2 = rnd(1);
  const auto zero3 = filled(3, 4, 3, 0.0);
  auto add = [](Image<double> a, const Image<double>& b, double s = 1.0) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += s * b.data[i];
    return a;
  };
  // linear in raw for a black background, linear in background for zero raw
  auto lhs = composite(add(r1, r2), m1, zero3);
  auto rhs = add(composite(r1, m1, zero3), composite(r2, m1, zero3));
  for (std::size_t i = 0; i < lhs.data.size(); ++i) EXPECT_NEAR(lhs.data[i], rhs.data[i], 1e-14);
  lhs = composite(zero3, m1, add(b1, b2));
  rhs = add(composite(zero3, m1, b1), composite(zero3, m1, b2));
  for (std::size_t i = 0; i < lhs.data.size(); ++i) EXPECT_NEAR(lhs.data[i], rhs.data[i], 1e-14);
  // affine in the mask
  const double t = 0.3;
  Image<double> mix = m1;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = t * m1.data[i] + (1 - t) * m2.data[i];
  const auto a = composite(r1, m1, b1), b = composite(r1, m2, b1), c = composite(r1, mix, b1);
  for (std::size_t i = 0; i < c.data.size(); ++i) EXPECT_NEAR(c.data[i], t * a.data[i] + (1 - t) * b.data[i], 1e-14);
}

TEST(Upsample, ConstantAndIdentity) {
  const auto img = filled(3, 5, 2, 0.375);
  const auto up = bilinear_upsample(img, 3);
  EXPECT_EQ(up.height, 9);
  EXPECT_EQ(up.width, 15);
  for (double v : up.data) EXPECT_EQ(v, 0.375);
  EXPECT_EQ(bilinear_upsample(img, 1), img);
  EXPECT_THROW(bilinear_upsample(img, 0), InvalidInput);
}

TEST(Upsample, RampMatchesWeightExpansion) {
  Image<double> img(2, 2, 1);
  img.at(0, 0) = 0.0;
  img.at(0, 1) = 1.0;
  img.at(1, 0) = 2.0;
  img.at(1, 1) = 3.0;
  const auto up = bilinear_upsample(img, 2);
  // output pixel centers map to source coordinates -0.25, 0.25, 0.75, 1.25;
  // clamped: 0, 0.25, 0.75, 1
  const double pos[4] = {0.0, 0.25, 0.75, 1.0};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double v = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double wr = i == 0 ? 1 - pos[r] : pos[r];
          const double wc = j == 0 ? 1 - pos[c] : pos[c];
          v += wr * wc * img.at(i, j);
        }
      EXPECT_NEAR(up.at(r, c), v, 1e-6);
    }
}

TEST(Discriminator, SevenChannelsInFixedOrder) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> a(4, 4, 3), b(4, 4, 3), m(4, 4, 1);
  for (auto* img : {&a, &b, &m})
    for (auto& v : img->data) v = u(rng);
  const auto d = assemble_discriminator_input(a, b, m);
  EXPECT_EQ(d.raster.channels, 7);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        EXPECT_EQ(d.raster.at(r, c, ch), a.at(r, c, ch));
        EXPECT_EQ(d.raster.at(r, c, 3 + ch), b.at(r, c, ch));
      }
      EXPECT_EQ(d.raster.at(r, c, 6), m.at(r, c));
    }
  EXPECT_THROW(assemble_discriminator_input(a, Image<double>(2, 2, 3), m), InvalidInput);
  EXPECT_THROW(assemble_discriminator_input(a, b, Image<double>(4, 4, 3)), InvalidInput);
}

TEST(Discriminator, RenderedStackSharesSize) {
  const auto s = small_scene();
  RenderOptions o;
  o.samples = 8;
  const auto d = render_discriminator_input(s, small_camera(), 2, o);
  EXPECT_EQ(d.raster.height, 16);
  EXPECT_EQ(d.raster.width, 16);
  EXPECT_EQ(d.raster.channels, 7);
}

TEST(VolumeRender, OutputsAreConsistent) {
  const auto s = small_scene();
  RenderOptions o;
  o.samples = 16;
  const auto out = volume_render(s, small_camera(), o);
  for (double m : out.mask.data) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
  EXPECT_EQ(out.composite, composite(out.raw, out.mask, s.background.image()));
  // forward rendering is independent of the worker split
  o.workers = 3;
  const auto again = volume_render(s, small_camera(), o);
  EXPECT_EQ(again.raw, out.raw);
  EXPECT_EQ(again.mask, out.mask);
}

TEST(VolumeRender, BackgroundMismatchThrows) {
  const auto s = small_scene();
  EXPECT_THROW(volume_render(s, small_camera(0.3, 12), RenderOptions{}), InvalidInput);
}

TEST(VolumeRender, RollRotatesTheImage) {
  SceneConfig sc;
  sc.resolution = 16;
  sc.image_height = sc.image_width = 64;
  sc.feature_std = 0.6;
  auto s = make_scene<double>(sc, 12);
  s.decoder.layers.back().bias[0] = 0.5;
  RenderOptions o;
  o.samples = 24;
  const auto base_cam = small_camera(0.8, 64);
  auto rolled_cam = base_cam;
  rolled_cam.roll = 0.5 * std::numbers::pi;
  const auto a = volume_render(s, base_cam, o).raw;
  const auto b = volume_render(s, rolled_cam, o).raw;
  // a quarter roll maps pixel (row, col) of the rolled view to (W - 1 - col, row)
  double mae = 0.0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      for (int ch = 0; ch < 3; ++ch) mae += std::abs(b.at(r, c, ch) - a.at(63 - c, r, ch));
  mae /= 64.0 * 64.0 * 3.0;
  EXPECT_LT(mae, 2e-2);
}

TEST(VolumeRenderBackward, ZeroUpstreamGivesZeroGradients) {
  const auto s = small_scene();
  const auto cam = small_camera();
  RenderOptions o;
  o.samples = 8;
  const auto g = volume_render_backward(s, cam, o, filled(8, 8, 3, 0.0), filled(8, 8, 1, 0.0));
  for (auto blk : parameter_blocks(g.scene))
    for (double v : blk) EXPECT_EQ(v, 0.0);
  for (double v : g.camera) EXPECT_EQ(v, 0.0);
}

TEST(VolumeRenderBackward, MaskGrowsWithUniformDensityOffset) {
  const auto s = small_scene();
  const auto cam = small_camera();
  RenderOptions o;
  o.samples = 12;
  const auto g = volume_render_backward(s, cam, o, filled(8, 8, 3, 0.0), filled(8, 8, 1, 1.0));
  // the density-logit bias shifts every sample's density up together
  const double analytic = g.scene.decoder.layers.back().bias[0];
  auto total_mask = [&](double bias) {
    auto t = s;
    t.decoder.layers.back().bias[0] = bias;
    double sum = 0.0;
    for (double m : volume_render(t, cam, o).mask.data) sum += m;
    return sum;
  };
  const double b = s.decoder.layers.back().bias[0], h = 1e-5;
  const double fd = (total_mask(b + h) - total_mask(b - h)) / (2 * h);
  EXPECT_GT(fd, 0.0);
  EXPECT_GT(analytic, 0.0);
  EXPECT_NEAR(analytic, fd, 1e-4 * std::abs(fd));
}

TEST(VolumeRenderBackward, WorkerCountOnlyChangesSummationOrder) {
  const auto s = small_scene();
  const auto cam = small_camera();
  RenderOptions o;
  o.samples = 8;
  const auto up_raw = filled(8, 8, 3, 0.3), up_mask = filled(8, 8, 1, -0.2);
  const auto a = volume_render_backward(s, cam, o, up_raw, up_mask);
  o.workers = 4;
  const auto b = volume_render_backward(s, cam, o, up_raw, up_mask);
  const auto c = volume_render_backward(s, cam, o, up_raw, up_mask);
  auto ba = parameter_blocks(a.scene);
  auto bb = parameter_blocks(b.scene);
  auto bc = parameter_blocks(c.scene);
  for (std::size_t k = 0; k < ba.size(); ++k)
    for (std::size_t i = 0; i < ba[k].size(); ++i) {
      EXPECT_NEAR(ba[k][i], bb[k][i], 1e-12);
      EXPECT_EQ(bb[k][i], bc[k][i]);
    }
  EXPECT_EQ(b.camera, c.camera);
}

}  // namespace
}  // namespace trigrid
