// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "trigrid/alignment.hpp"

namespace trigrid {
namespace {

LandmarkSet random_landmarks(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Point2 c{40 + 60 * u(rng), 40 + 60 * u(rng)};
  const double d = 10 + 30 * u(rng);
  LandmarkSet lm;
  lm.points[LandmarkSet::kLeftEye] = {c.x - 0.5 * d, c.y - 0.5 * d};
  lm.points[LandmarkSet::kRightEye] = {c.x + 0.5 * d, c.y - 0.5 * d};
  lm.points[LandmarkSet::kNose] = {c.x, c.y};
  lm.points[LandmarkSet::kMouthLeft] = {c.x - 0.4 * d, c.y + 0.5 * d};
  lm.points[LandmarkSet::kMouthRight] = {c.x + 0.4 * d, c.y + 0.5 * d};
  return lm;
}

TEST(Frontal, CanonicalLandmarksAreAFixedPoint) {
  for (auto [w, h] : {std::pair{64, 64}, {128, 96}}) {
    const auto t = align_frontal(canonical_landmarks(w, h), w, h);
    EXPECT_NEAR(t.scale, 1.0, 1e-12);
    EXPECT_NEAR(t.translation.x, 0.0, 1e-12);
    EXPECT_NEAR(t.translation.y, 0.0, 1e-12);
  }
}

TEST(Frontal, MapsHeadCenterToOutputCenter) {
  std::mt19937 rng(1);
  const auto lm = random_landmarks(rng);
  const auto t = align_frontal(lm, 64, 64);
  const Point2 c = t.apply(lm.head_center());
  EXPECT_NEAR(c.x, 32.0, 1e-12);
  EXPECT_NEAR(c.y, 32.0, 1e-12);
  EXPECT_NEAR(distance(t.apply(lm.points[0]), t.apply(lm.points[1])), 0.22 * 64, 1e-12);
}

TEST(Frontal, Errors) {
  LandmarkSet lm = canonical_landmarks(64, 64);
  lm.points[1] = lm.points[0];
  EXPECT_THROW(align_frontal(lm, 64, 64), InvalidInput);
  EXPECT_THROW(align_frontal(canonical_landmarks(64, 64), 0, 64), InvalidInput);
  lm = canonical_landmarks(64, 64);
  lm.points[3].x = std::nan("");
  EXPECT_THROW(align_frontal(lm, 64, 64), InvalidInput);
}

TEST(Calibration, RecoversConstructedOffsets) {
  std::mt19937 rng(2);
  const int W = 64, H = 64;
  const double rho = 1.37;
  const Point2 tau{0.031, -0.118};
  std::vector<std::pair<LandmarkSet, HeadBox>> pairs;
  for (int i = 0; i < 20; ++i) {
    const auto lm = random_landmarks(rng);
    const double s_land = 0.22 * W / lm.interocular();
    HeadBox box;
    box.width = W * rho / s_land;
    box.height = 1.2 * box.width;
    box.center = lm.head_center() - Point2{tau.x * box.width, tau.y * box.height};
    pairs.emplace_back(lm, box);
  }
  const auto cal = calibrate_offsets(pairs, W, H);
  EXPECT_NEAR(cal.scale_ratio, rho, 1e-6);
  EXPECT_NEAR(cal.offset.x, tau.x, 1e-6);
  EXPECT_NEAR(cal.offset.y, tau.y, 1e-6);
  EXPECT_EQ(cal.pairs, 20u);
  // with the calibration applied, box crops coincide with landmark crops
  for (const auto& [lm, box] : pairs) {
    const auto a = align_frontal(lm, W, H);
    const auto b = align_large_pose(box, cal, W, H);
    EXPECT_NEAR(b.scale / a.scale, 1.0, 1e-9);
    EXPECT_NEAR(distance(a.source_center(), b.source_center()), 0.0, 1e-9);
  }
}

TEST(Calibration, IdenticalRulesGiveIdentity) {
  std::mt19937 rng(3);
  std::vector<std::pair<LandmarkSet, HeadBox>> pairs;
  for (int i = 0; i < 5; ++i) {
    const auto lm = random_landmarks(rng);
    HeadBox box;
    box.width = lm.interocular() / 0.22;
    box.height = box.width;
    box.center = lm.head_center();
    pairs.emplace_back(lm, box);
  }
  const auto cal = calibrate_offsets(pairs, 64, 64);
  EXPECT_NEAR(cal.scale_ratio, 1.0, 1e-12);
  EXPECT_NEAR(cal.offset.x, 0.0, 1e-12);
  EXPECT_NEAR(cal.offset.y, 0.0, 1e-12);
}

TEST(Calibration, Errors) {
  EXPECT_THROW(calibrate_offsets({}, 64, 64), InvalidInput);
  HeadBox box{{10, 10}, 20, 20, "x"};
  OffsetCalibration cal;
  cal.scale_ratio = -1.0;
  EXPECT_THROW(align_large_pose(box, cal, 64, 64), InvalidState);
  box.width = 0.0;
  EXPECT_THROW(align_large_pose(box, OffsetCalibration{}, 64, 64), InvalidInput);
}

TEST(LargePose, NeutralCalibrationIsTheRawBoxCrop) {
  const HeadBox box{{31.5, 40.25}, 22.0, 27.0, "synthetic"};
  EXPECT_EQ(align_large_pose(box, OffsetCalibration{}, 64, 48), box_crop(box, 64, 48));
}

TEST(CropTransformTest, ComposeAndInvert) {
  const CropTransform a{2.0, {1.0, -3.0}, 64, 64};
  const CropTransform b{0.5, {4.0, 2.0}, 32, 32};
  const auto ab = compose(a, b);
  const Point2 p{7.25, -1.5};
  const Point2 q = b.apply(a.apply(p));
  EXPECT_NEAR(ab.apply(p).x, q.x, 1e-12);
  EXPECT_NEAR(ab.apply(p).y, q.y, 1e-12);
  EXPECT_NEAR(ab.invert(q).x, p.x, 1e-12);
  EXPECT_EQ(ab.out_width, 32);
}

TEST(ApplyCrop, IdentityAndIntegerShift) {
  Image<double> img(5, 7, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.01 * static_cast<double>(i);
  EXPECT_EQ(apply_crop(img, CropTransform{1.0, {0, 0}, 7, 5}), img);
  const auto shifted = apply_crop(img, CropTransform{1.0, {2.0, -1.0}, 7, 5}, 0.5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const int sr = r + 1, sc = c - 2;
        const double expect = (sr < 5 && sc >= 0) ? img.at(sr, sc, ch) : 0.5;
        EXPECT_EQ(shifted.at(r, c, ch), expect);
      }
}

}  // namespace
}  // namespace trigrid
