// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trigrid/common.hpp"

namespace trigrid {

// Image coordinates are continuous: pixel (row, col) covers [col, col + 1) x
// [row, row + 1), so its center is (col + 0.5, row + 0.5).

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Five frontal landmarks in image pixels.
struct LandmarkSet {
  enum Index { kLeftEye = 0, kRightEye = 1, kNose = 2, kMouthLeft = 3, kMouthRight = 4 };
  std::array<Point2, 5> points{};

  Point2 eye_center() const { return 0.5 * (points[kLeftEye] + points[kRightEye]); }
  Point2 mouth_center() const { return 0.5 * (points[kMouthLeft] + points[kMouthRight]); }
  /// Midpoint of the eye midpoint and the mouth midpoint.
  Point2 head_center() const { return 0.5 * (eye_center() + mouth_center()); }
  double interocular() const { return distance(points[kLeftEye], points[kRightEye]); }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

struct HeadBox {
  Point2 center;
  double width = 0.0;
  double height = 0.0;
  std::string tag = "synthetic";

  void validate() const {
    if (!(width > 0.0) || !(height > 0.0)) throw InvalidInput("head box needs positive extent");
    if (!std::isfinite(center.x) || !std::isfinite(center.y)) {
      throw InvalidInput("head box center must be finite");
    }
  }
  friend bool operator==(const HeadBox&, const HeadBox&) = default;
};

/// Similarity crop without rotation: output = scale * input + translation.
struct CropTransform {
  double scale = 1.0;
  Point2 translation;
  int out_width = 0;
  int out_height = 0;

  Point2 apply(Point2 p) const { return scale * p + translation; }
  Point2 invert(Point2 q) const { return (1.0 / scale) * (q - translation); }
  /// Input-image point that lands on the output center.
  Point2 source_center() const { return invert({0.5 * out_width, 0.5 * out_height}); }

  friend bool operator==(const CropTransform&, const CropTransform&) = default;
};

/// `second` applied after `first`.
inline CropTransform compose(const CropTransform& first, const CropTransform& second) {
  return {second.scale * first.scale, second.scale * first.translation + second.translation,
          second.out_width, second.out_height};
}

/// Maps box-derived crops onto landmark-derived crops.
struct OffsetCalibration {
  double scale_ratio = 1.0;  // rho
  Point2 offset;             // tau, in box width / height units
  std::size_t pairs = 0;
};

inline constexpr double kInterocularFraction = 0.22;

/// Landmark layout that align_frontal maps onto itself.
inline LandmarkSet canonical_landmarks(int out_width, int out_height) {
  const double w = out_width;
  const Point2 c{0.5 * out_width, 0.5 * out_height};
  const double half_eye = 0.5 * kInterocularFraction * w;
  LandmarkSet lm;
  lm.points[LandmarkSet::kLeftEye] = {c.x - half_eye, c.y - 0.12 * w};
  lm.points[LandmarkSet::kRightEye] = {c.x + half_eye, c.y - 0.12 * w};
  lm.points[LandmarkSet::kNose] = {c.x, c.y + 0.02 * w};
  lm.points[LandmarkSet::kMouthLeft] = {c.x - 0.09 * w, c.y + 0.12 * w};
  lm.points[LandmarkSet::kMouthRight] = {c.x + 0.09 * w, c.y + 0.12 * w};
  return lm;
}

inline void check_output_size(int w, int h) {
  if (w < 1 || h < 1) throw InvalidInput("crop output size must be positive");
}

/// Scale so the inter-ocular distance spans kInterocularFraction of the
/// output width; translate so the head center lands on the output center.
inline CropTransform align_frontal(const LandmarkSet& lm, int out_width, int out_height) {
  check_output_size(out_width, out_height);
  for (const auto& p : lm.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidInput("landmarks must be finite");
  }
  const double d = lm.interocular();
  if (!(d > 1e-9)) throw InvalidInput("degenerate landmarks: eyes coincide");
  const double s = kInterocularFraction * out_width / d;
  const Point2 out_center{0.5 * out_width, 0.5 * out_height};
  return {s, out_center - s * lm.head_center(), out_width, out_height};
}

/// Box mapped onto the full output width, centered.
inline CropTransform box_crop(const HeadBox& box, int out_width, int out_height) {
  box.validate();
  check_output_size(out_width, out_height);
  const double s = out_width / box.width;
  const Point2 out_center{0.5 * out_width, 0.5 * out_height};
  return {s, out_center - s * box.center, out_width, out_height};
}

/// rho = geometric mean of landmark-crop scale over box-crop scale; tau =
/// mean of (landmark head center - box center) in box units.
inline OffsetCalibration calibrate_offsets(std::span<const std::pair<LandmarkSet, HeadBox>> pairs,
                                           int out_width, int out_height) {
  if (pairs.empty()) throw InvalidInput("calibrate_offsets needs at least one pair");
  double log_ratio = 0.0;
  Point2 tau;
  for (const auto& [lm, box] : pairs) {
    const auto l = align_frontal(lm, out_width, out_height);
    const auto b = box_crop(box, out_width, out_height);
    log_ratio += std::log(l.scale / b.scale);
    const Point2 d = lm.head_center() - box.center;
    tau = tau + Point2{d.x / box.width, d.y / box.height};
  }
  const double n = static_cast<double>(pairs.size());
  return {std::exp(log_ratio / n), (1.0 / n) * tau, pairs.size()};
}

inline CropTransform align_large_pose(const HeadBox& box, const OffsetCalibration& cal,
                                      int out_width, int out_height) {
  const auto b = box_crop(box, out_width, out_height);
  const double s = cal.scale_ratio * b.scale;
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidState("calibrated crop scale is not positive");
  const Point2 c = box.center + Point2{cal.offset.x * box.width, cal.offset.y * box.height};
  const Point2 out_center{0.5 * out_width, 0.5 * out_height};
  return {s, out_center - s * c, out_width, out_height};
}

/// Resamples `img` under `t` with bilinear taps; taps that fall outside the
/// source read `fill`.
template <typename T>
Image<T> apply_crop(const Image<T>& img, const CropTransform& t, T fill = T(0.5)) {
  if (!(t.scale > 0.0)) throw InvalidInput("crop scale must be positive");
  check_output_size(t.out_width, t.out_height);
  Image<T> out(t.out_height, t.out_width, img.channels);
  auto tap = [&](int r, int c, int ch) -> double {
    if (r < 0 || c < 0 || r >= img.height || c >= img.width) return static_cast<double>(fill);
    return static_cast<double>(img.at(r, c, ch));
  };
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const Point2 p = t.invert({c + 0.5, r + 0.5});
      const double x = p.x - 0.5, y = p.y - 0.5;
      const double fx = std::floor(x), fy = std::floor(y);
      const int c0 = static_cast<int>(fx), r0 = static_cast<int>(fy);
      const double ax = x - fx, ay = y - fy;
      for (int ch = 0; ch < img.channels; ++ch) {
        double v = (1 - ay) * ((1 - ax) * tap(r0, c0, ch) + ax * tap(r0, c0 + 1, ch));
        if (ay > 0) v += ay * ((1 - ax) * tap(r0 + 1, c0, ch) + ax * tap(r0 + 1, c0 + 1, ch));
        out.at(r, c, ch) = static_cast<T>(v);
      }
    }
  }
  return out;
}

}  // namespace trigrid
