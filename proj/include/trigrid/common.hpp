// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace trigrid {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller handed us something malformed (shapes, non-finite coordinates, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An object reached a state that violates its invariants.
class InvalidState : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file parser rejected its input. `offset` is the byte where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// An optimizer produced a non-finite loss. Carries the last iteration whose
/// loss was finite (-1 if none).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int last_good_iteration)
      : Error(what + " (last good iteration " + std::to_string(last_good_iteration) + ")"),
        last_good_(last_good_iteration) {}
  int last_good_iteration() const noexcept { return last_good_; }

 private:
  int last_good_;
};

// ---------------------------------------------------------------------------
// Small vector type
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct Vec3 {
  T x{}, y{}, z{};

  constexpr T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(T s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, T s) { return {s * a.x, s * a.y, s * a.z}; }
  constexpr Vec3& operator+=(Vec3 b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

template <typename T>
constexpr T dot(Vec3<T> a, Vec3<T> b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
constexpr Vec3<T> cross(Vec3<T> a, Vec3<T> b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T norm(Vec3<T> a) {
  return std::sqrt(dot(a, a));
}

template <typename T>
bool is_finite(Vec3<T> a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

using Vec3d = Vec3<double>;

// ---------------------------------------------------------------------------
// Scalar activations
// ---------------------------------------------------------------------------

template <std::floating_point T>
T softplus(T x) {
  // log(1 + e^x) without overflow
  return x > T(20) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <std::floating_point T>
T logit(T p) {
  return std::log(p / (T(1) - p));
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// ---------------------------------------------------------------------------
// Image: interleaved height x width x channels raster
// ---------------------------------------------------------------------------

template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Image() = default;
  Image(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c), data(checked_size(h, w, c), fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  T& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  const T& at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  static std::size_t checked_size(int h, int w, int c) {
    if (h < 0 || w < 0 || c < 0) {
      throw InvalidInput("image dimensions must be non-negative");
    }
    return static_cast<std::size_t>(h) * w * c;
  }
};

template <typename T>
double mean_squared_error(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) {
    throw InvalidInput("mean_squared_error: shape mismatch");
  }
  if (a.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

/// 10 log10(1 / MSE) for images with values in [0, 1].
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b) {
  const double mse = mean_squared_error(a, b);
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

template <typename T>
double mean_absolute_error(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) {
    throw InvalidInput("mean_absolute_error: shape mismatch");
  }
  if (a.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace trigrid
