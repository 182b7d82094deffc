// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trigrid/common.hpp"

namespace trigrid {

/// The three plane stacks. Each stack holds D planes spanned by two world
/// axes (u, v) and stacked along the remaining axis.
enum class PlaneStack : int { XY = 0, YZ = 1, XZ = 2 };

inline constexpr std::array<PlaneStack, 3> kAllStacks = {PlaneStack::XY, PlaneStack::YZ,
                                                        PlaneStack::XZ};

/// World axis indices (u, v, depth) for each stack.
inline constexpr std::array<std::array<int, 3>, 3> kStackAxes = {{{0, 1, 2}, {1, 2, 0}, {0, 2, 1}}};

/// Axis-aligned box in world units.
struct Bounds {
  Vec3d lo{-1.0, -1.0, -1.0};
  Vec3d hi{1.0, 1.0, 1.0};

  bool contains(const Vec3d& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Tri-grid feature volume: three stacks of D feature planes, each plane
/// H x W x C. In-plane nodes sit at cell centers of a uniform W x H grid over
/// the bounds face; the D depth planes sit at uniformly spaced stations that
/// include both ends of the bounds interval. D = 1 is the plain tri-plane.
///
/// Storage per stack is depth-major: index ((d * H + row) * W + col) * C + c,
/// where `col` runs along the stack's u axis and `row` along its v axis.
template <std::floating_point T>
struct TriGrid {
  int depth = 1;
  int height = 2;
  int width = 2;
  int channels = 1;
  Bounds bounds{};
  std::array<std::vector<T>, 3> planes;

  static TriGrid zeros(int d, int h, int w, int c, Bounds b = {}) {
    TriGrid g;
    g.depth = d;
    g.height = h;
    g.width = w;
    g.channels = c;
    g.bounds = b;
    g.check_shape();
    for (auto& p : g.planes) p.assign(g.stack_size(), T(0));
    return g;
  }

  std::size_t stack_size() const {
    return static_cast<std::size_t>(depth) * height * width * channels;
  }
  std::size_t parameter_count() const { return 3 * stack_size(); }

  std::size_t offset(int d, int row, int col) const {
    return ((static_cast<std::size_t>(d) * height + row) * width + col) * channels;
  }
  T& at(PlaneStack s, int d, int row, int col, int c) {
    return planes[static_cast<int>(s)][offset(d, row, col) + c];
  }
  const T& at(PlaneStack s, int d, int row, int col, int c) const {
    return planes[static_cast<int>(s)][offset(d, row, col) + c];
  }
  std::vector<T>& stack(PlaneStack s) { return planes[static_cast<int>(s)]; }
  const std::vector<T>& stack(PlaneStack s) const { return planes[static_cast<int>(s)]; }

  /// World coordinate of in-plane node `i` along an axis with `n` nodes.
  static double node_coordinate(double lo, double hi, int n, int i) {
    return lo + (i + 0.5) * (hi - lo) / n;
  }
  /// World coordinate of depth station `k` of `d` stations.
  static double station_coordinate(double lo, double hi, int d, int k) {
    return d == 1 ? 0.5 * (lo + hi) : lo + k * (hi - lo) / (d - 1);
  }

  void check_shape() const {
    if (depth < 1 || height < 2 || width < 2 || channels < 1) {
      throw InvalidInput("tri-grid requires D >= 1, H >= 2, W >= 2, C >= 1");
    }
    for (int a = 0; a < 3; ++a) {
      if (!(bounds.hi[a] > bounds.lo[a])) {
        throw InvalidInput("tri-grid bounds must have positive extent");
      }
    }
  }

  void validate() const {
    check_shape();
    for (const auto& p : planes) {
      if (p.size() != stack_size()) {
        throw InvalidInput("tri-grid stack size does not match (D, H, W, C)");
      }
      for (T v : p) {
        if (!std::isfinite(v)) throw InvalidState("tri-grid holds a non-finite feature");
      }
    }
  }

  friend bool operator==(const TriGrid&, const TriGrid&) = default;
};

namespace detail {

/// Linear interpolation setup along one world axis.
template <typename T>
struct AxisLerp {
  int i0 = 0;        // lower node
  int step = 0;      // 1 if an upper node participates, 0 otherwise
  T frac = 0;        // weight of the upper node
  T dfrac_dx = 0;    // d frac / d world coordinate (0 where clamped)
};

/// In-plane axis with `n` >= 2 nodes at cell centers.
template <typename T>
AxisLerp<T> plane_axis(T x, double lo, double hi, int n) {
  AxisLerp<T> a;
  const T extent = static_cast<T>(hi - lo);
  const bool inside = x >= static_cast<T>(lo) && x <= static_cast<T>(hi);
  const T xc = std::clamp(x, static_cast<T>(lo), static_cast<T>(hi));
  T u = (xc - static_cast<T>(lo)) / extent * static_cast<T>(n) - T(0.5);
  const T umax = static_cast<T>(n - 1);
  const bool interior = inside && u >= T(0) && u <= umax;
  u = std::clamp(u, T(0), umax);
  a.i0 = std::min(static_cast<int>(u), n - 2);
  a.step = 1;
  a.frac = u - static_cast<T>(a.i0);
  a.dfrac_dx = interior ? static_cast<T>(n) / extent : T(0);
  return a;
}

/// Depth axis with `d` stations spanning [lo, hi] inclusive.
template <typename T>
AxisLerp<T> depth_axis(T x, double lo, double hi, int d) {
  AxisLerp<T> a;
  if (d == 1) return a;
  const T extent = static_cast<T>(hi - lo);
  const bool inside = x >= static_cast<T>(lo) && x <= static_cast<T>(hi);
  const T xc = std::clamp(x, static_cast<T>(lo), static_cast<T>(hi));
  const T w = (xc - static_cast<T>(lo)) / extent * static_cast<T>(d - 1);
  a.i0 = std::min(static_cast<int>(w), d - 2);
  a.step = 1;
  a.frac = w - static_cast<T>(a.i0);
  a.dfrac_dx = inside ? static_cast<T>(d - 1) / extent : T(0);
  return a;
}

template <typename T>
struct StackLerp {
  AxisLerp<T> u, v, d;
};

template <typename T>
StackLerp<T> stack_lerp(const TriGrid<T>& g, PlaneStack s, const Vec3<T>& p) {
  const auto& ax = kStackAxes[static_cast<int>(s)];
  StackLerp<T> l;
  l.u = plane_axis<T>(p[ax[0]], g.bounds.lo[ax[0]], g.bounds.hi[ax[0]], g.width);
  l.v = plane_axis<T>(p[ax[1]], g.bounds.lo[ax[1]], g.bounds.hi[ax[1]], g.height);
  l.d = depth_axis<T>(p[ax[2]], g.bounds.lo[ax[2]], g.bounds.hi[ax[2]], g.depth);
  return l;
}

}  // namespace detail

/// Feature at one world point: the sum over the three stacks of a trilinear
/// lookup (u, v, depth). Points outside the bounds are clamped onto them.
/// `out` must hold `channels` values. Each stack is accumulated separately and
/// then added in XY, YZ, XZ order.
template <std::floating_point T>
void sample_point(const TriGrid<T>& g, const Vec3<T>& p, std::span<T> out) {
  const int C = g.channels;
  std::fill(out.begin(), out.end(), T(0));
  T tmp[256];
  std::vector<T> heap;
  T* acc = tmp;
  if (C > 256) {
    heap.resize(C);
    acc = heap.data();
  }
  for (PlaneStack s : kAllStacks) {
    const auto l = detail::stack_lerp(g, s, p);
    const T* plane = g.stack(s).data();
    std::fill(acc, acc + C, T(0));
    const T wu[2] = {T(1) - l.u.frac, l.u.frac};
    const T wv[2] = {T(1) - l.v.frac, l.v.frac};
    const T wd[2] = {T(1) - l.d.frac, l.d.frac};
    const int nd = l.d.step + 1;
    for (int dd = 0; dd < nd; ++dd) {
      for (int vv = 0; vv < 2; ++vv) {
        for (int uu = 0; uu < 2; ++uu) {
          const T w = g.depth == 1 ? wv[vv] * wu[uu] : wd[dd] * wv[vv] * wu[uu];
          const T* node = plane + g.offset(l.d.i0 + dd, l.v.i0 + vv, l.u.i0 + uu);
          for (int c = 0; c < C; ++c) acc[c] += w * node[c];
        }
      }
    }
    for (int c = 0; c < C; ++c) out[c] += acc[c];
  }
}

/// Reverse-mode counterpart of sample_point. Adds d(loss)/d(plane values) into
/// `grad` (same shape as `g`; may be null) and returns d(loss)/d(point).
template <std::floating_point T>
Vec3<T> sample_point_backward(const TriGrid<T>& g, const Vec3<T>& p, std::span<const T> upstream,
                              TriGrid<T>* grad) {
  const int C = g.channels;
  Vec3<T> dp{};
  for (PlaneStack s : kAllStacks) {
    const auto& ax = kStackAxes[static_cast<int>(s)];
    const auto l = detail::stack_lerp(g, s, p);
    const T* plane = g.stack(s).data();
    T* gplane = grad ? grad->stack(s).data() : nullptr;
    const T wu[2] = {T(1) - l.u.frac, l.u.frac};
    const T wv[2] = {T(1) - l.v.frac, l.v.frac};
    const T wd[2] = {T(1) - l.d.frac, l.d.frac};
    const T sign[2] = {T(-1), T(1)};
    const int nd = l.d.step + 1;
    T du = 0, dv = 0, dd_sum = 0;
    for (int dd = 0; dd < nd; ++dd) {
      for (int vv = 0; vv < 2; ++vv) {
        for (int uu = 0; uu < 2; ++uu) {
          const T wdd = g.depth == 1 ? T(1) : wd[dd];
          const T w = wdd * wv[vv] * wu[uu];
          const std::size_t off = g.offset(l.d.i0 + dd, l.v.i0 + vv, l.u.i0 + uu);
          const T* node = plane + off;
          T s_dot = 0;
          for (int c = 0; c < C; ++c) s_dot += upstream[c] * node[c];
          if (gplane) {
            T* gnode = gplane + off;
            for (int c = 0; c < C; ++c) gnode[c] += w * upstream[c];
          }
          du += s_dot * wdd * wv[vv] * sign[uu];
          dv += s_dot * wdd * wu[uu] * sign[vv];
          if (g.depth > 1) dd_sum += s_dot * wv[vv] * wu[uu] * sign[dd];
        }
      }
    }
    dp[ax[0]] += du * l.u.dfrac_dx;
    dp[ax[1]] += dv * l.v.dfrac_dx;
    dp[ax[2]] += dd_sum * l.d.dfrac_dx;
  }
  return dp;
}

/// Batched feature lookup. Returns points.size() x C values, row-major.
template <std::floating_point T>
std::vector<T> sample_features(const TriGrid<T>& g, std::span<const Vec3<T>> points) {
  g.validate();
  std::vector<T> out(points.size() * g.channels);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) {
      throw InvalidInput("sample_features: non-finite point " + std::to_string(i));
    }
    sample_point(g, points[i], std::span<T>(out.data() + i * g.channels, g.channels));
  }
  return out;
}

template <std::floating_point T>
struct SampleFeaturesGrad {
  TriGrid<T> grid;               // d loss / d plane values
  std::vector<Vec3<T>> points;   // d loss / d point coordinates
};

/// Batched reverse pass; `upstream` is points.size() x C.
template <std::floating_point T>
SampleFeaturesGrad<T> sample_features_backward(const TriGrid<T>& g,
                                               std::span<const Vec3<T>> points,
                                               std::span<const T> upstream) {
  g.validate();
  if (upstream.size() != points.size() * static_cast<std::size_t>(g.channels)) {
    throw InvalidInput("sample_features_backward: upstream gradient must be N x C");
  }
  SampleFeaturesGrad<T> r{TriGrid<T>::zeros(g.depth, g.height, g.width, g.channels, g.bounds),
                          std::vector<Vec3<T>>(points.size())};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) {
      throw InvalidInput("sample_features_backward: non-finite point " + std::to_string(i));
    }
    r.points[i] = sample_point_backward(
        g, points[i], upstream.subspan(i * g.channels, g.channels), &r.grid);
  }
  return r;
}

}  // namespace trigrid
