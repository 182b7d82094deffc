// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "trigrid/common.hpp"
#include "trigrid/tri_grid.hpp"

namespace trigrid {

/// Pinhole camera on a sphere around the world origin, always looking at the
/// origin, y up. yaw = 0 puts the camera on +z looking down -z (frontal);
/// positive pitch raises the camera. `cx`, `cy` shift the principal point in
/// pixels (positive = right / down). `roll` spins the image about the optical
/// axis and is not part of the learnable residual.
struct OrbitCamera {
  double yaw = 0.0;
  double pitch = 0.0;
  double radius = 2.7;
  double fov_y = 0.7;
  double cx = 0.0;
  double cy = 0.0;
  int height = 64;
  int width = 64;
  double near = 2.7 - std::numbers::sqrt3;
  double far = 2.7 + std::numbers::sqrt3;
  double roll = 0.0;

  void validate() const {
    if (!(radius > 0.0)) throw InvalidState("camera radius must be positive");
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw InvalidInput("camera fov must be in (0, pi)");
    if (!(near < far)) throw InvalidInput("camera near must be below far");
    if (height < 1 || width < 1) throw InvalidInput("camera image size must be positive");
    if (!std::isfinite(yaw) || !std::isfinite(pitch) || !std::isfinite(cx) ||
        !std::isfinite(cy) || !std::isfinite(roll)) {
      throw InvalidInput("camera parameters must be finite");
    }
  }

  double focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }

  Vec3d position() const {
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cyaw = std::cos(yaw), syaw = std::sin(yaw);
    return {radius * cp * syaw, radius * sp, radius * cp * cyaw};
  }

  friend bool operator==(const OrbitCamera&, const OrbitCamera&) = default;
};

/// Sets near/far so the ray segment [near, far] covers the whole bounds box
/// from the camera's orbit radius.
inline OrbitCamera enclose_bounds(OrbitCamera cam, const Bounds& b) {
  double r2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double m = std::max(std::abs(b.lo[a]), std::abs(b.hi[a]));
    r2 += m * m;
  }
  const double half = std::sqrt(r2);
  cam.near = std::max(1e-3, cam.radius - half);
  cam.far = cam.radius + half;
  return cam;
}

/// Learnable per-image camera correction. The principal-point components are
/// in normalized image units: one unit is half the image height in pixels.
struct CameraResidual {
  double dyaw = 0.0;
  double dpitch = 0.0;
  double dradius = 0.0;
  double dcx = 0.0;
  double dcy = 0.0;

  std::array<double, 5> to_array() const { return {dyaw, dpitch, dradius, dcx, dcy}; }
  static CameraResidual from_array(const std::array<double, 5>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  double squared_norm() const {
    return dyaw * dyaw + dpitch * dpitch + dradius * dradius + dcx * dcx + dcy * dcy;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  friend bool operator==(const CameraResidual&, const CameraResidual&) = default;
};

/// Pixels per normalized principal-point unit for this camera.
inline double residual_pixel_scale(const OrbitCamera& cam) { return 0.5 * cam.height; }

inline OrbitCamera apply_camera_residual(OrbitCamera cam, const CameraResidual& r) {
  cam.yaw += r.dyaw;
  cam.pitch += r.dpitch;
  cam.radius += r.dradius;
  const double s = residual_pixel_scale(cam);
  cam.cx += r.dcx * s;
  cam.cy += r.dcy * s;
  if (!(cam.radius > 0.0)) throw InvalidState("camera residual drives the radius non-positive");
  return cam;
}

struct Ray {
  Vec3d origin;
  Vec3d direction;  // unit length
  double t_near = 0.0;
  double t_far = 1.0;
};

/// Camera parameters that rays are differentiated against, in this order.
enum CameraParam : int { kYaw = 0, kPitch = 1, kRadius = 2, kCx = 3, kCy = 4 };
inline constexpr int kCameraParams = 5;

/// d(origin)/d(param) and d(direction)/d(param) for one pixel ray; cx, cy in pixels.
struct RayJacobian {
  std::array<Vec3d, kCameraParams> origin{};
  std::array<Vec3d, kCameraParams> direction{};
};

namespace detail {

struct CameraFrame {
  Vec3d right, up, forward;
  // derivatives w.r.t. yaw and pitch
  Vec3d dright_dyaw, dup_dyaw, dfwd_dyaw;
  Vec3d dright_dpitch, dup_dpitch, dfwd_dpitch;
};

inline CameraFrame camera_frame(const OrbitCamera& cam) {
  const double cp = std::cos(cam.pitch), sp = std::sin(cam.pitch);
  const double cy = std::cos(cam.yaw), sy = std::sin(cam.yaw);
  const double cr = std::cos(cam.roll), sr = std::sin(cam.roll);
  const Vec3d r0{cy, 0.0, -sy};
  const Vec3d u0{-sy * sp, cp, -cy * sp};
  const Vec3d dr0_dyaw{-sy, 0.0, -cy};
  const Vec3d du0_dyaw{-cy * sp, 0.0, sy * sp};
  const Vec3d du0_dpitch{-sy * cp, -sp, -cy * cp};
  CameraFrame f;
  f.right = cr * r0 + sr * u0;
  f.up = -sr * r0 + cr * u0;
  f.forward = {-cp * sy, -sp, -cp * cy};
  f.dright_dyaw = cr * dr0_dyaw + sr * du0_dyaw;
  f.dup_dyaw = -sr * dr0_dyaw + cr * du0_dyaw;
  f.dfwd_dyaw = {-cp * cy, 0.0, cp * sy};
  f.dright_dpitch = sr * du0_dpitch;
  f.dup_dpitch = cr * du0_dpitch;
  f.dfwd_dpitch = {sp * sy, -cp, sp * cy};
  return f;
}

}  // namespace detail

/// Ray through the center of pixel (row, col).
inline Ray camera_ray(const OrbitCamera& cam, int row, int col) {
  const auto f = detail::camera_frame(cam);
  const double focal = cam.focal();
  const double x = (col + 0.5 - (0.5 * cam.width + cam.cx)) / focal;
  const double y = -(row + 0.5 - (0.5 * cam.height + cam.cy)) / focal;
  const Vec3d e = x * f.right + y * f.up + f.forward;
  return {cam.position(), (1.0 / norm(e)) * e, cam.near, cam.far};
}

inline RayJacobian camera_ray_jacobian(const OrbitCamera& cam, int row, int col) {
  const auto f = detail::camera_frame(cam);
  const double focal = cam.focal();
  const double x = (col + 0.5 - (0.5 * cam.width + cam.cx)) / focal;
  const double y = -(row + 0.5 - (0.5 * cam.height + cam.cy)) / focal;
  const Vec3d e = x * f.right + y * f.up + f.forward;
  const double len = norm(e);
  const Vec3d d = (1.0 / len) * e;

  const double cp = std::cos(cam.pitch), sp = std::sin(cam.pitch);
  const double cy = std::cos(cam.yaw), sy = std::sin(cam.yaw);
  RayJacobian j;
  j.origin[kYaw] = cam.radius * Vec3d{cp * cy, 0.0, -cp * sy};
  j.origin[kPitch] = cam.radius * Vec3d{-sp * sy, cp, -sp * cy};
  j.origin[kRadius] = {cp * sy, sp, cp * cy};

  std::array<Vec3d, kCameraParams> de{};
  de[kYaw] = x * f.dright_dyaw + y * f.dup_dyaw + f.dfwd_dyaw;
  de[kPitch] = x * f.dright_dpitch + y * f.dup_dpitch + f.dfwd_dpitch;
  de[kCx] = (-1.0 / focal) * f.right;
  de[kCy] = (1.0 / focal) * f.up;
  for (int p = 0; p < kCameraParams; ++p) {
    j.direction[p] = (1.0 / len) * (de[p] - dot(d, de[p]) * d);
  }
  return j;
}

/// All pixel rays, row-major.
inline std::vector<Ray> generate_rays(const OrbitCamera& cam) {
  cam.validate();
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(cam.height) * cam.width);
  for (int r = 0; r < cam.height; ++r)
    for (int c = 0; c < cam.width; ++c) rays.push_back(camera_ray(cam, r, c));
  return rays;
}

}  // namespace trigrid
