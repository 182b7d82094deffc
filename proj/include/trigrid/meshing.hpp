// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "trigrid/common.hpp"
#include "trigrid/decoder.hpp"
#include "trigrid/detail/mc_tables.hpp"
#include "trigrid/parallel.hpp"
#include "trigrid/scene.hpp"
#include "trigrid/tri_grid.hpp"

namespace trigrid {

/// N^3 scalar samples at voxel centers lo + (i + 0.5) * spacing of a cube.
/// values[(k * N + j) * N + i] holds voxel (i, j, k) along (x, y, z).
struct DensityGrid {
  int n = 0;
  Bounds bounds{};
  Vec3d spacing{};
  std::vector<double> values;

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(k) * n + j) * n + i];
  }
  Vec3d center(int i, int j, int k) const {
    return {bounds.lo.x + (i + 0.5) * spacing.x, bounds.lo.y + (j + 0.5) * spacing.y,
            bounds.lo.z + (k + 0.5) * spacing.z};
  }
};

inline DensityGrid empty_density_grid(int n, const Bounds& b) {
  if (n < 8) throw InvalidInput("density grid resolution must be >= 8");
  DensityGrid g;
  g.n = n;
  g.bounds = b;
  g.spacing = {(b.hi.x - b.lo.x) / n, (b.hi.y - b.lo.y) / n, (b.hi.z - b.lo.z) / n};
  g.values.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  return g;
}

/// Samples an arbitrary field f(point) -> double on the voxel centers.
template <typename Field>
DensityGrid sample_field(Field&& f, int n, const Bounds& b) {
  DensityGrid g = empty_density_grid(n, b);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.values[(static_cast<std::size_t>(k) * n + j) * n + i] = f(g.center(i, j, k));
  return g;
}

/// Density of a single world point through the same path as density_grid.
template <std::floating_point T>
T point_density(const Scene<T>& scene, const Vec3d& p, DecoderWorkspace<T>& ws,
                std::vector<T>& feature, std::vector<T>& radiance) {
  feature.resize(scene.trigrid.channels);
  radiance.resize(scene.decoder.radiance_channels());
  const Vec3<T> q{static_cast<T>(p.x), static_cast<T>(p.y), static_cast<T>(p.z)};
  sample_point(scene.trigrid, q, std::span<T>(feature));
  T sigma;
  decode_point(scene.decoder, std::span<const T>(feature), ws, sigma, std::span<T>(radiance));
  return sigma;
}

/// Scene density at the voxel centers of its bounds cube.
template <std::floating_point T>
DensityGrid density_grid(const Scene<T>& scene, int n, int workers = 1) {
  scene.validate();
  DensityGrid g = empty_density_grid(n, scene.trigrid.bounds);
  parallel_ranges(static_cast<std::size_t>(n), workers, [&](int, std::size_t kb, std::size_t ke) {
    DecoderWorkspace<T> ws;
    ws.prepare(scene.decoder);
    std::vector<T> feature, radiance;
    for (std::size_t k = kb; k < ke; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          g.values[(k * n + j) * n + i] = static_cast<double>(
              point_density(scene, g.center(i, j, static_cast<int>(k)), ws, feature, radiance));
        }
  });
  return g;
}

struct TriMesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

namespace detail {

// Cell corner offsets (i, j, k) and the corner pair of each of the 12 edges,
// in lookup-table order.
inline constexpr std::array<std::array<int, 3>, 8> kMcCorners = {
    {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};
inline constexpr std::array<std::array<int, 2>, 12> kMcEdges = {
    {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

}  // namespace detail

/// Cells whose largest corner value exceeds `iso`.
inline std::size_t occupied_cells(const DensityGrid& g, double iso) {
  std::size_t count = 0;
  for (int k = 0; k + 1 < g.n; ++k)
    for (int j = 0; j + 1 < g.n; ++j)
      for (int i = 0; i + 1 < g.n; ++i) {
        double m = g.at(i, j, k);
        for (const auto& c : detail::kMcCorners) m = std::max(m, g.at(i + c[0], j + c[1], k + c[2]));
        if (m > iso) ++count;
      }
  return count;
}

/// Table-driven marching cubes over the (N - 1)^3 cells between voxel
/// centers. Vertices are linearly interpolated along grid edges and shared
/// between neighbouring cells.
inline TriMesh marching_cubes(const DensityGrid& g, double iso) {
  if (!std::isfinite(iso)) throw InvalidInput("iso-level must be finite");
  TriMesh mesh;
  const int n = g.n;
  // key = 3 * (linear index of the edge's lower grid point) + axis
  std::unordered_map<std::uint64_t, int> edge_vertex;
  auto vertex_on = [&](int i, int j, int k, int a, int b) {
    const auto& ca = detail::kMcCorners[a];
    const auto& cb = detail::kMcCorners[b];
    std::array<int, 3> p{i + ca[0], j + ca[1], k + ca[2]};
    std::array<int, 3> q{i + cb[0], j + cb[1], k + cb[2]};
    if (q < p) std::swap(p, q);
    const int axis = q[0] != p[0] ? 0 : (q[1] != p[1] ? 1 : 2);
    const std::uint64_t key =
        3 * ((static_cast<std::uint64_t>(p[2]) * n + p[1]) * n + p[0]) + axis;
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double vp = g.at(p[0], p[1], p[2]);
    const double vq = g.at(q[0], q[1], q[2]);
    const double t = vq == vp ? 0.5 : (iso - vp) / (vq - vp);
    const Vec3d xp = g.center(p[0], p[1], p[2]);
    Vec3d x = xp;
    x[axis] = xp[axis] + t * g.spacing[axis];
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(x);
    edge_vertex.emplace(key, id);
    return id;
  };
  for (int k = 0; k + 1 < n; ++k)
    for (int j = 0; j + 1 < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = detail::kMcCorners[c];
          if (g.at(i + o[0], j + o[1], k + o[2]) < iso) cube |= 1 << c;
        }
        if (detail::kMcEdgeTable[cube] == 0) continue;
        std::array<int, 12> ids{};
        for (int e = 0; e < 12; ++e) {
          if (detail::kMcEdgeTable[cube] & (1 << e)) {
            ids[e] = vertex_on(i, j, k, detail::kMcEdges[e][0], detail::kMcEdges[e][1]);
          }
        }
        for (const int* t = detail::kMcTriTable[cube]; *t != -1; t += 3) {
          mesh.triangles.push_back({ids[t[0]], ids[t[1]], ids[t[2]]});
        }
      }
  return mesh;
}

/// Mesh edges not shared by exactly two triangles. Edges lying on the outer
/// faces of the sampled region are ignored when `grid` is given.
inline std::size_t open_edge_count(const TriMesh& mesh, const DensityGrid* grid = nullptr) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  }
  auto on_border = [&](int v) {
    if (!grid) return false;
    const Vec3d& p = mesh.vertices[v];
    for (int a = 0; a < 3; ++a) {
      const double first = grid->bounds.lo[a] + 0.5 * grid->spacing[a];
      const double last = grid->bounds.lo[a] + (grid->n - 0.5) * grid->spacing[a];
      if (p[a] <= first || p[a] >= last) return true;
    }
    return false;
  };
  std::size_t open = 0;
  for (const auto& [edge, count] : uses) {
    if (count == 2) continue;
    if (on_border(edge.first) && on_border(edge.second)) continue;
    ++open;
  }
  return open;
}

/// Writes "v x y z" lines then "f i j k" lines (1-based), numbers at 6
/// significant digits.
inline std::string format_mesh(const TriMesh& mesh) {
  std::string s;
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6g %.6g %.6g\n", v.x, v.y, v.z);
    s += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    s += buf;
  }
  return s;
}

inline void export_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string s = format_mesh(mesh);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline TriMesh parse_mesh(const std::string& text) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3d v;
      if (!(ls >> v.x >> v.y >> v.z)) throw ParseError("malformed vertex line", here);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> t{};
      if (!(ls >> t[0] >> t[1] >> t[2])) throw ParseError("malformed face line", here);
      for (int& i : t) {
        if (i < 1) throw ParseError("face index must be >= 1", here);
        --i;
      }
      mesh.triangles.push_back(t);
    } else {
      throw ParseError("unknown mesh record '" + tag + "'", here);
    }
  }
  for (const auto& t : mesh.triangles)
    for (int i : t)
      if (i >= static_cast<int>(mesh.vertices.size())) {
        throw ParseError("face index out of range", offset);
      }
  return mesh;
}

inline TriMesh import_mesh(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_mesh(ss.str());
}

}  // namespace trigrid
