// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "trigrid/meshing.hpp"

namespace trigrid {
namespace {

DensityGrid sphere_grid(int n, double radius, double smax, Bounds b = {}) {
  return sample_field([&](const Vec3d& p) { return norm(p) < radius ? smax : 0.0; }, n, b);
}

TEST(MarchingCubes, ConstantFieldBelowIsoIsEmpty) {
  const auto g = sample_field([](const Vec3d&) { return 1.0; }, 12, Bounds{});
  EXPECT_TRUE(marching_cubes(g, 10.0).empty());
  EXPECT_EQ(occupied_cells(g, 10.0), 0u);
}

TEST(MarchingCubes, AnalyticSphere) {
  const double R = 0.6, smax = 20.0;
  const auto g = sphere_grid(64, R, smax);
  const auto mesh = marching_cubes(g, smax / 2);
  ASSERT_FALSE(mesh.empty());
  const double spacing = g.spacing.x;
  for (const auto& v : mesh.vertices) EXPECT_LE(std::abs(norm(v) - R), 1.5 * spacing);
  EXPECT_EQ(open_edge_count(mesh), 0u);
}

TEST(MarchingCubes, SmoothSphereIsAccurate) {
  // linear interpolation recovers a smooth level set to well under a voxel
  const double R = 0.5;
  const auto g = sample_field([&](const Vec3d& p) { return R - norm(p); }, 48, Bounds{});
  const auto mesh = marching_cubes(g, 0.0);
  for (const auto& v : mesh.vertices) EXPECT_LE(std::abs(norm(v) - R), 0.1 * g.spacing.x);
  EXPECT_EQ(open_edge_count(mesh), 0u);
}

TEST(MarchingCubes, NormalsFaceOutwardConsistently) {
  const auto g = sample_field([](const Vec3d& p) { return 0.5 - norm(p); }, 24, Bounds{});
  const auto mesh = marching_cubes(g, 0.0);
  int outward = 0, inward = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3d a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    const double s = dot(cross(b - a, c - a), a + b + c);
    (s > 0 ? outward : inward)++;
  }
  EXPECT_TRUE(outward == 0 || inward == 0) << outward << " vs " << inward;
}

TEST(MarchingCubes, ClippedSurfaceOnlyOpensAtTheBorder) {
  // the sphere pokes out of the sampled cube; its holes lie on the border
  const auto g = sample_field([](const Vec3d& p) { return 1.2 - norm(p); }, 20, Bounds{});
  const auto mesh = marching_cubes(g, 0.0);
  EXPECT_GT(open_edge_count(mesh), 0u);
  EXPECT_EQ(open_edge_count(mesh, &g), 0u);
}

TEST(MarchingCubes, ScaleCovariance) {
  const auto a = sphere_grid(20, 0.55, 1.0);
  const auto b = sample_field([](const Vec3d& p) { return norm(0.5 * p) < 0.55 ? 1.0 : 0.0; }, 20,
                              Bounds{{-2, -2, -2}, {2, 2, 2}});
  const auto ma = marching_cubes(a, 0.5), mb = marching_cubes(b, 0.5);
  ASSERT_EQ(ma.vertices.size(), mb.vertices.size());
  EXPECT_EQ(ma.triangles, mb.triangles);
  for (std::size_t i = 0; i < ma.vertices.size(); ++i) EXPECT_EQ(2.0 * ma.vertices[i], mb.vertices[i]);
}

TEST(MarchingCubes, Errors) {
  EXPECT_THROW(empty_density_grid(7, Bounds{}), InvalidInput);
  const auto g = sphere_grid(8, 0.5, 1.0);
  EXPECT_THROW(marching_cubes(g, std::nan("")), InvalidInput);
}

TEST(SceneDensity, NegativeDensityBiasGivesNearZeroField) {
  SceneConfig sc;
  sc.resolution = 4;
  sc.channels = 2;
  sc.hidden = {8};
  auto s = make_scene<double>(sc, 1);
  for (auto& l : s.decoder.layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  s.decoder.layers.back().bias[0] = -10.0;
  const auto g = density_grid(s, 8);
  for (double v : g.values) EXPECT_NEAR(v, std::log1p(std::exp(-10.0)), 1e-12);
  EXPECT_LT(g.values[0], 5e-5);
}

TEST(SceneDensity, SampledTwiceIsIdenticalAcrossWorkers) {
  SceneConfig sc;
  sc.resolution = 6;
  sc.channels = 3;
  sc.hidden = {8};
  const auto s = make_scene<double>(sc, 2);
  const auto a = density_grid(s, 10, 1);
  EXPECT_EQ(a.values, density_grid(s, 10, 1).values);
  EXPECT_EQ(a.values, density_grid(s, 10, 3).values);
  // voxel (i, j, k) holds the point density at its center
  DecoderWorkspace<double> ws;
  ws.prepare(s.decoder);
  std::vector<double> f, r;
  EXPECT_EQ(a.at(2, 7, 4), point_density(s, a.center(2, 7, 4), ws, f, r));
}

TEST(MeshFile, EmptyMeshHasNoRecords) {
  EXPECT_EQ(format_mesh(TriMesh{}), "");
  EXPECT_TRUE(parse_mesh("").empty());
}

TEST(MeshFile, SingleTriangleRoundTrip) {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0.5}};
  m.triangles = {{2, 0, 1}};
  const std::string text = format_mesh(m);
  EXPECT_EQ(text, "v 0 0 0\nv 1 0 0\nv 0 1 0.5\nf 3 1 2\n");
  const auto back = parse_mesh(text);
  EXPECT_EQ(back.triangles, m.triangles);
  EXPECT_EQ(back.vertices, m.vertices);
}

TEST(MeshFile, SphereReimportKeepsCounts) {
  const auto mesh = marching_cubes(sphere_grid(24, 0.6, 1.0), 0.5);
  const auto path = (std::filesystem::temp_directory_path() / "trigrid_sphere_test.obj").string();
  export_mesh(mesh, path);
  const auto back = import_mesh(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.vertices.size(), mesh.vertices.size());
  EXPECT_EQ(back.triangles, mesh.triangles);
}

TEST(MeshFile, ParseErrorsCarryOffsets) {
  try {
    parse_mesh("v 0 0 0\nv 1 x 0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
  EXPECT_THROW(parse_mesh("v 0 0 0\nf 1 1 2\n"), ParseError);
  EXPECT_THROW(parse_mesh("vt 0 0\n"), ParseError);
  EXPECT_THROW(parse_mesh("f 0 1 1\n"), ParseError);
  EXPECT_THROW(import_mesh("/nonexistent/dir/mesh.obj"), IoError);
  EXPECT_THROW(export_mesh(TriMesh{}, "/nonexistent/dir/mesh.obj"), IoError);
}

}  // namespace
}  // namespace trigrid
