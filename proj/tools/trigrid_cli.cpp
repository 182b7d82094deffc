// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
//
// trigrid: synthetic data, fitting, rendering, meshing and diagnostics.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trigrid/trigrid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trigrid;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int workers = default_worker_count();
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--workers", c.workers,
                  "Worker threads (default: all cores; results are bitwise reproducible only "
                  "for a fixed worker count)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

/// Echoes the parsed flags of `cmd` next to its outputs.
void echo_config(const CLI::App* cmd, const fs::path& dir) {
  fs::create_directories(dir);
  write_file((dir / "run_config.toml").string(),
             "# trigrid " + cmd->get_name() + "\n[" + cmd->get_name() + "]\n" +
                 cmd->config_to_str(true, false));
}

void say(const std::string& s) { std::cout << s << std::endl; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// synth-data
// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out = "data";
  int views = 16;
  int size = 64;
  double noise_yaw = 0.0;
  double crop_drift = 0.0;
  double pitch_range = 0.3;
  std::string albedo = "asymmetric";
};

void write_dataset(const DatasetBundle& b, const fs::path& dir) {
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "mask");
  Manifest m;
  m.root = ".";
  std::string jsonl;
  json truth = json::object();
  for (const auto& v : b.views) {
    const std::string rgb = "rgb/" + v.id + ".ppm";
    const std::string mask = "mask/" + v.id + ".pfm";
    write_image((dir / rgb).string(), to_bytes(v.image.rgb));
    write_float_raster((dir / mask).string(), to_float_raster(v.image.mask));
    m.records.push_back({v.id, rgb, mask, to_manifest_camera(v.label), split_for_yaw(v.label.yaw)});
    DetectorRecord d{v.id, v.landmarks, v.box, v.label.yaw, v.label.pitch, v.label.radius, v.label.fov_y};
    jsonl += format_detector_record(d) + "\n";
    const auto t = to_manifest_camera(v.truth);
    truth[v.id] = {{"yaw", t.yaw}, {"pitch", t.pitch}, {"radius", t.radius},
                   {"fov", t.fov}, {"cx", t.cx},       {"cy", t.cy}};
  }
  write_manifest((dir / "manifest.json").string(), m);
  write_file((dir / "detections.jsonl").string(), jsonl);
  write_file((dir / "truth.json").string(), truth.dump(2) + "\n");
}

int run_synth(const CLI::App* cmd, const SynthArgs& a) {
  ProxyScene proxy;
  proxy.albedo = albedo_from_string(a.albedo);
  DatasetConfig dc;
  dc.views = a.views;
  dc.size = a.size;
  dc.noise_yaw = a.noise_yaw;
  dc.crop_drift = a.crop_drift;
  dc.pitch_range = a.pitch_range;
  dc.seed = a.common.seed;
  const auto bundle = make_dataset(proxy, dc);
  const fs::path dir(a.out);
  echo_config(cmd, dir);
  write_dataset(bundle, dir);
  say("wrote " + std::to_string(bundle.views.size()) + " views to " + dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  Common common;
  std::string data;
  std::string out = "fit";
  int depth = 3;
  int grid_res = 32;
  int channels = 8;
  int hidden = 64;
  std::string activation = "relu";
  int iters = 2000;
  double lr_scene = 1e-2;
  double lr_residual = 1e-3;
  double lambda_mask = 1.0;
  double lambda_cam = FitConfig{}.lambda_cam;
  int residual_warmup = FitConfig{}.residual_warmup;
  std::string residuals = "on";
  int batch = 1024;
  int samples = 48;
  std::string optimizer = "adam";
};

std::vector<TrainView<double>> load_views(const std::string& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path() / m.root;
  std::vector<TrainView<double>> views;
  for (const auto& r : m.records) {
    TrainView<double> v;
    v.id = r.id;
    v.rgb = from_bytes<double>(read_image((root / r.rgb).string()));
    const auto mask = read_float_raster((root / r.mask).string());
    v.mask = Image<double>(mask.height, mask.width, 1);
    for (std::size_t i = 0; i < mask.data.size(); ++i) v.mask.data[i] = mask.data[i];
    v.camera = from_manifest_camera(r.camera, v.rgb.height, v.rgb.width);
    views.push_back(std::move(v));
  }
  if (views.empty()) throw InvalidInput("manifest '" + manifest_path + "' has no records");
  return views;
}

std::string manifest_path_for(const std::string& data) {
  const fs::path p(data);
  return fs::is_directory(p) ? (p / "manifest.json").string() : p.string();
}

FitConfig fit_config(const FitArgs& a) {
  FitConfig fc;
  fc.iterations = a.iters;
  fc.lr_scene = a.lr_scene;
  fc.lr_residual = a.lr_residual;
  fc.lambda_mask = a.lambda_mask;
  fc.lambda_cam = a.lambda_cam;
  fc.residuals = a.residuals == "on";
  fc.residual_warmup = a.residual_warmup;
  fc.batch = a.batch;
  fc.samples = a.samples;
  fc.seed = a.common.seed;
  fc.workers = a.common.workers;
  fc.optimizer = optimizer_from_string(a.optimizer);
  return fc;
}

SceneConfig scene_config(const FitArgs& a, int height, int width) {
  SceneConfig sc;
  sc.depth = a.depth;
  sc.resolution = a.grid_res;
  sc.channels = a.channels;
  sc.hidden = {a.hidden};
  sc.activation = activation_from_string(a.activation);
  sc.image_height = height;
  sc.image_width = width;
  return sc;
}

int run_fit(const CLI::App* cmd, const FitArgs& a) {
  auto views = load_views(manifest_path_for(a.data));
  const FitConfig fc = fit_config(a);
  const SceneConfig sc = scene_config(a, views.front().rgb.height, views.front().rgb.width);
  const fs::path dir(a.out);
  echo_config(cmd, dir);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = fit_scene<double>(views, fc, make_scene<double>(sc, a.common.seed),
                               [&](int it, double loss) {
                                 if (it % 100 == 0) say("iter " + std::to_string(it) + fmt(" loss %.6f", loss));
                                 return true;
                               });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_checkpoint((dir / "checkpoint.tgv").string(), res.scene);
  json report = report_to_json(res.report);
  report["seconds"] = secs;
  write_file((dir / "report.json").string(), report.dump(2) + "\n");
  double mean_psnr = 0.0;
  for (const auto& v : res.report.views) mean_psnr += v.psnr / res.report.views.size();
  say(fmt("mean train PSNR %.2f dB", mean_psnr) + fmt(", mask MSE %.5f", res.report.mask_mse) +
      fmt(", mean |residual| %.4f", res.report.mean_residual_norm()) + fmt(", %.1f s", secs));
  say("wrote " + (dir / "checkpoint.tgv").string());
  return 0;
}

// ---------------------------------------------------------------------------
// render-orbit
// ---------------------------------------------------------------------------

struct OrbitArgs {
  Common common;
  std::string checkpoint;
  std::string out = "orbit.ppm";
  std::vector<double> yaws{0, 45, 90, 135, 180};
  double pitch = 0.0;
  double radius = 2.7;
  double fov = 0.7;
  int samples = 48;
};

int run_orbit(const CLI::App* cmd, const OrbitArgs& a) {
  const auto scene = read_checkpoint<double>(a.checkpoint);
  const int h = scene.background.height, w = scene.background.width;
  Image<double> strip(h, w * static_cast<int>(a.yaws.size()), 3);
  Image<float> mask_strip(h, strip.width, 1);
  for (std::size_t i = 0; i < a.yaws.size(); ++i) {
    OrbitCamera cam;
    cam.yaw = a.yaws[i] * std::numbers::pi / 180.0;
    cam.pitch = a.pitch * std::numbers::pi / 180.0;
    cam.radius = a.radius;
    cam.fov_y = a.fov;
    cam.height = h;
    cam.width = w;
    cam = enclose_bounds(cam, scene.trigrid.bounds);
    const auto out = render_view(scene, cam, a.samples, a.common.workers);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        for (int ch = 0; ch < 3; ++ch) strip.at(r, static_cast<int>(i) * w + c, ch) = out.composite.at(r, c, ch);
        mask_strip.at(r, static_cast<int>(i) * w + c) = static_cast<float>(out.mask.at(r, c));
      }
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  echo_config(cmd, out.has_parent_path() ? out.parent_path() : fs::path("."));
  write_image(out.string(), to_bytes(strip));
  fs::path mask_path = out;
  mask_path.replace_extension(".mask.pfm");
  write_float_raster(mask_path.string(), mask_strip);
  say("wrote " + std::to_string(a.yaws.size()) + "-frame strip " + out.string() + " (" +
      std::to_string(strip.width) + "x" + std::to_string(strip.height) + ")");
  return 0;
}

// ---------------------------------------------------------------------------
// extract-mesh
// ---------------------------------------------------------------------------

struct MeshArgs {
  Common common;
  std::string checkpoint;
  std::string out = "mesh.obj";
  int resolution = 64;
  double iso = 10.0;
};

int run_mesh(const CLI::App* cmd, const MeshArgs& a) {
  const auto scene = read_checkpoint<double>(a.checkpoint);
  const auto grid = density_grid(scene, a.resolution, a.common.workers);
  const auto mesh = marching_cubes(grid, a.iso);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  echo_config(cmd, out.has_parent_path() ? out.parent_path() : fs::path("."));
  export_mesh(mesh, out.string());
  say("wrote " + out.string() + ": " + std::to_string(mesh.vertices.size()) + " vertices, " +
      std::to_string(mesh.triangles.size()) + " triangles, " +
      std::to_string(open_edge_count(mesh, &grid)) + " open interior edges");
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradArgs {
  Common common;
  GradcheckOptions options;
  std::string json_out;
};

int run_gradcheck(const GradArgs& a) {
  GradcheckOptions o = a.options;
  o.seed = a.common.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = gradcheck(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json j = json::array();
  for (const auto& g : report.groups) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s D=%d  checked %3d  max rel err %.3e  %s", g.group.c_str(),
                  g.depth, g.checked, g.max_relative_error, g.pass ? "ok" : "FAIL");
    say(line);
    j.push_back({{"group", g.group}, {"depth", g.depth}, {"checked", g.checked},
                 {"max_relative_error", g.max_relative_error}, {"pass", g.pass}});
  }
  if (!a.json_out.empty()) write_file(a.json_out, j.dump(2) + "\n");
  say(std::string(report.pass() ? "PASS" : "FAIL") + fmt(" (%.2f s)", secs));
  return report.pass() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  FitArgs fit;
  int views = 16;
  int size = 64;
  std::string albedo = "asymmetric";
};

/// Four held-out back views and four held-out front views.
std::vector<std::pair<double, double>> heldout_poses() {
  return {{std::numbers::pi, 0.0}, {2.4, 0.1}, {-2.4, -0.1}, {2.9, -0.2},
          {0.0, 0.0},              {0.5, 0.1}, {-0.6, -0.1}, {0.2, 0.2}};
}

int run_ablate(const CLI::App* cmd, const AblateArgs& a) {
  ProxyScene proxy;
  proxy.albedo = albedo_from_string(a.albedo);
  DatasetConfig dc;
  dc.views = a.views;
  dc.size = a.size;
  dc.seed = a.fit.common.seed;
  const auto train = to_train_views<double>(make_dataset(proxy, dc).views);
  const auto held = to_train_views<double>(make_views_at(proxy, heldout_poses(), dc));
  const FitConfig fc = fit_config(a.fit);
  const SceneConfig sc = scene_config(a.fit, a.size, a.size);
  const fs::path dir(a.fit.out);
  echo_config(cmd, dir);
  const auto t = ablate_representation<double>(train, held, fc, sc, a.fit.common.seed);
  json j = json::array();
  std::ostringstream table;
  table << "representation  D  C   parameters  front PSNR  back PSNR\n";
  for (const auto* row : {&t.triplane, &t.trigrid}) {
    const char* name = row->depth == 1 ? "tri-plane" : "tri-grid";
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %2d %2d %12zu %11.2f %10.2f\n", name, row->depth,
                  row->channels, row->parameters, row->front_psnr, row->back_psnr);
    table << line;
    j.push_back({{"representation", name}, {"depth", row->depth}, {"channels", row->channels},
                 {"parameters", row->parameters}, {"front_psnr", row->front_psnr},
                 {"back_psnr", row->back_psnr}});
  }
  write_file((dir / "ablation.json").string(), j.dump(2) + "\n");
  write_file((dir / "ablation.txt").string(), table.str());
  std::cout << table.str();
  return 0;
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

struct AlignArgs {
  Common common;
  std::string detections;
  std::string images;
  std::string out = "aligned";
  int size = 64;
};

int run_align(const CLI::App* cmd, const AlignArgs& a) {
  const auto records = parse_detector_jsonl(read_file(a.detections));
  std::vector<std::pair<LandmarkSet, HeadBox>> pairs;
  for (const auto& r : records)
    if (r.landmarks && r.box) pairs.emplace_back(*r.landmarks, *r.box);
  const auto cal = calibrate_offsets(pairs, a.size, a.size);
  const fs::path dir(a.out);
  echo_config(cmd, dir);
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "mask");
  const fs::path src = a.images.empty() ? fs::path(a.detections).parent_path() : fs::path(a.images);
  Manifest m;
  m.root = ".";
  for (const auto& r : records) {
    CropTransform t;
    if (r.landmarks) {
      t = align_frontal(*r.landmarks, a.size, a.size);
    } else if (r.box) {
      t = align_large_pose(*r.box, cal, a.size, a.size);
    } else {
      throw InvalidInput("record '" + r.id + "' has neither landmarks nor a box");
    }
    const auto rgb = from_bytes<double>(read_image((src / "rgb" / (r.id + ".ppm")).string()));
    const auto mask_f = read_float_raster((src / "mask" / (r.id + ".pfm")).string());
    Image<double> mask(mask_f.height, mask_f.width, 1);
    for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = mask_f.data[i];
    const std::string rgb_path = "rgb/" + r.id + ".ppm";
    const std::string mask_path = "mask/" + r.id + ".pfm";
    write_image((dir / rgb_path).string(), to_bytes(apply_crop(rgb, t, 0.5)));
    write_float_raster((dir / mask_path).string(), to_float_raster(apply_crop(mask, t, 0.0)));
    // the crop moves the principal point and scales the focal length
    const double f = 0.5 * rgb.height / std::tan(0.5 * r.fov) * t.scale;
    const Point2 pp = t.apply({0.5 * rgb.width, 0.5 * rgb.height});
    ManifestCamera mc{r.yaw, r.pitch, r.radius, 2.0 * std::atan(0.5 * a.size / f),
                      pp.x - 0.5 * a.size, pp.y - 0.5 * a.size};
    m.records.push_back({r.id, rgb_path, mask_path, mc, split_for_yaw(r.yaw)});
  }
  write_manifest((dir / "manifest.json").string(), m);
  json cj = {{"scale_ratio", cal.scale_ratio}, {"offset", {cal.offset.x, cal.offset.y}}, {"pairs", cal.pairs}};
  write_file((dir / "calibration.json").string(), cj.dump(2) + "\n");
  say("calibrated on " + std::to_string(cal.pairs) + " pairs: rho " + fmt("%.5f", cal.scale_ratio) +
      ", tau (" + fmt("%.5f", cal.offset.x) + ", " + fmt("%.5f", cal.offset.y) + ")");
  say("wrote " + std::to_string(m.records.size()) + " aligned views to " + dir.string());
  return 0;
}

void add_fit_flags(CLI::App* c, FitArgs& f) {
  c->add_option("--depth", f.depth, "Tri-grid depth D (1 = tri-plane)")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--grid-res", f.grid_res, "Plane resolution H = W")->capture_default_str()->check(CLI::Range(2, 4096));
  c->add_option("--channels", f.channels, "Feature channels C")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--hidden", f.hidden, "Decoder hidden width")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--activation", f.activation, "Decoder hidden activation")->capture_default_str()->check(CLI::IsMember({"relu", "softplus"}));
  c->add_option("--iters", f.iters, "Optimization steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--lr-scene", f.lr_scene, "Scene learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lr-residual", f.lr_residual, "Camera residual learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lambda-mask", f.lambda_mask, "Mask loss weight")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lambda-cam", f.lambda_cam, "Residual L2 weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--residual-warmup", f.residual_warmup, "Steps before residuals start moving")->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--residuals", f.residuals, "Learn per-view camera residuals")->capture_default_str()->check(CLI::IsMember({"on", "off"}));
  c->add_option("--batch", f.batch, "Pixels per step")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--samples", f.samples, "Samples per ray")->capture_default_str()->check(CLI::Range(2, 4096));
  c->add_option("--optimizer", f.optimizer, "adam or momentum")->capture_default_str()->check(CLI::IsMember({"adam", "momentum"}));
  c->add_option("--out", f.out, "Output directory")->capture_default_str();
  add_common(c, f.common);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trigrid: tri-grid neural volume fitting and rendering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from a TOML file (e.g. an echoed run_config.toml)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "Render a synthetic head-proxy dataset");
  c_synth->add_option("--out", synth.out, "Output directory")->capture_default_str();
  c_synth->add_option("--views", synth.views, "Number of views")->capture_default_str()->check(CLI::Range(2, 100000));
  c_synth->add_option("--size", synth.size, "Image height and width")->capture_default_str()->check(CLI::Range(2, 8192));
  c_synth->add_option("--noise-yaw", synth.noise_yaw, "Label yaw noise half-width (rad)")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_synth->add_option("--crop-drift", synth.crop_drift, "Render principal-offset half-width (px)")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_synth->add_option("--pitch-range", synth.pitch_range, "Pitch half-width (rad)")->capture_default_str()->check(CLI::Range(0.0, 1.5));
  c_synth->add_option("--albedo", synth.albedo, "asymmetric or symmetric")->capture_default_str()->check(CLI::IsMember({"asymmetric", "symmetric"}));
  add_common(c_synth, synth.common);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit a scene to a dataset");
  c_fit->add_option("--data", fit.data, "Dataset directory or manifest.json")->required();
  add_fit_flags(c_fit, fit);

  OrbitArgs orbit;
  auto* c_orbit = app.add_subcommand("render-orbit", "Render a horizontal strip of orbit views");
  c_orbit->add_option("--checkpoint", orbit.checkpoint, "Scene checkpoint")->required()->check(CLI::ExistingFile);
  c_orbit->add_option("--out", orbit.out, "Output PPM")->capture_default_str();
  c_orbit->add_option("--yaws", orbit.yaws, "Yaw list in degrees")->capture_default_str()->delimiter(',');
  c_orbit->add_option("--pitch", orbit.pitch, "Pitch in degrees")->capture_default_str();
  c_orbit->add_option("--radius", orbit.radius, "Orbit radius")->capture_default_str()->check(CLI::PositiveNumber);
  c_orbit->add_option("--fov", orbit.fov, "Vertical field of view (rad)")->capture_default_str()->check(CLI::Range(1e-3, 3.1));
  c_orbit->add_option("--samples", orbit.samples, "Samples per ray")->capture_default_str()->check(CLI::Range(2, 4096));
  add_common(c_orbit, orbit.common);

  MeshArgs mesh;
  auto* c_mesh = app.add_subcommand("extract-mesh", "Marching-cubes mesh of the scene density");
  c_mesh->add_option("--checkpoint", mesh.checkpoint, "Scene checkpoint")->required()->check(CLI::ExistingFile);
  c_mesh->add_option("--resolution", mesh.resolution, "Voxels per axis")->capture_default_str()->check(CLI::Range(8, 1024));
  c_mesh->add_option("--iso", mesh.iso, "Density iso-level")->capture_default_str();
  c_mesh->add_option("--out", mesh.out, "Output mesh file")->capture_default_str();
  add_common(c_mesh, mesh.common);

  GradArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient group");
  c_grad->add_option("--size", grad.options.size, "Render size")->capture_default_str()->check(CLI::Range(2, 64));
  c_grad->add_option("--samples", grad.options.samples, "Samples per ray")->capture_default_str()->check(CLI::Range(2, 256));
  c_grad->add_option("--coords", grad.options.coords_per_group, "Coordinates checked per group")->capture_default_str()->check(CLI::PositiveNumber);
  c_grad->add_option("--tolerance", grad.options.tolerance, "Relative error bound")->capture_default_str()->check(CLI::PositiveNumber);
  c_grad->add_option("--json", grad.json_out, "Also write results as JSON");
  add_common(c_grad, grad.common);

  AblateArgs ablate;
  auto* c_ablate = app.add_subcommand("ablate", "Tri-plane (D=1) versus tri-grid on the synthetic proxy");
  c_ablate->add_option("--views", ablate.views, "Training views")->capture_default_str()->check(CLI::Range(2, 100000));
  c_ablate->add_option("--size", ablate.size, "Image size")->capture_default_str()->check(CLI::Range(2, 8192));
  c_ablate->add_option("--albedo", ablate.albedo, "asymmetric or symmetric")->capture_default_str()->check(CLI::IsMember({"asymmetric", "symmetric"}));
  ablate.fit.out = "ablation";
  add_fit_flags(c_ablate, ablate.fit);

  AlignArgs align;
  auto* c_align = app.add_subcommand("align", "Two-stage crop alignment from detector output");
  c_align->add_option("--detections", align.detections, "Detector JSON lines")->required()->check(CLI::ExistingFile);
  c_align->add_option("--images", align.images, "Dataset directory holding rgb/ and mask/ (default: next to the detections)");
  c_align->add_option("--out", align.out, "Output directory")->capture_default_str();
  c_align->add_option("--size", align.size, "Output crop size")->capture_default_str()->check(CLI::Range(2, 8192));
  add_common(c_align, align.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_synth->parsed()) return run_synth(c_synth, synth);
    if (c_fit->parsed()) return run_fit(c_fit, fit);
    if (c_orbit->parsed()) return run_orbit(c_orbit, orbit);
    if (c_mesh->parsed()) return run_mesh(c_mesh, mesh);
    if (c_grad->parsed()) return run_gradcheck(grad);
    if (c_ablate->parsed()) return run_ablate(c_ablate, ablate);
    if (c_align->parsed()) return run_align(c_align, align);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
