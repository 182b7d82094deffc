// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the built command-line tool end to end in a scratch directory.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "trigrid/io.hpp"
#include "trigrid/meshing.hpp"

namespace trigrid {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("trigrid_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  /// Runs the tool from the scratch directory; returns its exit status.
  static int run(const std::string& args, std::string* output = nullptr) {
    const fs::path log = dir_ / "last.log";
    const std::string cmd =
        "cd '" + dir_.string() + "' && '" + TRIGRID_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = read_file(log.string());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, GradcheckPasses) {
  std::string out;
  EXPECT_EQ(run("gradcheck --json grad.json", &out), 0) << out;
  EXPECT_NE(out.find("PASS"), std::string::npos) << out;
  const auto j = nlohmann::json::parse(read_file((dir_ / "grad.json").string()));
  EXPECT_EQ(j.size(), 8u);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fit"), 2);
  EXPECT_EQ(run("synth-data --views banana"), 2);
  EXPECT_EQ(run("fit --data x --optimizer sgd"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, RuntimeErrorsExitWithOne) {
  std::string out;
  EXPECT_EQ(run("fit --data does-not-exist", &out), 1);
  EXPECT_NE(out.find("error:"), std::string::npos) << out;
  write_file((dir_ / "junk.tgv").string(), "TGV1garbage");
  EXPECT_EQ(run("extract-mesh --checkpoint junk.tgv", &out), 1);
}

TEST_F(Cli, Pipeline) {
  std::string out;
  ASSERT_EQ(run("synth-data --out data --views 8 --size 16 --noise-yaw 0.05 --seed 3", &out), 0) << out;
  for (const char* f : {"manifest.json", "detections.jsonl", "truth.json", "run_config.toml"}) {
    EXPECT_TRUE(fs::exists(dir_ / "data" / f)) << f;
  }
  const auto manifest = read_manifest((dir_ / "data" / "manifest.json").string());
  ASSERT_EQ(manifest.records.size(), 8u);
  const auto rgb = read_image((dir_ / "data" / manifest.records[0].rgb).string());
  EXPECT_EQ(rgb.height, 16);
  EXPECT_EQ(rgb.width, 16);

  const std::string fit_flags =
      "--data data --iters 15 --residual-warmup 5 --batch 64 --samples 8 --grid-res 8 --channels 4 --hidden 8 --workers 1";
  ASSERT_EQ(run("fit " + fit_flags + " --out fit", &out), 0) << out;
  const auto scene = read_checkpoint<double>((dir_ / "fit" / "checkpoint.tgv").string());
  EXPECT_EQ(scene.trigrid.depth, 3);
  EXPECT_EQ(scene.trigrid.height, 8);
  const auto report = nlohmann::json::parse(read_file((dir_ / "fit" / "report.json").string()));
  EXPECT_EQ(report["loss_curve"].size(), 15u);
  EXPECT_EQ(report["psnr"].size(), 8u);

  // The echoed flags replay the run exactly.
  ASSERT_EQ(run("--config fit/run_config.toml fit --out refit", &out), 0) << out;
  EXPECT_EQ(read_file((dir_ / "refit" / "checkpoint.tgv").string()),
            read_file((dir_ / "fit" / "checkpoint.tgv").string()));

  ASSERT_EQ(run("render-orbit --checkpoint fit/checkpoint.tgv --yaws 0,90,180 --samples 8 --out orbit/strip.ppm",
                &out),
            0)
      << out;
  const auto strip = read_image((dir_ / "orbit" / "strip.ppm").string());
  EXPECT_EQ(strip.height, 16);
  EXPECT_EQ(strip.width, 48);
  EXPECT_EQ(read_float_raster((dir_ / "orbit" / "strip.mask.pfm").string()).width, 48);

  ASSERT_EQ(run("extract-mesh --checkpoint fit/checkpoint.tgv --resolution 16 --iso 0.5 --out mesh.obj", &out), 0)
      << out;
  EXPECT_NO_THROW(import_mesh((dir_ / "mesh.obj").string()));

  ASSERT_EQ(run("align --detections data/detections.jsonl --out aligned --size 16", &out), 0) << out;
  const auto aligned = read_manifest((dir_ / "aligned" / "manifest.json").string());
  EXPECT_EQ(aligned.records.size(), 8u);
  validate_manifest_paths(Manifest{(dir_ / "aligned").string(), aligned.records});
  const auto cal = nlohmann::json::parse(read_file((dir_ / "aligned" / "calibration.json").string()));
  EXPECT_GT(cal["pairs"].get<int>(), 0);
}

}  // namespace
}  // namespace trigrid
