// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trigrid/alignment.hpp"
#include "trigrid/camera.hpp"
#include "trigrid/common.hpp"
#include "trigrid/fitting.hpp"
#include "trigrid/scene.hpp"

namespace trigrid {

// ---------------------------------------------------------------------------
// Raw files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("failed reading '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.close();
  if (!f) throw IoError("failed writing '" + path + "'");
}

namespace detail {

/// Cursor over a netpbm-style header.
class HeaderReader {
 public:
  explicit HeaderReader(std::string_view s) : s_(s) {}

  std::size_t pos() const { return pos_; }

  void expect(std::string_view tok, const char* what) {
    if (s_.substr(pos_, tok.size()) != tok) throw ParseError(std::string("expected ") + what, pos_);
    pos_ += tok.size();
  }

  /// Skips whitespace and '#' comments; at least one whitespace is required.
  void separator() {
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) throw ParseError("expected whitespace", pos_);
  }

  long long integer(const char* what) {
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
      v = v * 10 + (s_[pos_] - '0');
      if (v > (1LL << 31)) throw ParseError(std::string(what) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("expected ") + what, start);
    return v;
  }

  std::string token() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  /// Exactly one whitespace byte ends the header.
  void single_whitespace() {
    if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      throw ParseError("expected a single whitespace byte before the payload", pos_);
    }
    ++pos_;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255)
// ---------------------------------------------------------------------------

using Image8 = Image<std::uint8_t>;

inline Image8 decode_ppm(std::string_view bytes) {
  detail::HeaderReader h(bytes);
  h.expect("P6", "PPM magic 'P6'");
  h.separator();
  const auto w = h.integer("width");
  h.separator();
  const auto ht = h.integer("height");
  h.separator();
  const std::size_t maxval_at = h.pos();
  const auto maxval = h.integer("maxval");
  if (maxval != 255) throw ParseError("only maxval 255 is supported", maxval_at);
  h.single_whitespace();
  if (w < 1 || ht < 1) throw ParseError("image dimensions must be positive", 0);
  const std::size_t expected = static_cast<std::size_t>(w) * ht * 3;
  const std::size_t actual = bytes.size() - h.pos();
  if (actual < expected) {
    throw ParseError("truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(actual),
                     bytes.size());
  }
  if (actual > expected) {
    throw ParseError("trailing data: expected " + std::to_string(expected) + " payload bytes, got " +
                         std::to_string(actual),
                     h.pos() + expected);
  }
  Image8 img(static_cast<int>(ht), static_cast<int>(w), 3);
  std::memcpy(img.data.data(), bytes.data() + h.pos(), expected);
  return img;
}

inline std::string encode_ppm(const Image8& img) {
  if (img.channels != 3) throw InvalidInput("PPM images have 3 channels");
  std::string s = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  s.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return s;
}

inline Image8 read_image(const std::string& path) { return decode_ppm(read_file(path)); }
inline void write_image(const std::string& path, const Image8& img) { write_file(path, encode_ppm(img)); }

/// [0, 1] floats to bytes, rounding to nearest.
template <typename T>
Image8 to_bytes(const Image<T>& img) {
  Image8 out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

template <typename T>
Image<T> from_bytes(const Image8& img) {
  Image<T> out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<T>(img.data[i] / 255.0);
  return out;
}

// ---------------------------------------------------------------------------
// PFM (single channel "Pf", little-endian, bottom-up rows)
// ---------------------------------------------------------------------------

namespace detail {

inline void put_f32(std::string& s, float v) {
  auto u = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

inline float get_f32(const char* p, bool little) {
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) {
    const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(p[b]));
    u |= little ? byte << (8 * b) : byte << (8 * (3 - b));
  }
  return std::bit_cast<float>(u);
}

inline void put_u32(std::string& s, std::uint32_t u) {
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

}  // namespace detail

inline std::string encode_pfm(const Image<float>& img) {
  if (img.channels != 1) throw InvalidInput("PFM rasters written here have 1 channel");
  std::string s = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  for (int r = img.height - 1; r >= 0; --r)
    for (int c = 0; c < img.width; ++c) detail::put_f32(s, img.at(r, c));
  return s;
}

inline Image<float> decode_pfm(std::string_view bytes) {
  detail::HeaderReader h(bytes);
  h.expect("Pf", "PFM magic 'Pf'");
  h.separator();
  const auto w = h.integer("width");
  h.separator();
  const auto ht = h.integer("height");
  h.separator();
  const std::size_t scale_at = h.pos();
  const std::string scale_tok = h.token();
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("malformed PFM scale '" + scale_tok + "'", scale_at);
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw ParseError("PFM scale must be non-zero", scale_at);
  h.single_whitespace();
  if (w < 1 || ht < 1) throw ParseError("raster dimensions must be positive", 0);
  const std::size_t expected = static_cast<std::size_t>(w) * ht * 4;
  const std::size_t actual = bytes.size() - h.pos();
  if (actual != expected) {
    throw ParseError("PFM payload size mismatch: expected " + std::to_string(expected) +
                         " bytes, got " + std::to_string(actual),
                     h.pos());
  }
  const bool little = scale < 0.0;
  Image<float> img(static_cast<int>(ht), static_cast<int>(w), 1);
  const char* p = bytes.data() + h.pos();
  for (int r = img.height - 1; r >= 0; --r)
    for (int c = 0; c < img.width; ++c, p += 4) img.at(r, c) = detail::get_f32(p, little);
  return img;
}

inline Image<float> read_float_raster(const std::string& path) { return decode_pfm(read_file(path)); }
inline void write_float_raster(const std::string& path, const Image<float>& img) {
  write_file(path, encode_pfm(img));
}

template <typename T>
Image<float> to_float_raster(const Image<T>& img) {
  Image<float> out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<float>(img.data[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestCamera {
  double yaw = 0.0;
  double pitch = 0.0;
  double radius = 2.7;
  double fov = 0.7;
  double cx = 0.0;
  double cy = 0.0;
  friend bool operator==(const ManifestCamera&, const ManifestCamera&) = default;
};

struct ManifestRecord {
  std::string id;
  std::string rgb;   // path relative to the manifest root
  std::string mask;
  ManifestCamera camera;
  std::string split;  // "front" or "back"
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::string root;
  std::vector<ManifestRecord> records;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline std::string split_for_yaw(double yaw) { return is_back_view(yaw) ? "back" : "front"; }

inline ManifestCamera to_manifest_camera(const OrbitCamera& c) {
  return {c.yaw, c.pitch, c.radius, c.fov_y, c.cx, c.cy};
}

inline OrbitCamera from_manifest_camera(const ManifestCamera& m, int height, int width) {
  OrbitCamera c;
  c.yaw = m.yaw;
  c.pitch = m.pitch;
  c.radius = m.radius;
  c.fov_y = m.fov;
  c.cx = m.cx;
  c.cy = m.cy;
  c.height = height;
  c.width = width;
  return enclose_bounds(c, Bounds{});
}

/// Unique ids and split tags consistent with the yaw rule.
inline void validate_manifest(const Manifest& m) {
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (r.id.empty()) throw InvalidInput("manifest record with empty id");
    if (!ids.insert(r.id).second) throw InvalidInput("duplicate manifest id '" + r.id + "'");
    if (r.split != split_for_yaw(r.camera.yaw)) {
      throw InvalidInput("record '" + r.id + "' has split '" + r.split + "' but yaw " +
                         std::to_string(r.camera.yaw));
    }
  }
}

/// Additionally checks that every referenced file exists below `root`.
inline void validate_manifest_paths(const Manifest& m) {
  for (const auto& r : m.records) {
    for (const auto& p : {r.rgb, r.mask}) {
      if (!std::filesystem::exists(std::filesystem::path(m.root) / p)) {
        throw InvalidInput("record '" + r.id + "' references missing file '" + p + "'");
      }
    }
  }
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["root"] = m.root;
  j["records"] = nlohmann::json::array();
  for (const auto& r : m.records) {
    j["records"].push_back({{"id", r.id},
                            {"rgb", r.rgb},
                            {"mask", r.mask},
                            {"camera",
                             {{"yaw", r.camera.yaw},
                              {"pitch", r.camera.pitch},
                              {"radius", r.camera.radius},
                              {"fov", r.camera.fov},
                              {"cx", r.camera.cx},
                              {"cy", r.camera.cy}}},
                            {"split", r.split}});
  }
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.root = j.at("root").get<std::string>();
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.rgb = r.at("rgb").get<std::string>();
      rec.mask = r.at("mask").get<std::string>();
      const auto& c = r.at("camera");
      rec.camera = {c.at("yaw").get<double>(),    c.at("pitch").get<double>(),
                    c.at("radius").get<double>(), c.at("fov").get<double>(),
                    c.at("cx").get<double>(),     c.at("cy").get<double>()};
      rec.split = r.at("split").get<std::string>();
      m.records.push_back(std::move(rec));
    }
    validate_manifest(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what(), 0);
  }
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  validate_manifest(m);
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline Manifest read_manifest(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), e.byte);
  }
  return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Detector output (JSON lines)
// ---------------------------------------------------------------------------

struct DetectorRecord {
  std::string id;
  std::optional<LandmarkSet> landmarks;
  std::optional<HeadBox> box;
  double yaw = 0.0, pitch = 0.0, radius = 2.7, fov = 0.7;
  friend bool operator==(const DetectorRecord&, const DetectorRecord&) = default;
};

inline std::string format_detector_record(const DetectorRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  if (r.landmarks) {
    auto arr = nlohmann::json::array();
    for (const auto& p : r.landmarks->points) arr.push_back({p.x, p.y});
    j["landmarks"] = arr;
  }
  if (r.box) {
    j["box"] = {{"cx", r.box->center.x}, {"cy", r.box->center.y}, {"w", r.box->width}, {"h", r.box->height}};
  }
  j["camera"] = {{"yaw", r.yaw}, {"pitch", r.pitch}, {"radius", r.radius}, {"fov", r.fov}};
  return j.dump();
}

inline std::vector<DetectorRecord> parse_detector_jsonl(std::string_view text) {
  std::vector<DetectorRecord> out;
  std::size_t offset = 0;
  while (offset < text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(offset, end - offset);
    const std::size_t line_at = offset;
    offset = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DetectorRecord r;
      r.id = j.at("id").get<std::string>();
      if (j.contains("landmarks")) {
        const auto& a = j.at("landmarks");
        if (a.size() != 5) throw ParseError("landmarks need 5 points", line_at);
        LandmarkSet lm;
        for (int i = 0; i < 5; ++i) lm.points[i] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
        r.landmarks = lm;
      }
      if (j.contains("box")) {
        const auto& b = j.at("box");
        r.box = HeadBox{{b.at("cx").get<double>(), b.at("cy").get<double>()},
                        b.at("w").get<double>(),
                        b.at("h").get<double>(),
                        "synthetic"};
      }
      const auto& c = j.at("camera");
      r.yaw = c.at("yaw").get<double>();
      r.pitch = c.at("pitch").get<double>();
      r.radius = c.at("radius").get<double>();
      r.fov = c.at("fov").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("detector record is not valid JSON: ") + e.what(), line_at + e.byte);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed detector record: ") + e.what(), line_at);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fit report
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const FitReport& r) {
  nlohmann::json j;
  j["loss_curve"] = r.loss_curve;
  j["psnr"] = nlohmann::json::object();
  j["view_mask_mse"] = nlohmann::json::object();
  for (const auto& v : r.views) {
    j["psnr"][v.id] = v.psnr;
    j["view_mask_mse"][v.id] = v.mask_mse;
  }
  j["mask_mse"] = r.mask_mse;
  j["residuals"] = nlohmann::json::object();
  for (const auto& [id, res] : r.residuals) {
    const auto a = res.to_array();
    j["residuals"][id] = std::vector<double>(a.begin(), a.end());
  }
  j["mean_residual_norm"] = r.mean_residual_norm();
  return j;
}

// ---------------------------------------------------------------------------
// Scene checkpoint
// ---------------------------------------------------------------------------

// Layout: "TGV1", then little-endian uint32 D, H, W, C, k, hidden count,
// hidden widths, activation code, H_img, W_img, then float32 bounds
// (lo xyz, hi xyz), then float32 parameter blocks in parameter_blocks order.

template <std::floating_point T>
std::string encode_checkpoint(const Scene<T>& s) {
  s.validate();
  std::string out = "TGV1";
  const auto& g = s.trigrid;
  for (int v : {g.depth, g.height, g.width, g.channels, s.decoder.radiance_channels()}) {
    detail::put_u32(out, static_cast<std::uint32_t>(v));
  }
  const auto hidden = s.decoder.hidden_widths();
  detail::put_u32(out, static_cast<std::uint32_t>(hidden.size()));
  for (int w : hidden) detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(s.decoder.hidden_activation));
  detail::put_u32(out, static_cast<std::uint32_t>(s.background.height));
  detail::put_u32(out, static_cast<std::uint32_t>(s.background.width));
  for (const Vec3d* v : {&g.bounds.lo, &g.bounds.hi})
    for (int a = 0; a < 3; ++a) detail::put_f32(out, static_cast<float>((*v)[a]));
  for (auto blk : parameter_blocks(s))
    for (T v : blk) detail::put_f32(out, static_cast<float>(v));
  return out;
}

template <std::floating_point T>
Scene<T> decode_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos);
    }
  };
  auto u32 = [&](const char* what) {
    need(4, what);
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
    pos += 4;
    if (u > (1u << 20)) throw ParseError(std::string("implausible ") + what, pos - 4);
    return static_cast<int>(u);
  };
  auto f32 = [&](const char* what) {
    need(4, what);
    const float v = detail::get_f32(bytes.data() + pos, true);
    pos += 4;
    return v;
  };
  need(4, "magic");
  if (bytes.substr(0, 4) != "TGV1") throw ParseError("not a TGV1 checkpoint", 0);
  pos = 4;
  const int d = u32("D"), h = u32("H"), w = u32("W"), c = u32("C"), k = u32("k");
  const int nh = u32("hidden count");
  std::vector<int> hidden(nh);
  for (int& x : hidden) x = u32("hidden width");
  const int act = u32("activation");
  if (act > 1) throw ParseError("unknown activation code", pos - 4);
  const int ih = u32("image height"), iw = u32("image width");
  Bounds b;
  for (Vec3d* v : {&b.lo, &b.hi})
    for (int a = 0; a < 3; ++a) (*v)[a] = f32("bounds");
  Scene<T> s;
  try {
    s.trigrid = TriGrid<T>::zeros(d, h, w, c, b);
    s.decoder = Decoder<T>::zeros(c, hidden, k, static_cast<Activation>(act));
    s.background = Background<T>::zeros(ih, iw, k);
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), pos);
  }
  for (auto blk : parameter_blocks(s)) {
    need(blk.size() * 4, "parameters");
    for (auto& v : blk) v = static_cast<T>(f32("parameters"));
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes after checkpoint payload", pos);
  s.validate();
  return s;
}

template <std::floating_point T>
void write_checkpoint(const std::string& path, const Scene<T>& s) {
  write_file(path, encode_checkpoint(s));
}

template <std::floating_point T>
Scene<T> read_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(read_file(path));
}

}  // namespace trigrid
