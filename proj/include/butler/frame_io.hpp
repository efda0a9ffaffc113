#pragma once

// PerceptionFrame interchange JSON. Depth is base64 of little-endian
// float32, masks are run-length encoded row-major as alternating run
// lengths starting with a run of zeros.

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "butler/error.hpp"
#include "butler/perception.hpp"

namespace butler {

namespace detail {

inline constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += kBase64Alphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::array<int, 256> rev{};
  rev.fill(-1);
  for (std::size_t i = 0; i < kBase64Alphabet.size(); ++i) rev[static_cast<unsigned char>(kBase64Alphabet[i])] = static_cast<int>(i);
  if (text.size() % 4 != 0) throw FormatError("base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) throw FormatError("misplaced base64 padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw FormatError("misplaced base64 padding");
      const int r = rev[static_cast<unsigned char>(c)];
      if (r < 0) throw FormatError("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(r);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

}  // namespace detail

inline std::string encode_depth_f32le(const DepthImage& img) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(img.size() * 4);
  for (double d : img.depth) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(d));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return detail::base64_encode(bytes);
}

inline DepthImage decode_depth_f32le(int width, int height, std::string_view b64) {
  if (width < 1 || height < 1) throw FormatError("depth dimensions must be positive");
  const auto bytes = detail::base64_decode(b64);
  if (bytes.size() != static_cast<std::size_t>(width) * height * 4)
    throw FormatError("depth payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(static_cast<std::size_t>(width) * height * 4));
  DepthImage img(width, height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    const float f = std::bit_cast<float>(bits);
    if (std::isfinite(f) && f < 0.0f) throw FormatError("negative depth value");
    img.depth[i] = f;
  }
  return img;
}

inline std::vector<std::uint32_t> encode_rle(std::span<const std::uint8_t> mask) {
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t len = 0;
  for (std::uint8_t b : mask) {
    const std::uint8_t bit = b ? 1 : 0;
    if (bit != current) {
      runs.push_back(len);
      current = bit;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

inline std::vector<std::uint8_t> decode_rle(std::span<const std::uint32_t> runs, std::size_t size) {
  std::vector<std::uint8_t> mask;
  mask.reserve(size);
  std::uint8_t value = 0;
  for (std::uint32_t r : runs) {
    if (mask.size() + r > size) throw FormatError("mask runs exceed image size");
    mask.insert(mask.end(), r, value);
    value ^= 1;
  }
  if (mask.size() != size) throw FormatError("mask runs do not cover the image");
  return mask;
}

inline nlohmann::json frame_to_json(const PerceptionFrame& f) {
  nlohmann::json j;
  j["camera"] = {{"width", f.camera.width}, {"height", f.camera.height}, {"hfov", f.camera.hfov}};
  j["pose"] = {{"x", f.pose.x}, {"y", f.pose.y}, {"theta", f.pose.theta}};
  j["timestamp"] = f.timestamp;
  j["depth"] = {{"width", f.depth.width}, {"height", f.depth.height}, {"data_b64_f32le", encode_depth_f32le(f.depth)}};
  auto& dets = j["detections"] = nlohmann::json::array();
  for (const auto& d : f.detections) {
    dets.push_back({{"label", d.label},
                    {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                    {"mask_rle", encode_rle(d.mask)},
                    {"confidence", d.confidence}});
  }
  auto& persons = j["persons"] = nlohmann::json::array();
  for (const auto& p : f.persons) {
    nlohmann::json kps = nlohmann::json::object();
    for (const auto& [name, kp] : p.keypoints.points) kps[name] = {kp.u, kp.v, kp.confidence};
    persons.push_back({{"keypoints", std::move(kps)}});
  }
  if (!f.ground_truth.empty()) {
    auto& gt = j["ground_truth"] = nlohmann::json::array();
    for (const auto& g : f.ground_truth) gt.push_back({{"label", g.label}, {"x", g.x}, {"y", g.y}});
  }
  return j;
}

inline PerceptionFrame frame_from_json(const nlohmann::json& j) {
  PerceptionFrame f;
  try {
    const auto& cam = j.at("camera");
    f.camera.width = cam.at("width").get<int>();
    f.camera.height = cam.at("height").get<int>();
    f.camera.hfov = cam.value("hfov", kDefaultHfov);
    f.camera.validate();
    const auto& pose = j.at("pose");
    f.pose = RobotPose2D(pose.at("x").get<double>(), pose.at("y").get<double>(), pose.at("theta").get<double>());
    f.timestamp = j.value("timestamp", 0.0);
    const auto& depth = j.at("depth");
    f.depth = decode_depth_f32le(depth.at("width").get<int>(), depth.at("height").get<int>(),
                                 depth.at("data_b64_f32le").get<std::string>());
    if (f.depth.width != f.camera.width || f.depth.height != f.camera.height)
      throw FormatError("depth image size differs from camera size");
    const auto n = static_cast<std::size_t>(f.depth.width) * f.depth.height;
    for (const auto& d : j.at("detections")) {
      DetectionMask m;
      m.label = d.at("label").get<std::string>();
      const auto bb = d.at("bbox").get<std::vector<int>>();
      if (bb.size() != 4) throw FormatError("bbox must be [x, y, w, h]");
      m.bbox = {bb[0], bb[1], bb[2], bb[3]};
      m.width = f.depth.width;
      m.height = f.depth.height;
      m.mask = decode_rle(d.at("mask_rle").get<std::vector<std::uint32_t>>(), n);
      m.confidence = d.value("confidence", 1.0);
      m.validate();
      f.detections.push_back(std::move(m));
    }
    if (j.contains("persons")) {
      for (const auto& p : j.at("persons")) {
        PersonDetection pd;
        for (const auto& [name, arr] : p.at("keypoints").items()) {
          const auto v = arr.get<std::vector<double>>();
          if (v.size() != 3) throw FormatError("keypoint '" + name + "' must be [u, v, c]");
          if (!(v[2] >= 0.0 && v[2] <= 1.0)) throw FormatError("keypoint confidence outside [0, 1]");
          pd.keypoints.points[name] = {v[0], v[1], v[2]};
        }
        f.persons.push_back(std::move(pd));
      }
    }
    if (j.contains("ground_truth")) {
      for (const auto& g : j.at("ground_truth"))
        f.ground_truth.push_back({g.at("label").get<std::string>(), g.at("x").get<double>(), g.at("y").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed perception frame: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid perception frame: ") + e.what());
  }
  return f;
}

inline void save_frame(const PerceptionFrame& f, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << frame_to_json(f).dump() << '\n';
}

inline PerceptionFrame load_frame(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return frame_from_json(j);
}

}  // namespace butler
