#pragma once

// Fusion of instance masks, person keypoints and depth into object ranges,
// map-frame positions, chair occupancy and waving intent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "butler/error.hpp"
#include "butler/random.hpp"

namespace butler {

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major metres; 0 or non-finite = invalid

  DepthImage() = default;
  DepthImage(int w, int h, double fill = 0.0) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw InvalidArgument("depth image must be at least 1x1");
  }

  double& at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  std::size_t size() const { return depth.size(); }

  static bool valid(double d) { return std::isfinite(d) && d > 0.0; }
};

struct PixelRect {
  int x = 0;  // first column
  int y = 0;  // first row
  int w = 0;
  int h = 0;

  bool contains(int u, int v) const { return u >= x && u < x + w && v >= y && v < y + h; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Instance mask over the full image.
struct DetectionMask {
  std::string label;
  PixelRect bbox;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // row-major, 1 = object
  double confidence = 1.0;

  bool at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u] != 0; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; }));
  }

  /// Tight bounding box of the set pixels.
  static PixelRect tight_bbox(int width, int height, std::span<const std::uint8_t> mask) {
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        if (mask[static_cast<std::size_t>(v) * width + u]) {
          x0 = std::min(x0, u);
          y0 = std::min(y0, v);
          x1 = std::max(x1, u);
          y1 = std::max(y1, v);
        }
    if (x1 < 0) return {};
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  }

  static DetectionMask from_bitmap(std::string label, int width, int height, std::vector<std::uint8_t> bits,
                                   double confidence = 1.0) {
    DetectionMask m;
    m.label = std::move(label);
    m.width = width;
    m.height = height;
    m.mask = std::move(bits);
    m.confidence = confidence;
    m.bbox = tight_bbox(width, height, m.mask);
    m.validate();
    return m;
  }

  static DetectionMask rectangle(std::string label, int width, int height, PixelRect r, double confidence = 1.0) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
    for (int v = r.y; v < r.y + r.h; ++v)
      for (int u = r.x; u < r.x + r.w; ++u) bits[static_cast<std::size_t>(v) * width + u] = 1;
    return from_bitmap(std::move(label), width, height, std::move(bits), confidence);
  }

  void validate() const {
    if (width < 1 || height < 1 || mask.size() != static_cast<std::size_t>(width) * height)
      throw InvalidArgument("mask size does not match its dimensions");
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw InvalidArgument("confidence must lie in [0, 1]");
    bool any = false;
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        if (at(u, v)) {
          any = true;
          if (!bbox.contains(u, v)) throw InvalidArgument("mask pixel outside its bounding box");
        }
    if (!any) throw InvalidArgument("mask has no set pixel");
  }
};

struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

/// Named body landmarks; a missing name reads as confidence 0.
struct PersonKeypoints {
  std::map<std::string, Keypoint> points;

  Keypoint get(const std::string& name) const {
    const auto it = points.find(name);
    return it == points.end() ? Keypoint{} : it->second;
  }
};

inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct RobotPose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // radians, counterclockwise from +x, in (-pi, pi]

  RobotPose2D() = default;
  RobotPose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}
};

inline constexpr double kDefaultHfov = 1.0123;  // 58 degrees

struct CameraModel {
  int width = 640;
  int height = 480;
  double hfov = kDefaultHfov;

  void validate() const {
    if (width < 1 || height < 1) throw InvalidArgument("camera size must be positive");
    if (!(hfov > 0.0 && hfov < std::numbers::pi)) throw InvalidArgument("hfov must lie in (0, pi)");
  }
  double cx() const { return width / 2.0; }
  double focal() const { return (width / 2.0) / std::tan(hfov / 2.0); }
};

struct WorldObject {
  std::string label;
  double x = 0.0;
  double y = 0.0;
  double distance = 0.0;
  double timestamp = 0.0;
  std::size_t detection_index = 0;
};

/// Mean of the valid depth values under the mask.
inline double mask_mean_depth(const DetectionMask& mask, const DepthImage& depth) {
  if (mask.width != depth.width || mask.height != depth.height)
    throw InvalidArgument("mask and depth image dimensions differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.mask.size(); ++i) {
    if (!mask.mask[i]) continue;
    const double d = depth.depth[i];
    if (!DepthImage::valid(d)) continue;
    sum += d;
    ++count;
  }
  if (count == 0) throw NoValidDepth("no valid depth under '" + mask.label + "' mask");
  return sum / static_cast<double>(count);
}

/// Pinhole bearing of an image column; positive is to the robot's left.
inline double pixel_bearing(const CameraModel& camera, double u) {
  if (!(u >= 0.0 && u <= camera.width)) throw InvalidArgument("pixel column outside the image");
  return std::atan((camera.cx() - u) / camera.focal());
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 project_to_world(const RobotPose2D& pose, double bearing, double distance) {
  if (!(distance >= 0.0)) throw InvalidArgument("distance must be non-negative");
  const double heading = pose.theta + bearing;
  return {pose.x + distance * std::cos(heading), pose.y + distance * std::sin(heading)};
}

/// Mean column of the set pixels, rounded to the nearest integer.
inline int mask_centroid_column(const DetectionMask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = mask.bbox.y; v < mask.bbox.y + mask.bbox.h; ++v)
    for (int u = mask.bbox.x; u < mask.bbox.x + mask.bbox.w; ++u)
      if (mask.at(u, v)) {
        sum += u;
        ++n;
      }
  if (n == 0) throw InvalidArgument("empty mask");
  return static_cast<int>(std::lround(sum / static_cast<double>(n)));
}

struct PersonDetection {
  PersonKeypoints keypoints;
};

struct GroundTruthObject {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

/// One synchronized capture.
struct PerceptionFrame {
  CameraModel camera;
  RobotPose2D pose;
  double timestamp = 0.0;
  DepthImage depth;
  std::vector<DetectionMask> detections;
  std::vector<PersonDetection> persons;
  std::vector<GroundTruthObject> ground_truth;  // synthetic frames only
};

struct Localization {
  std::vector<WorldObject> objects;
  std::size_t skipped_no_depth = 0;
};

/// Range from the mask's mean depth, bearing from its centroid column,
/// position in the map frame. Masks without valid depth are skipped.
inline Localization localize_objects(const PerceptionFrame& frame) {
  frame.camera.validate();
  if (frame.depth.width != frame.camera.width || frame.depth.height != frame.camera.height)
    throw InvalidArgument("depth image does not match camera size");
  Localization out;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const auto& det = frame.detections[i];
    double distance = 0.0;
    try {
      distance = mask_mean_depth(det, frame.depth);
    } catch (const NoValidDepth&) {
      ++out.skipped_no_depth;
      continue;
    }
    const double bearing = pixel_bearing(frame.camera, mask_centroid_column(det));
    const Point2 p = project_to_world(frame.pose, bearing, distance);
    out.objects.push_back({det.label, p.x, p.y, distance, frame.timestamp, i});
  }
  return out;
}

enum class ChairStatus { free, taken };

inline const char* to_string(ChairStatus s) { return s == ChairStatus::free ? "free" : "taken"; }

struct ChairOccupancy {
  ChairStatus status = ChairStatus::free;
  double overlap = 0.0;  // max over persons of |chair & person| / |chair|
};

inline constexpr double kDefaultOverlapThreshold = 0.2;

inline std::vector<ChairOccupancy> chair_occupancy(std::span<const DetectionMask> chairs,
                                                   std::span<const DetectionMask> persons,
                                                   double overlap_threshold = kDefaultOverlapThreshold) {
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0))
    throw InvalidArgument("overlap threshold must lie in [0, 1]");
  std::vector<ChairOccupancy> out;
  out.reserve(chairs.size());
  for (const auto& chair : chairs) {
    const double area = static_cast<double>(chair.area());
    double best = 0.0;
    for (const auto& person : persons) {
      if (person.width != chair.width || person.height != chair.height)
        throw InvalidArgument("chair and person masks differ in size");
      std::size_t inter = 0;
      for (std::size_t i = 0; i < chair.mask.size(); ++i) inter += (chair.mask[i] && person.mask[i]) ? 1 : 0;
      best = std::max(best, area > 0.0 ? static_cast<double>(inter) / area : 0.0);
    }
    out.push_back({best >= overlap_threshold ? ChairStatus::taken : ChairStatus::free, best});
  }
  return out;
}

struct WavingResult {
  bool left = false;
  bool right = false;
  bool any() const { return left || right; }
};

inline constexpr double kDefaultKeypointConfidence = 0.3;

/// An arm waves when its wrist is above the elbow, or above a confidently
/// detected shoulder. Image rows grow downward, so above means smaller v.
inline bool arm_waving(const PersonKeypoints& kp, char side, double min_confidence) {
  const std::string s(1, side);
  const Keypoint wrist = kp.get("wrist_" + s);
  const Keypoint elbow = kp.get("elbow_" + s);
  const Keypoint shoulder = kp.get("shoulder_" + s);
  if (wrist.confidence < min_confidence || elbow.confidence < min_confidence) return false;
  if (wrist.v < elbow.v) return true;
  return shoulder.confidence >= min_confidence && wrist.v < shoulder.v;
}

inline WavingResult detect_waving(const PersonKeypoints& kp, double min_confidence = kDefaultKeypointConfidence) {
  return {arm_waving(kp, 'l', min_confidence), arm_waving(kp, 'r', min_confidence)};
}

// ---------------------------------------------------------------------------
// Depth noise

/// Sensor range error, linear in depth through 20.36 mm at 1 m and 79.15 mm
/// at 3 m, floored at its value for 0.4 m.
inline double depth_noise_sigma(double d) {
  constexpr double kSigma1m = 0.02036;
  constexpr double kSigma3m = 0.07915;
  constexpr double kSlope = (kSigma3m - kSigma1m) / 2.0;
  constexpr double kFloor = kSigma1m + kSlope * (0.4 - 1.0);
  return std::max(kSigma1m + kSlope * (d - 1.0), kFloor);
}

/// Adds zero-mean Gaussian range noise to every valid pixel. Each pixel's
/// draw depends only on (seed, pixel index). Invalid pixels are kept;
/// draws that would go non-positive are clamped to 0 (invalid).
inline DepthImage apply_depth_noise(const DepthImage& depth, std::uint64_t seed) {
  DepthImage out = depth;
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    const double d = out.depth[i];
    if (!DepthImage::valid(d)) continue;
    out.depth[i] = std::max(0.0, d + depth_noise_sigma(d) * counter_normal(seed, i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame-level report

struct ChairReport {
  std::size_t detection_index = 0;
  ChairOccupancy occupancy;
  std::optional<WorldObject> location;
};

struct FrameReport {
  Localization localization;
  std::vector<ChairReport> chairs;
  std::vector<WavingResult> waving;  // per person
  bool any_waving = false;
};

struct PerceptionOptions {
  double overlap_threshold = kDefaultOverlapThreshold;
  double min_keypoint_confidence = kDefaultKeypointConfidence;
  std::string chair_label = "chair";
  std::string person_label = "person";
};

inline FrameReport analyze_frame(const PerceptionFrame& frame, const PerceptionOptions& opts = {}) {
  FrameReport rep;
  rep.localization = localize_objects(frame);
  std::vector<DetectionMask> chairs, persons;
  std::vector<std::size_t> chair_index;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    if (frame.detections[i].label == opts.chair_label) {
      chairs.push_back(frame.detections[i]);
      chair_index.push_back(i);
    } else if (frame.detections[i].label == opts.person_label) {
      persons.push_back(frame.detections[i]);
    }
  }
  const auto occ = chair_occupancy(chairs, persons, opts.overlap_threshold);
  for (std::size_t c = 0; c < occ.size(); ++c) {
    ChairReport cr{chair_index[c], occ[c], std::nullopt};
    for (const auto& obj : rep.localization.objects)
      if (obj.detection_index == chair_index[c]) cr.location = obj;
    rep.chairs.push_back(std::move(cr));
  }
  for (const auto& p : frame.persons) {
    rep.waving.push_back(detect_waving(p.keypoints, opts.min_keypoint_confidence));
    rep.any_waving = rep.any_waving || rep.waving.back().any();
  }
  return rep;
}

}  // namespace butler
