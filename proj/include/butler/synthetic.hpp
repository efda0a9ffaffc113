#pragma once

// Synthetic stand-ins for kinesthetic recordings and camera captures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "butler/error.hpp"
#include "butler/perception.hpp"
#include "butler/random.hpp"
#include "butler/trajectory.hpp"

namespace butler {

enum class Waveform { sinusoid, min_jerk };

inline Waveform waveform_from_string(const std::string& s) {
  if (s == "sinusoid") return Waveform::sinusoid;
  if (s == "min_jerk" || s == "minjerk") return Waveform::min_jerk;
  throw InvalidArgument("unknown waveform '" + s + "' (expected sinusoid or min_jerk)");
}

inline const char* to_string(Waveform w) { return w == Waveform::sinusoid ? "sinusoid" : "min_jerk"; }

struct DemoGenConfig {
  std::string label = "wave";
  Waveform waveform = Waveform::sinusoid;
  int joints = 1;
  int count = 1;
  int samples = 200;        // samples over the moving part
  double duration = 4.0;    // seconds of motion
  double amplitude = 0.5;   // radians
  double noise = 0.0;       // joint noise std, radians
  double idle_pad = 0.0;    // seconds held still before and after
  double time_jitter = 0.0; // relative spread of per-demo duration

  void validate() const {
    if (label.empty()) throw InvalidArgument("label must be non-empty");
    if (joints < 1) throw InvalidArgument("joints must be >= 1");
    if (count < 1) throw InvalidArgument("count must be >= 1");
    if (samples < 2) throw InvalidArgument("samples must be >= 2");
    if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
    if (!(amplitude > 0.0)) throw InvalidArgument("amplitude must be positive");
    if (noise < 0.0 || idle_pad < 0.0) throw InvalidArgument("noise and idle_pad must be >= 0");
    if (time_jitter < 0.0 || time_jitter >= 1.0) throw InvalidArgument("time_jitter must lie in [0, 1)");
  }
};

/// Noise-free joint angles at phase s in [0, 1] of the motion.
inline JointVector waveform_value(const DemoGenConfig& cfg, double s) {
  JointVector q(cfg.joints);
  for (int j = 0; j < cfg.joints; ++j) {
    const double offset = 0.1 * j;
    if (cfg.waveform == Waveform::sinusoid) {
      const double phase = 0.35 * j;
      q[j] = offset + cfg.amplitude * (std::sin(2.0 * std::numbers::pi * s + phase) - std::sin(phase));
    } else {
      const double blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
      q[j] = offset + cfg.amplitude * (j % 2 == 0 ? 1.0 : -1.0) * blend;
    }
  }
  return q;
}

/// Demonstrations of one waveform; deterministic in (config, seed).
inline std::vector<Demonstration> generate_demos(const DemoGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<Demonstration> out;
  for (int d = 0; d < cfg.count; ++d) {
    Rng rng(derive_seed(seed, 0xde70, static_cast<std::uint64_t>(d)));
    const double scale = cfg.time_jitter > 0.0 ? 1.0 + cfg.time_jitter * (2.0 * rng.uniform() - 1.0) : 1.0;
    const double motion = cfg.duration * scale;
    const double dt = motion / (cfg.samples - 1);
    const int pad = static_cast<int>(std::llround(cfg.idle_pad / dt));
    std::vector<TimedSample> samples;
    const int total = cfg.samples + 2 * pad;
    samples.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
      const int k = std::clamp(i - pad, 0, cfg.samples - 1);
      const double s = static_cast<double>(k) / (cfg.samples - 1);
      JointVector q = waveform_value(cfg, s);
      if (cfg.noise > 0.0)
        for (int j = 0; j < cfg.joints; ++j) q[j] += rng.normal(0.0, cfg.noise);
      samples.push_back({i * dt, std::move(q)});
    }
    out.emplace_back(cfg.label, std::move(samples), DemoSource::synthetic);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenes

struct SceneOptions {
  CameraModel camera{160, 120, kDefaultHfov};
  int min_objects = 1;
  int max_objects = 4;
  double min_distance = 0.5;
  double max_distance = 4.0;
  double background_depth = 8.0;
  std::vector<std::string> labels{"chair", "bag", "bottle", "person"};
};

/// Renders non-overlapping objects with exactly known map positions. Each
/// mask is left-right symmetric about an integer column, and the depth
/// under a mask is the object's range rounded to float precision, so the
/// scene round-trips through the float32 frame format exactly.
inline PerceptionFrame generate_scene(std::uint64_t seed, const SceneOptions& opts = {}) {
  opts.camera.validate();
  Rng rng(seed);
  PerceptionFrame f;
  f.camera = opts.camera;
  f.pose = RobotPose2D(static_cast<float>(rng.uniform(-5.0, 5.0)), static_cast<float>(rng.uniform(-5.0, 5.0)),
                       static_cast<float>(rng.uniform(-3.0, 3.0)));
  f.timestamp = 0.0;
  const int w = opts.camera.width;
  const int h = opts.camera.height;
  f.depth = DepthImage(w, h, static_cast<float>(opts.background_depth));

  const int n_obj = opts.min_objects + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_objects - opts.min_objects + 1)));
  const int band = w / n_obj;
  const double focal = opts.camera.focal();
  for (int k = 0; k < n_obj; ++k) {
    const int max_half = std::max(1, band / 2 - 2);
    const int half = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_half)));
    const int lo = k * band + half;
    const int hi = (k + 1) * band - 1 - half;
    const int uc = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, hi - lo + 1))));
    const double dist = static_cast<float>(rng.uniform(opts.min_distance, opts.max_distance));
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 2)));
    const int rows = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h - top)));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
    for (int v = top; v < top + rows; ++v) {
      const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(half + 1)));
      for (int u = uc - a; u <= uc + a; ++u) {
        bits[static_cast<std::size_t>(v) * w + u] = 1;
        f.depth.at(u, v) = dist;
      }
    }
    const std::string& label = opts.labels[rng.below(opts.labels.size())];
    f.detections.push_back(DetectionMask::from_bitmap(label, w, h, std::move(bits), 0.5 + 0.5 * rng.uniform()));

    // Forward geometry: camera-frame point, rotated and translated to the map.
    const double along = focal;
    const double left = opts.camera.cx() - uc;
    const double norm = std::hypot(along, left);
    const double lx = dist * along / norm;
    const double ly = dist * left / norm;
    const double c = std::cos(f.pose.theta), s = std::sin(f.pose.theta);
    f.ground_truth.push_back({label, f.pose.x + c * lx - s * ly, f.pose.y + s * lx + c * ly});
  }
  return f;
}

/// Keypoints for a standing person centred on column u. When `raised`,
/// the chosen arm's wrist is lifted above the shoulder.
inline PersonKeypoints make_person_keypoints(double u, double top, double scale, bool raised, char side = 'r') {
  PersonKeypoints kp;
  const double dir_r = -1.0;  // the person's right appears on the image left
  for (char s : {'l', 'r'}) {
    const double dir = s == 'r' ? dir_r : -dir_r;
    const std::string n(1, s);
    kp.points["shoulder_" + n] = {u + dir * 10 * scale, top + 20 * scale, 0.9};
    kp.points["elbow_" + n] = {u + dir * 14 * scale, top + 35 * scale, 0.9};
    const bool up = raised && s == side;
    kp.points["wrist_" + n] = {u + dir * 16 * scale, up ? top + 8 * scale : top + 50 * scale, 0.9};
  }
  kp.points["nose"] = {u, top + 8 * scale, 0.9};
  return kp;
}

}  // namespace butler
