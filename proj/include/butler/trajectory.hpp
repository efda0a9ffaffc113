#pragma once

// Joint-space trajectories and the demonstration preprocessing pipeline:
// idle trimming, resampling and temporal alignment.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "butler/error.hpp"

namespace butler {

/// Joint angles in radians.
using JointVector = Eigen::VectorXd;

struct TimedSample {
  double t = 0.0;  // seconds
  JointVector q;
};

enum class DemoSource { recorded, synthetic };

inline const char* to_string(DemoSource s) {
  return s == DemoSource::recorded ? "recorded" : "synthetic";
}

inline DemoSource demo_source_from_string(const std::string& s) {
  if (s == "recorded") return DemoSource::recorded;
  if (s == "synthetic") return DemoSource::synthetic;
  throw FormatError("unknown demonstration source '" + s + "'");
}

/// A labelled, time-stamped joint trajectory. Immutable once constructed;
/// the constructor enforces the invariants (>= 2 samples, strictly
/// increasing non-negative timestamps, one finite joint dimension).
class Demonstration {
 public:
  Demonstration(std::string label, std::vector<TimedSample> samples,
                DemoSource source = DemoSource::recorded)
      : label_(std::move(label)), samples_(std::move(samples)), source_(source) {
    if (label_.empty()) throw InvalidArgument("demonstration label must be non-empty");
    if (samples_.size() < 2) throw InvalidArgument("demonstration needs at least 2 samples");
    const auto dim = samples_.front().q.size();
    if (dim < 1) throw InvalidArgument("joint dimension must be >= 1");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!std::isfinite(s.t) || s.t < 0.0)
        throw InvalidArgument("timestamps must be finite and non-negative");
      if (i > 0 && !(s.t > samples_[i - 1].t))
        throw InvalidArgument("timestamps must be strictly increasing");
      if (s.q.size() != dim) throw MixedDimensions("joint dimension changes within demonstration");
      if (!s.q.allFinite()) throw InvalidArgument("joint values must be finite");
    }
  }

  const std::string& label() const { return label_; }
  const std::vector<TimedSample>& samples() const { return samples_; }
  DemoSource source() const { return source_; }
  std::size_t size() const { return samples_.size(); }
  Eigen::Index dim() const { return samples_.front().q.size(); }
  double start_time() const { return samples_.front().t; }
  double end_time() const { return samples_.back().t; }
  double duration() const { return end_time() - start_time(); }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.t);
    return out;
  }

  friend bool operator==(const Demonstration& a, const Demonstration& b) {
    if (a.label_ != b.label_ || a.source_ != b.source_ || a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& x = a.samples_[i];
      const auto& y = b.samples_[i];
      if (x.t != y.t || x.q.size() != y.q.size() || x.q != y.q) return false;
    }
    return true;
  }

 private:
  std::string label_;
  std::vector<TimedSample> samples_;
  DemoSource source_;
};

/// Demonstrations resampled onto the time base of the first (reference) one.
struct AlignedDemoSet {
  std::string label;
  std::size_t reference_index = 0;
  std::vector<Demonstration> demos;
  std::size_t sample_count = 0;

  const Demonstration& reference() const { return demos.at(reference_index); }
};

struct TrimOptions {
  double velocity_threshold = 0.01;  // rad/s
  std::size_t min_active_samples = 10;
};

/// Removes the idle head and tail of a demonstration.
///
/// Speed is measured per sampling interval as max over joints of
/// |dq| / dt. The result spans from the start of the first interval whose
/// speed exceeds the threshold to the end of the last one, re-based so the
/// first retained sample is at t = 0.
inline Demonstration trim_idle(const Demonstration& demo, const TrimOptions& opts = {}) {
  if (!(opts.velocity_threshold > 0.0))
    throw InvalidArgument("velocity_threshold must be positive");
  const auto& s = demo.samples();
  const std::size_t n = s.size();
  std::size_t first = n;
  std::size_t last = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt = s[i + 1].t - s[i].t;
    const double speed = (s[i + 1].q - s[i].q).cwiseAbs().maxCoeff() / dt;
    if (speed > opts.velocity_threshold) {
      if (first == n) first = i;
      last = i + 1;
    }
  }
  const std::size_t kept = first == n ? 0 : last - first + 1;
  if (kept < std::max<std::size_t>(opts.min_active_samples, 2)) {
    throw EmptyAfterTrim("demonstration '" + demo.label() + "' has only " +
                         std::to_string(kept) + " active samples");
  }
  const double t0 = s[first].t;
  std::vector<TimedSample> out;
  out.reserve(kept);
  for (std::size_t i = first; i <= last; ++i) out.push_back({s[i].t - t0, s[i].q});
  return Demonstration(demo.label(), std::move(out), demo.source());
}

/// Per-joint linear interpolation at the target times. A target equal to a
/// source timestamp reproduces that sample exactly.
inline Demonstration resample(const Demonstration& demo, std::span<const double> target_times) {
  if (target_times.size() < 2) throw InvalidArgument("resample needs at least 2 target times");
  const auto& s = demo.samples();
  std::vector<TimedSample> out;
  out.reserve(target_times.size());
  for (std::size_t k = 0; k < target_times.size(); ++k) {
    const double t = target_times[k];
    if (!(t >= demo.start_time() && t <= demo.end_time())) {
      throw OutOfRange("target time " + std::to_string(t) + " outside [" +
                       std::to_string(demo.start_time()) + ", " +
                       std::to_string(demo.end_time()) + "]");
    }
    if (k > 0 && !(t > target_times[k - 1]))
      throw InvalidArgument("target times must be strictly increasing");
    const auto it = std::lower_bound(s.begin(), s.end(), t,
                                     [](const TimedSample& a, double v) { return a.t < v; });
    if (it->t == t) {
      out.push_back({t, it->q});
      continue;
    }
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    out.push_back({t, lo.q + w * (hi.q - lo.q)});
  }
  return Demonstration(demo.label(), std::move(out), demo.source());
}

/// Aligns every demonstration to the first one: each is uniformly
/// time-rescaled onto the reference's span and resampled at the reference's
/// timestamps. The reference is returned unchanged.
inline AlignedDemoSet align_to_reference(std::span<const Demonstration> demos) {
  if (demos.empty()) throw InvalidArgument("align_to_reference needs at least one demonstration");
  const Demonstration& ref = demos.front();
  for (const auto& d : demos) {
    if (d.label() != ref.label())
      throw MixedLabels("cannot align '" + d.label() + "' with '" + ref.label() + "'");
    if (d.dim() != ref.dim()) throw MixedDimensions("demonstrations differ in joint dimension");
  }
  const std::vector<double> ref_times = ref.times();
  AlignedDemoSet set;
  set.label = ref.label();
  set.sample_count = ref.size();
  set.demos.reserve(demos.size());
  set.demos.push_back(ref);
  for (std::size_t i = 1; i < demos.size(); ++i) {
    const auto& d = demos[i];
    const double ratio = ref.duration() / d.duration();
    std::vector<TimedSample> scaled;
    scaled.reserve(d.size());
    for (const auto& s : d.samples())
      scaled.push_back({ref.start_time() + (s.t - d.start_time()) * ratio, s.q});
    scaled.front().t = ref.start_time();
    scaled.back().t = ref.end_time();
    const Demonstration rescaled(d.label(), std::move(scaled), d.source());
    set.demos.push_back(resample(rescaled, ref_times));
  }
  return set;
}

}  // namespace butler
