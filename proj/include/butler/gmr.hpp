#pragma once

// Gaussian mixture regression over time, learned movements, playback and
// movement files.

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "butler/error.hpp"
#include "butler/gmm.hpp"
#include "butler/trajectory.hpp"

namespace butler {

/// Floor applied to each component's time variance before conditioning.
inline constexpr double kMinTimeVariance = 1e-12;

struct GmrOutput {
  JointVector mean;
  Eigen::MatrixXd covariance;  // D x D
  Eigen::VectorXd weights;     // h_k(t)
};

/// Conditions a (t, q) mixture on time. Component blocks are cached once;
/// evaluation is reentrant.
class GmrRegressor {
 public:
  explicit GmrRegressor(const GmmModel& model) {
    model.validate();
    const auto d = model.dim();
    if (d < 2) throw InvalidArgument("GMR needs a (time, joints) model with dim >= 2");
    const auto joints = d - 1;
    for (Eigen::Index c = 0; c < model.k(); ++c) {
      const auto& mu = model.means[static_cast<std::size_t>(c)];
      const auto& s = model.covariances[static_cast<std::size_t>(c)];
      Component comp;
      comp.log_prior = std::log(model.priors[c]);
      comp.mu_t = mu[0];
      comp.mu_q = mu.tail(joints);
      comp.var_t = std::max(s(0, 0), kMinTimeVariance);
      comp.gain = s.block(1, 0, joints, 1) / comp.var_t;
      comp.cond_cov = s.block(1, 1, joints, joints) - comp.gain * s.block(0, 1, 1, joints);
      comp.cond_cov = 0.5 * (comp.cond_cov + comp.cond_cov.transpose()).eval();
      components_.push_back(std::move(comp));
    }
    joints_ = joints;
  }

  Eigen::Index joints() const { return joints_; }

  /// Responsibilities h_k(t) of each component for time t.
  Eigen::VectorXd weights(double t) const {
    Eigen::VectorXd lw(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t c = 0; c < components_.size(); ++c) {
      const auto& comp = components_[c];
      const double z = t - comp.mu_t;
      lw[static_cast<Eigen::Index>(c)] = comp.log_prior - 0.5 * std::log(2.0 * std::numbers::pi * comp.var_t) -
                                         0.5 * z * z / comp.var_t;
    }
    const double lse = detail::log_sum_exp(lw);
    return (lw.array() - lse).exp().matrix();
  }

  JointVector mean(double t) const {
    const Eigen::VectorXd h = weights(t);
    JointVector q = JointVector::Zero(joints_);
    for (std::size_t c = 0; c < components_.size(); ++c)
      q += h[static_cast<Eigen::Index>(c)] * conditional_mean(components_[c], t);
    return q;
  }

  GmrOutput regress(double t) const {
    GmrOutput out;
    out.weights = weights(t);
    out.mean = JointVector::Zero(joints_);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(joints_, joints_);
    for (std::size_t c = 0; c < components_.size(); ++c) {
      const double h = out.weights[static_cast<Eigen::Index>(c)];
      const JointVector m = conditional_mean(components_[c], t);
      out.mean += h * m;
      second += h * (components_[c].cond_cov + m * m.transpose());
    }
    out.covariance = second - out.mean * out.mean.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
  }

 private:
  struct Component {
    double log_prior = 0.0;
    double mu_t = 0.0;
    double var_t = 1.0;
    Eigen::VectorXd mu_q;
    Eigen::VectorXd gain;  // Sigma_qt / Sigma_tt
    Eigen::MatrixXd cond_cov;
  };

  static JointVector conditional_mean(const Component& c, double t) { return c.mu_q + c.gain * (t - c.mu_t); }

  std::vector<Component> components_;
  Eigen::Index joints_ = 0;
};

inline GmrOutput gmr_regress(const GmmModel& model, double t) { return GmrRegressor(model).regress(t); }

// ---------------------------------------------------------------------------

struct LearnedMovement {
  std::string name;
  GmmModel model;
  double duration = 0.0;      // seconds, reference demonstration
  Eigen::Index dim = 0;       // joint count
  double default_rate = 50.0;  // samples per second

  void validate() const {
    if (name.empty()) throw InvalidArgument("movement name must be non-empty");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidArgument("movement duration must be positive");
    if (!(default_rate > 0.0) || !std::isfinite(default_rate))
      throw InvalidArgument("movement default rate must be positive");
    model.validate();
    if (dim != model.dim() - 1) throw InvalidArgument("movement dim must equal model dimension - 1");
  }
};

struct LearnConfig {
  TrimOptions trim;
  bool trim_idle = true;
  SelectOptions select;
  std::uint64_t seed = 0;
  std::optional<double> default_rate;  // defaults to the reference sampling rate
};

struct LearnOutcome {
  LearnedMovement movement;
  AlignedDemoSet aligned;
  ModelSelection selection;
};

/// Stacks aligned demonstrations into (t, q) rows and merges exact repeats
/// into weighted rows.
inline Dataset pool_demonstrations(const AlignedDemoSet& set) {
  const auto d = set.reference().dim() + 1;
  const auto n = static_cast<Eigen::Index>(set.demos.size() * set.sample_count);
  Eigen::MatrixXd pts(n, d);
  Eigen::Index row = 0;
  for (const auto& demo : set.demos) {
    for (const auto& s : demo.samples()) {
      pts(row, 0) = s.t;
      pts.row(row).tail(d - 1) = s.q.transpose();
      ++row;
    }
  }
  return merge_duplicates(Dataset(std::move(pts)));
}

/// trim_idle -> align_to_reference -> pool -> select_model.
inline LearnOutcome learn_movement_detailed(std::span<const Demonstration> demos, const std::string& name,
                                            const LearnConfig& config = {}) {
  if (demos.empty()) throw InvalidArgument("no demonstrations found");
  if (name.empty()) throw InvalidArgument("movement name must be non-empty");
  std::vector<Demonstration> prepared;
  prepared.reserve(demos.size());
  for (const auto& d : demos) prepared.push_back(config.trim_idle ? trim_idle(d, config.trim) : d);

  LearnOutcome out;
  out.aligned = align_to_reference(prepared);
  const Dataset data = pool_demonstrations(out.aligned);
  SelectOptions select = config.select;
  // Small demonstrations cannot support the full default order range.
  if (select.k_max >= data.size()) select.k_max = static_cast<int>(data.size()) - 1;
  if (select.k_min > select.k_max) throw InvalidArgument("too few samples for the requested K range");
  out.selection = select_model(data, select, config.seed);

  const auto& ref = out.aligned.reference();
  out.movement.name = name;
  out.movement.model = out.selection.model;
  out.movement.duration = ref.duration();
  out.movement.dim = ref.dim();
  out.movement.default_rate =
      config.default_rate.value_or(static_cast<double>(ref.size() - 1) / ref.duration());
  out.movement.validate();
  return out;
}

inline LearnedMovement learn_movement(std::span<const Demonstration> demos, const std::string& name,
                                      const LearnConfig& config = {}) {
  return learn_movement_detailed(demos, name, config).movement;
}

/// Number of playback samples for a movement at `rate` samples per second
/// of model time, endpoints included.
inline std::size_t playback_sample_count(double duration, double rate) {
  return static_cast<std::size_t>(std::max<long long>(2, std::llround(duration * rate) + 1));
}

/// Samples regression means on a uniform model-time grid over
/// [0, duration] and emits them at model time / speed_factor.
inline Demonstration generate_trajectory(const LearnedMovement& movement, double speed_factor, double rate) {
  if (!(speed_factor > 0.0) || !std::isfinite(speed_factor)) throw InvalidArgument("speed_factor must be positive");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("rate must be positive");
  const GmrRegressor gmr(movement.model);
  const std::size_t n = playback_sample_count(movement.duration, rate);
  std::vector<TimedSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = i + 1 == n ? movement.duration
                                : movement.duration * static_cast<double>(i) / static_cast<double>(n - 1);
    samples.push_back({u / speed_factor, gmr.mean(u)});
  }
  return Demonstration(movement.name, std::move(samples), DemoSource::synthetic);
}

// ---------------------------------------------------------------------------
// Movement files

inline constexpr const char* kMovementFormatVersion = "1";

inline nlohmann::json movement_to_json(const LearnedMovement& m) {
  return {{"format_version", kMovementFormatVersion},
          {"name", m.name},
          {"dim", m.dim},
          {"duration_s", m.duration},
          {"default_rate_hz", m.default_rate},
          {"model", gmm_to_json(m.model)}};
}

inline LearnedMovement movement_from_json(const nlohmann::json& j) {
  LearnedMovement m;
  try {
    if (!j.is_object()) throw FormatError("movement file must hold a JSON object");
    const auto version = j.at("format_version").get<std::string>();
    if (version != kMovementFormatVersion)
      throw FormatError("unsupported movement format_version '" + version + "' (reader supports '" +
                        kMovementFormatVersion + "')");
    m.name = j.at("name").get<std::string>();
    m.dim = j.at("dim").get<Eigen::Index>();
    m.duration = j.at("duration_s").get<double>();
    m.default_rate = j.at("default_rate_hz").get<double>();
    m.model = gmm_from_json(j.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed movement: ") + e.what());
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid movement: ") + e.what());
  }
  return m;
}

inline void save_movement(const LearnedMovement& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << movement_to_json(m).dump(2) << '\n';
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline LearnedMovement load_movement(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return movement_from_json(j);
}

/// Named movements. Concurrent readers, exclusive writers.
class MovementStore {
 public:
  void put(LearnedMovement m) {
    m.validate();
    std::unique_lock lock(mutex_);
    movements_.insert_or_assign(m.name, std::move(m));
  }

  std::optional<LearnedMovement> get(const std::string& name) const {
    std::shared_lock lock(mutex_);
    const auto it = movements_.find(name);
    if (it == movements_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& name) const {
    std::shared_lock lock(mutex_);
    return movements_.contains(name);
  }

  std::vector<std::string> names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, m] : movements_) out.push_back(name);
    return out;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, LearnedMovement> movements_;
};

}  // namespace butler
