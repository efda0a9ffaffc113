#pragma once

// Full-covariance Gaussian mixture models over (time, joints) data:
// k-means++ / Lloyd initialization, EM refinement and BIC order selection.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "butler/error.hpp"
#include "butler/random.hpp"

namespace butler {

/// One data point (t, q0, ..., q{D-1}).
using DataPoint = Eigen::VectorXd;

/// Points stored row-wise with a positive weight per row. A weight of w is
/// equivalent to the row appearing w times.
struct Dataset {
  Eigen::MatrixXd points;  // N x d
  Eigen::VectorXd weights;  // N

  Dataset() = default;
  explicit Dataset(Eigen::MatrixXd pts)
      : points(std::move(pts)), weights(Eigen::VectorXd::Ones(points.rows())) {}
  Dataset(Eigen::MatrixXd pts, Eigen::VectorXd w) : points(std::move(pts)), weights(std::move(w)) {
    if (weights.size() != points.rows()) throw InvalidArgument("one weight per point required");
    if ((weights.array() <= 0.0).any()) throw InvalidArgument("weights must be positive");
  }

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  double total_weight() const { return weights.sum(); }
};

namespace detail {

inline bool row_less(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(b, j) < m(a, j)) return false;
  }
  return false;
}

inline bool row_equal(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  return (m.row(a).array() == m.row(b).array()).all();
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace detail

/// Number of pairwise-distinct rows.
inline Eigen::Index count_distinct(const Eigen::MatrixXd& points) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return detail::row_less(points, a, b); });
  Eigen::Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (!detail::row_equal(points, idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

/// Collapses exactly repeated rows into one weighted row, keeping rows in
/// order of first occurrence.
inline Dataset merge_duplicates(const Dataset& data) {
  const auto n = data.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return detail::row_less(data.points, a, b);
  });
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const bool same = i > 0 && detail::row_equal(data.points, idx[i - 1], idx[i]);
    owner[static_cast<std::size_t>(idx[i])] = same ? owner[static_cast<std::size_t>(idx[i - 1])] : idx[i];
  }
  std::vector<Eigen::Index> keep;
  std::vector<double> w;
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto o = owner[static_cast<std::size_t>(i)];
    if (o == i) {
      slot[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(keep.size());
      keep.push_back(i);
      w.push_back(data.weights[i]);
    } else {
      w[static_cast<std::size_t>(slot[static_cast<std::size_t>(o)])] += data.weights[i];
    }
  }
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(keep.size()), data.dim());
  for (std::size_t i = 0; i < keep.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = data.points.row(keep[i]);
  return Dataset(std::move(pts), Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
}

/// K weighted Gaussians in R^d.
struct GmmModel {
  Eigen::VectorXd priors;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  Eigen::Index k() const { return priors.size(); }
  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }

  /// Throws InvalidArgument unless priors are positive and sum to one and
  /// every covariance is symmetric positive definite.
  void validate() const {
    if (k() < 1) throw InvalidArgument("GMM needs at least one component");
    if (static_cast<Eigen::Index>(means.size()) != k() ||
        static_cast<Eigen::Index>(covariances.size()) != k())
      throw InvalidArgument("GMM component arrays disagree in length");
    if ((priors.array() <= 0.0).any() || !priors.allFinite())
      throw InvalidArgument("GMM priors must be positive");
    if (std::abs(priors.sum() - 1.0) > 1e-12) throw InvalidArgument("GMM priors must sum to 1");
    const auto d = dim();
    if (d < 1) throw InvalidArgument("GMM dimension must be >= 1");
    for (Eigen::Index c = 0; c < k(); ++c) {
      const auto& m = means[static_cast<std::size_t>(c)];
      const auto& s = covariances[static_cast<std::size_t>(c)];
      if (m.size() != d || s.rows() != d || s.cols() != d)
        throw InvalidArgument("GMM component has wrong dimension");
      if (!m.allFinite() || !s.allFinite()) throw InvalidArgument("GMM parameters must be finite");
      if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()))
        throw InvalidArgument("GMM covariance must be symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() != Eigen::Success) throw InvalidArgument("GMM covariance must be positive definite");
    }
  }
};

/// Cached Cholesky factors for repeated density evaluation.
class GmmEvaluator {
 public:
  explicit GmmEvaluator(const GmmModel& model) : model_(model) {
    const auto d = static_cast<double>(model.dim());
    for (std::size_t c = 0; c < model.covariances.size(); ++c) {
      Eigen::LLT<Eigen::MatrixXd> llt(model.covariances[c]);
      if (llt.info() != Eigen::Success)
        throw DegenerateComponent("covariance " + std::to_string(c) + " is not positive definite");
      const Eigen::MatrixXd l = llt.matrixL();
      const double logdet = 2.0 * l.diagonal().array().log().sum();
      if (!std::isfinite(logdet))
        throw DegenerateComponent("covariance " + std::to_string(c) + " is singular");
      log_norm_.push_back(std::log(model.priors[static_cast<Eigen::Index>(c)]) -
                          0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet));
      llt_.push_back(std::move(llt));
    }
  }

  /// N x K matrix of log(pi_k) + log N(x_n; mu_k, Sigma_k).
  Eigen::MatrixXd weighted_log_densities(const Eigen::MatrixXd& points) const {
    const auto n = points.rows();
    Eigen::MatrixXd out(n, model_.k());
    for (Eigen::Index c = 0; c < model_.k(); ++c) {
      const auto cu = static_cast<std::size_t>(c);
      Eigen::MatrixXd centered = (points.rowwise() - model_.means[cu].transpose()).transpose();
      llt_[cu].matrixL().solveInPlace(centered);
      out.col(c) = (log_norm_[cu] - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
    }
    return out;
  }

  /// Per-point log mixture density.
  Eigen::VectorXd log_density(const Eigen::MatrixXd& points) const {
    const Eigen::MatrixXd lp = weighted_log_densities(points);
    Eigen::VectorXd out(lp.rows());
    for (Eigen::Index i = 0; i < lp.rows(); ++i) out[i] = detail::log_sum_exp(lp.row(i).transpose());
    return out;
  }

 private:
  const GmmModel& model_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::vector<double> log_norm_;
};

/// Weighted log-likelihood of the data under the model.
inline double log_likelihood(const GmmModel& model, const Dataset& data) {
  return GmmEvaluator(model).log_density(data.points).dot(data.weights);
}

/// Posterior component probabilities, one row per point.
inline Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd lp = GmmEvaluator(model).weighted_log_densities(points);
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    const double lse = detail::log_sum_exp(lp.row(i).transpose());
    lp.row(i) = (lp.row(i).array() - lse).exp().matrix();
  }
  return lp;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<Eigen::VectorXd> centroids;
  std::vector<int> assignments;
  int iterations = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::VectorXd weighted_mean(const Dataset& data, const std::vector<int>& assign, int cluster) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(data.dim());
  double w = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (assign[static_cast<std::size_t>(i)] != cluster) continue;
    sum += data.weights[i] * data.points.row(i).transpose();
    w += data.weights[i];
  }
  return sum / w;
}

inline int nearest(const std::vector<Eigen::VectorXd>& centroids, const Eigen::VectorXd& x, double* dist2 = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (centroids[c] - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations. Seeding draws each new
/// centre with probability proportional to weight times squared distance to
/// the closest chosen centre. Clusters that run empty are re-seeded with the
/// point farthest from its centroid.
inline KMeansResult kmeans_init(const Dataset& data, int k, std::uint64_t seed, int max_iter = 100) {
  if (k < 1) throw InvalidArgument("K must be >= 1");
  const auto n = data.size();
  if (n < 1) throw InvalidArgument("k-means needs data");
  const auto distinct = count_distinct(data.points);
  if (distinct < k)
    throw TooFewDistinctPoints(std::to_string(distinct) + " distinct points for K=" + std::to_string(k));

  Rng rng(seed);
  KMeansResult res;
  res.seed = seed;

  auto draw = [&](const Eigen::VectorXd& mass) {
    const double total = mass.sum();
    const double target = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index last_positive = 0;
    for (Eigen::Index i = 0; i < mass.size(); ++i) {
      if (mass[i] <= 0.0) continue;
      last_positive = i;
      acc += mass[i];
      if (acc > target) return i;
    }
    return last_positive;
  };

  res.centroids.push_back(data.points.row(draw(data.weights)).transpose());
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (data.points.row(i).transpose() - res.centroids[0]).squaredNorm();
  while (static_cast<int>(res.centroids.size()) < k) {
    const Eigen::VectorXd mass = data.weights.cwiseProduct(d2);
    const auto pick = draw(mass);
    res.centroids.push_back(data.points.row(pick).transpose());
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (data.points.row(i).transpose() - res.centroids.back()).squaredNorm());
  }

  res.assignments.assign(static_cast<std::size_t>(n), -1);
  auto assign_all = [&] {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = detail::nearest(res.centroids, data.points.row(i).transpose());
      if (c != res.assignments[static_cast<std::size_t>(i)]) {
        res.assignments[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    return changed;
  };

  // Moves the farthest point (from its own centroid) into each empty cluster.
  auto repair_empty = [&] {
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int a : res.assignments) ++count[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = res.assignments[static_cast<std::size_t>(i)];
        if (count[static_cast<std::size_t>(a)] < 2) continue;
        const double d = (data.points.row(i).transpose() - res.centroids[static_cast<std::size_t>(a)]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      --count[static_cast<std::size_t>(res.assignments[static_cast<std::size_t>(far)])];
      res.assignments[static_cast<std::size_t>(far)] = c;
      count[static_cast<std::size_t>(c)] = 1;
      res.centroids[static_cast<std::size_t>(c)] = data.points.row(far).transpose();
    }
  };

  assign_all();
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    repair_empty();
    for (int c = 0; c < k; ++c) res.centroids[static_cast<std::size_t>(c)] = detail::weighted_mean(data, res.assignments, c);
    if (!assign_all()) break;
  }
  res.iterations = std::min(res.iterations, max_iter);
  repair_empty();
  for (int c = 0; c < k; ++c) res.centroids[static_cast<std::size_t>(c)] = detail::weighted_mean(data, res.assignments, c);
  return res;
}

// ---------------------------------------------------------------------------
// EM

struct EmOptions {
  double cov_regularization = 1e-6;
  double tol = 1e-8;  // relative log-likelihood change
  int max_iter = 200;
};

struct FitReport {
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct GmmFit {
  GmmModel model;
  FitReport report;
};

namespace detail {

/// Weighted M-step; `resp` is N x K.
inline GmmModel m_step(const Dataset& data, const Eigen::MatrixXd& resp, double reg) {
  const auto k = resp.cols();
  const double total = data.total_weight();
  GmmModel m;
  m.priors.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::VectorXd w = resp.col(c).cwiseProduct(data.weights);
    const double nk = w.sum();
    if (!(nk > 0.0) || !std::isfinite(nk))
      throw DegenerateComponent("component " + std::to_string(c) + " has no responsibility mass");
    const Eigen::VectorXd mu = (data.points.transpose() * w) / nk;
    const Eigen::MatrixXd centered = data.points.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * w.asDiagonal() * centered) / nk;
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov.diagonal().array() += reg;
    m.priors[c] = nk / total;
    m.means.push_back(mu);
    m.covariances.push_back(std::move(cov));
  }
  m.priors /= m.priors.sum();
  return m;
}

}  // namespace detail

/// Expectation-maximization for a full-covariance mixture, started from a
/// k-means partition (proportions, centroids, within-cluster covariances).
/// The trace holds the log-likelihood of the initial parameters followed by
/// the value after each EM iteration.
inline GmmFit em_fit(const Dataset& data, int k, const KMeansResult& init, const EmOptions& opts = {}) {
  if (k < 1) throw InvalidArgument("K must be >= 1");
  if (data.size() <= k) throw InvalidArgument("EM needs more points than components");
  if (opts.cov_regularization < 0.0) throw InvalidArgument("cov_regularization must be >= 0");
  if (static_cast<int>(init.centroids.size()) != k ||
      static_cast<Eigen::Index>(init.assignments.size()) != data.size())
    throw InvalidArgument("k-means initialization does not match data");

  // Initial parameters from the hard partition.
  Eigen::MatrixXd hard = Eigen::MatrixXd::Zero(data.size(), k);
  for (Eigen::Index i = 0; i < data.size(); ++i) hard(i, init.assignments[static_cast<std::size_t>(i)]) = 1.0;
  GmmFit fit;
  fit.report.seed = init.seed;
  fit.model = detail::m_step(data, hard, opts.cov_regularization);
  for (int c = 0; c < k; ++c) {
    // Centroids seed the means; covariances are taken about the centroid.
    const auto cu = static_cast<std::size_t>(c);
    const Eigen::VectorXd mu = init.centroids[cu];
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(data.dim(), data.dim());
    double nk = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (init.assignments[static_cast<std::size_t>(i)] != c) continue;
      const Eigen::VectorXd x = data.points.row(i).transpose() - mu;
      cov += data.weights[i] * x * x.transpose();
      nk += data.weights[i];
    }
    cov /= nk;
    cov.diagonal().array() += opts.cov_regularization;
    fit.model.means[cu] = mu;
    fit.model.covariances[cu] = cov;
  }

  auto e_step = [&](const GmmModel& model, Eigen::MatrixXd& resp) {
    resp = GmmEvaluator(model).weighted_log_densities(data.points);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
      const double lse = detail::log_sum_exp(resp.row(i).transpose());
      resp.row(i) = (resp.row(i).array() - lse).exp().matrix();
      ll += data.weights[i] * lse;
    }
    return ll;
  };

  Eigen::MatrixXd resp;
  double ll = e_step(fit.model, resp);
  fit.report.log_likelihood_trace.push_back(ll);
  for (int it = 1; it <= opts.max_iter; ++it) {
    GmmModel next = detail::m_step(data, resp, opts.cov_regularization);
    Eigen::MatrixXd next_resp;
    const double next_ll = e_step(next, next_resp);
    fit.report.iterations = it;
    fit.report.log_likelihood_trace.push_back(next_ll);
    fit.model = std::move(next);
    resp = std::move(next_resp);
    const double change = std::abs(next_ll - ll) / std::max(std::abs(ll), 1e-300);
    ll = next_ll;
    if (change < opts.tol) {
      fit.report.converged = true;
      break;
    }
  }
  try {
    fit.model.validate();
  } catch (const InvalidArgument& e) {
    throw DegenerateComponent(std::string("fitted model invalid: ") + e.what());
  }
  return fit;
}

// ---------------------------------------------------------------------------
// BIC

/// Free parameters of a full-covariance mixture: (K-1) + K d + K d(d+1)/2.
constexpr long long gmm_parameter_count(long long k, long long d) {
  return (k - 1) + k * d + k * d * (d + 1) / 2;
}

/// -2 ln L + p ln N; lower is better. N is the total point weight.
inline double bic_score(const GmmModel& model, const Dataset& data) {
  if (data.size() < 1) throw InvalidArgument("BIC needs at least one point");
  const double ll = log_likelihood(model, data);
  return -2.0 * ll + static_cast<double>(gmm_parameter_count(model.k(), model.dim())) *
                         std::log(data.total_weight());
}

struct BicEntry {
  int k = 0;
  double bic = std::numeric_limits<double>::infinity();
  double log_likelihood = -std::numeric_limits<double>::infinity();
  long long parameters = 0;
  bool ok = false;
  std::string error;
};

struct SelectOptions {
  int k_min = 1;
  int k_max = 8;
  int restarts = 3;
  int kmeans_max_iter = 100;
  EmOptions em;
};

struct ModelSelection {
  GmmModel model;
  FitReport report;
  std::vector<BicEntry> table;
  int selected_k = 0;
};

/// Index of the minimal-BIC entry; exact ties go to the smaller K.
inline std::optional<std::size_t> choose_order(const std::vector<BicEntry>& table) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!table[i].ok) continue;
    if (!best || table[i].bic < table[*best].bic ||
        (table[i].bic == table[*best].bic && table[i].k < table[*best].k))
      best = i;
  }
  return best;
}

/// Fits every K in [k_min, k_max] with `restarts` seeded k-means + EM runs
/// each, keeps the best log-likelihood per K and returns the minimal-BIC
/// model. Restart r of order K uses seed derive_seed(seed, K, r).
inline ModelSelection select_model(const Dataset& data, const SelectOptions& opts, std::uint64_t seed) {
  if (opts.k_min < 1 || opts.k_max < opts.k_min) throw InvalidArgument("invalid K range");
  if (opts.restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (opts.k_max >= data.size()) throw InvalidArgument("max K must be below the number of points");

  ModelSelection sel;
  std::vector<std::optional<GmmFit>> best(static_cast<std::size_t>(opts.k_max - opts.k_min + 1));
  std::string last_error;
  for (int k = opts.k_min; k <= opts.k_max; ++k) {
    auto& slot = best[static_cast<std::size_t>(k - opts.k_min)];
    BicEntry entry;
    entry.k = k;
    entry.parameters = gmm_parameter_count(k, data.dim());
    for (int r = 0; r < opts.restarts; ++r) {
      const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r));
      try {
        auto init = kmeans_init(data, k, s, opts.kmeans_max_iter);
        auto fit = em_fit(data, k, init, opts.em);
        const double ll = fit.report.log_likelihood_trace.back();
        if (!slot || ll > slot->report.log_likelihood_trace.back()) slot = std::move(fit);
      } catch (const Error& e) {
        last_error = e.what();
        entry.error = e.what();
      }
    }
    if (slot) {
      entry.ok = true;
      entry.error.clear();
      entry.log_likelihood = log_likelihood(slot->model, data);
      entry.bic = bic_score(slot->model, data);
    }
    sel.table.push_back(entry);
  }
  const auto pick = choose_order(sel.table);
  if (!pick) throw DegenerateComponent("every candidate fit failed: " + last_error);
  auto& chosen = *best[*pick];
  sel.model = std::move(chosen.model);
  sel.report = std::move(chosen.report);
  sel.selected_k = sel.table[*pick].k;
  return sel;
}

// ---------------------------------------------------------------------------
// JSON

inline constexpr const char* kGmmFormatVersion = "1";

inline nlohmann::json gmm_to_json(const GmmModel& m) {
  nlohmann::json j;
  j["format_version"] = kGmmFormatVersion;
  j["k"] = m.k();
  j["dim"] = m.dim();
  j["priors"] = std::vector<double>(m.priors.data(), m.priors.data() + m.priors.size());
  auto& means = j["means"] = nlohmann::json::array();
  auto& covs = j["covariances"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < m.k(); ++c) {
    const auto& mu = m.means[static_cast<std::size_t>(c)];
    const auto& s = m.covariances[static_cast<std::size_t>(c)];
    means.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(s.size()));
    for (Eigen::Index r = 0; r < s.rows(); ++r)
      for (Eigen::Index col = 0; col < s.cols(); ++col) flat.push_back(s(r, col));
    covs.push_back(std::move(flat));
  }
  return j;
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
  GmmModel m;
  try {
    const auto version = j.at("format_version").get<std::string>();
    if (version != kGmmFormatVersion)
      throw FormatError("unsupported GMM format_version '" + version + "' (reader supports '" +
                        kGmmFormatVersion + "')");
    const auto k = j.at("k").get<long long>();
    const auto d = j.at("dim").get<long long>();
    if (k < 1 || d < 1) throw FormatError("GMM k and dim must be >= 1");
    const auto priors = j.at("priors").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto covs = j.at("covariances").get<std::vector<std::vector<double>>>();
    if (static_cast<long long>(priors.size()) != k || static_cast<long long>(means.size()) != k ||
        static_cast<long long>(covs.size()) != k)
      throw FormatError("GMM arrays must have k entries");
    m.priors = Eigen::Map<const Eigen::VectorXd>(priors.data(), k);
    for (long long c = 0; c < k; ++c) {
      const auto& mu = means[static_cast<std::size_t>(c)];
      const auto& s = covs[static_cast<std::size_t>(c)];
      if (static_cast<long long>(mu.size()) != d || static_cast<long long>(s.size()) != d * d)
        throw FormatError("GMM component " + std::to_string(c) + " has wrong size");
      m.means.emplace_back(Eigen::Map<const Eigen::VectorXd>(mu.data(), d));
      m.covariances.emplace_back(
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(s.data(), d, d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed GMM: ") + e.what());
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid GMM: ") + e.what());
  }
  return m;
}

}  // namespace butler
