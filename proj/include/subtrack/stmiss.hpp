// Copyright 2026 The Subtrack Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Subspace tracking with missing entries: mini-batch projected least squares
// followed by r-SVD, an optional change-detection phase, the per-batch PCA
// baseline and closed-form error bound calculators.
//
// Batch numbering in records is 1-based (j = 1 is the initialization batch).

#ifndef SUBTRACK_STMISS_HPP_
#define SUBTRACK_STMISS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "subtrack/error.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

enum class ThresholdMode { kOracle, kEstimated };

struct DetectionConfig {
  Index k_updates = 6;
  double lambda_plus = 1.0;  // used in oracle mode
  double eps = 0.01;
  ThresholdMode mode = ThresholdMode::kOracle;
};

struct TrackerConfig {
  Index alpha = 60;
  Index r = 30;
  double eps_nolev = 0.0;
  double delta_tv = 0.0;  // only used to fill the bound column
  bool refine = true;
  std::optional<DetectionConfig> detection;
};

enum class Phase { kUpdate, kDetect };

inline const char* phase_name(Phase p) { return p == Phase::kUpdate ? "update" : "detect"; }

struct BatchRecord {
  Index j = 0;
  Index t_start = 0;
  double dist = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double mean_recon_err = std::numeric_limits<double>::quiet_NaN();
  double refined_recon_err = std::numeric_limits<double>::quiet_NaN();
  Phase phase = Phase::kUpdate;
  bool detected = false;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  Index fallback_columns = 0;
  double elapsed_ms = 0.0;
};

// Optional ground truth for one batch, used only for metrics.
struct BatchTruth {
  const Matrix* P = nullptr;
  const Matrix* Ltilde = nullptr;
};

struct BatchOutput {
  Matrix Lhat;
  Matrix Lhat_refined;  // empty unless refinement is enabled
};

// Closed-form decay bound for the slow-change model.
inline double theoretical_bound(Index j, double delta_tv, double eps_nolev) {
  double geo = 0.0;
  double p = 1.0;
  for (Index i = 1; i < j; ++i) {
    p *= 0.3;
    geo += p;
  }
  return std::max(0.1 * std::pow(0.3, static_cast<double>(j - 1)) + delta_tv * geo, eps_nolev);
}

// Looser variant with the geometric sum replaced by 0.5.
inline double theoretical_bound_loose(Index j, double delta_tv, double eps_nolev) {
  return std::max(0.1 * std::pow(0.3, static_cast<double>(j - 1)) + 0.5 * delta_tv, eps_nolev);
}

// eps_1 = max(eps, 0.025), eps_j = max(eps, 0.3 (eps_{j-1} + delta_tv)).
inline double recursion_bound(Index j, double delta_tv, double eps) {
  double e = std::max(eps, 0.25 * 0.1);
  for (Index i = 2; i <= j; ++i) e = std::max(eps, 0.25 * 1.2 * (e + delta_tv));
  return e;
}

inline double simple_pca_bound(double eps_nolev) { return std::max(0.1 * 0.25, eps_nolev); }

// Bound between abrupt changes for the piecewise constant model; j_change is
// the first batch after the change.
inline double piecewise_bound(Index j, Index j_change, double eps) {
  if (j == j_change) return (0.2 + 2.0 * eps) * 0.25 + eps;
  return (0.2 + 2.0 * eps) * std::pow(0.3, static_cast<double>(j - j_change - 1)) + eps;
}

inline Index updates_to_converge(double eps) {
  return static_cast<Index>(std::ceil(std::log(1.0 / eps) / std::log(1.0 / 0.3))) + 2;
}

inline double recommended_alpha(double C, double f, Index r, Index n) {
  return C * f * f * static_cast<double>(r) * std::log(static_cast<double>(n));
}

struct SddnResult {
  bool feasible = false;
  double alpha_star = 0.0;
};

// PCA in sparse data-dependent noise: checks 7 sqrt(b) q f + ratio < 0.4 eps
// and returns the batch size requirement with the constant C supplied.
inline SddnResult pca_sddn_bound(double q, double b, double f, double noise_ratio, double eps,
                                 Index r, Index n, double C = 1.0) {
  if (!(q >= 0.0 && q <= 3.0)) throw ConfigError("pca_sddn_bound needs 0 <= q <= 3");
  if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("pca_sddn_bound needs b in [0,1]");
  if (!(f >= 1.0)) throw ConfigError("pca_sddn_bound needs f >= 1");
  SddnResult out;
  out.feasible = 7.0 * std::sqrt(b) * q * f + noise_ratio < 0.4 * eps;
  const double rlogn = static_cast<double>(r) * std::log(static_cast<double>(n));
  out.alpha_star =
      C * std::max(q * q * f * f / (eps * eps) * rlogn, noise_ratio * f / (eps * eps) * rlogn);
  return out;
}

inline Matrix zero_fill(const Matrix& Y, const std::vector<IndexSet>& missing) {
  Matrix Z = Y;
  for (Index t = 0; t < Z.cols(); ++t)
    for (Index i : missing[static_cast<std::size_t>(t)]) Z(i, t) = 0.0;
  return Z;
}

inline Matrix init_first_batch(const Batch& batch, Index r) {
  if (batch.Y.cols() < r) throw DimensionMismatch("init_first_batch needs alpha >= r");
  return r_svd(zero_fill(batch.Y, batch.missing), r).basis;
}

// Per-column projected LS fill. Columns whose normal matrix is ill-conditioned
// fall back to zero fill; the count is returned through `fallbacks`.
inline Matrix projected_ls_fill(const Matrix& P, const Matrix& Y,
                                const std::vector<IndexSet>& missing, Index* fallbacks) {
  if (P.rows() != Y.rows()) throw DimensionMismatch("projected_ls_fill: row counts differ");
  if (static_cast<Index>(missing.size()) != Y.cols())
    throw DimensionMismatch("projected_ls_fill: one missing set per column");
  Matrix L(Y.rows(), Y.cols());
  Index count = 0;
  for (Index t = 0; t < Y.cols(); ++t) {
    const IndexSet& m = missing[static_cast<std::size_t>(t)];
    try {
      L.col(t) = masked_projected_ls(P, Y.col(t), m);
    } catch (const IllConditioned& e) {
      spdlog::debug("column {} falls back to zero fill: {}", t, e.what());
      L.col(t) = Y.col(t);
      for (Index i : m) L(i, t) = 0.0;
      ++count;
    }
  }
  if (fallbacks) *fallbacks += count;
  return L;
}

struct DetectionResult {
  bool detected = false;
  double statistic = 0.0;
};

// Per-sample statistic (1/alpha) lambda_max(Psi L L^T Psi) against 2 eps^2 lambda+.
inline DetectionResult detect_change(const Matrix& Phat_prev, const Matrix& Lhat, Index alpha,
                                     double eps, double lambda_plus) {
  if (Phat_prev.rows() != Lhat.rows()) throw DimensionMismatch("detect_change: row counts differ");
  if (!(lambda_plus > 0.0)) throw ConfigError("detect_change needs lambda+ > 0");
  const double s = spectral_norm(project_out(Phat_prev, Lhat));
  DetectionResult out;
  out.statistic = s * s / static_cast<double>(alpha);
  out.detected = out.statistic >= 2.0 * eps * eps * lambda_plus;
  return out;
}

namespace detail {

inline double mean_relative_error(const Matrix& Lhat, const Matrix& Ltilde) {
  double sum = 0.0;
  for (Index t = 0; t < Lhat.cols(); ++t) {
    const double den = Ltilde.col(t).norm();
    sum += den > 0.0 ? (Lhat.col(t) - Ltilde.col(t)).norm() / den : (Lhat.col(t)).norm();
  }
  return sum / static_cast<double>(Lhat.cols());
}

}  // namespace detail

class StMissTracker {
 public:
  explicit StMissTracker(TrackerConfig config) : config_(std::move(config)) {
    if (config_.alpha < config_.r || config_.r < 1) throw ConfigError("tracker needs alpha >= r >= 1");
    if (config_.detection && config_.detection->k_updates < 2)
      throw ConfigError("k_updates must be at least 2");
  }

  const TrackerConfig& config() const { return config_; }
  const Matrix& current() const { return P_; }
  Phase phase() const { return phase_; }
  Index update_counter() const { return k_; }
  Index batch_index() const { return j_; }
  const std::vector<BatchRecord>& history() const { return history_; }
  // 1-based batches at which a change was flagged.
  const std::vector<Index>& detections() const { return detections_; }
  double lambda_plus_estimate() const { return lambda_est_; }

  BatchOutput init(const Batch& batch, const BatchTruth& truth = {}) {
    const auto start = std::chrono::steady_clock::now();
    check_batch(batch);
    BatchOutput out;
    out.Lhat = zero_fill(batch.Y, batch.missing);
    P_ = r_svd(out.Lhat, config_.r).basis;
    j_ = 1;
    k_ = 2;
    phase_ = Phase::kUpdate;
    prev_Y_ = out.Lhat;
    BatchRecord rec = make_record(batch);
    if (config_.refine) out.Lhat_refined = projected_ls_fill(P_, batch.Y, batch.missing, &rec.fallback_columns);
    finish(rec, out, truth, start);
    return out;
  }

  BatchOutput step(const Batch& batch, const BatchTruth& truth = {}) {
    if (j_ == 0) throw ConfigError("tracker used before init");
    const auto start = std::chrono::steady_clock::now();
    check_batch(batch);
    ++j_;
    BatchRecord rec = make_record(batch);
    BatchOutput out;
    const Matrix P_prev = P_;
    const bool detecting = config_.detection.has_value();
    if (detecting && k_ == 1) {
      P_ = r_svd(prev_Y_, config_.r).basis;
      k_ = 2;
      out.Lhat = projected_ls_fill(P_, batch.Y, batch.missing, &rec.fallback_columns);
    } else {
      out.Lhat = projected_ls_fill(P_prev, batch.Y, batch.missing, &rec.fallback_columns);
      if (detecting && phase_ == Phase::kDetect) {
        const DetectionConfig& dc = *config_.detection;
        const double lam = dc.mode == ThresholdMode::kOracle ? dc.lambda_plus : lambda_est_;
        const DetectionResult det = detect_change(P_prev, out.Lhat, config_.alpha, dc.eps, lam);
        rec.statistic = det.statistic;
        if (det.detected) {
          rec.detected = true;
          detections_.push_back(j_);
          phase_ = Phase::kUpdate;
          k_ = 1;
        } else {
          P_ = r_svd(out.Lhat, config_.r).basis;
        }
      } else {
        P_ = r_svd(out.Lhat, config_.r).basis;
        if (detecting) {
          ++k_;
          if (k_ >= config_.detection->k_updates) {
            phase_ = Phase::kDetect;
            const double s = spectral_norm(out.Lhat);
            lambda_est_ = s * s / static_cast<double>(config_.alpha);
          }
        }
      }
    }
    if (config_.refine)
      out.Lhat_refined = projected_ls_fill(P_, batch.Y, batch.missing, &rec.fallback_columns);
    prev_Y_ = zero_fill(batch.Y, batch.missing);
    finish(rec, out, truth, start);
    return out;
  }

 private:
  void check_batch(const Batch& batch) const {
    if (batch.Y.cols() != config_.alpha) throw DimensionMismatch("batch width differs from alpha");
    if (static_cast<Index>(batch.missing.size()) != batch.Y.cols())
      throw DimensionMismatch("one missing set per column");
    if (j_ > 0 && batch.Y.rows() != P_.rows()) throw DimensionMismatch("batch row count changed");
  }

  BatchRecord make_record(const Batch& batch) const {
    BatchRecord rec;
    rec.t_start = batch.t_start;
    return rec;
  }

  void finish(BatchRecord& rec, const BatchOutput& out, const BatchTruth& truth,
              std::chrono::steady_clock::time_point start) {
    rec.j = j_;
    rec.phase = phase_;
    rec.bound = theoretical_bound(j_, config_.delta_tv, config_.eps_nolev);
    if (truth.P) rec.dist = dist(P_, *truth.P);
    if (truth.Ltilde) {
      rec.mean_recon_err = detail::mean_relative_error(out.Lhat, *truth.Ltilde);
      if (out.Lhat_refined.size() > 0)
        rec.refined_recon_err = detail::mean_relative_error(out.Lhat_refined, *truth.Ltilde);
    }
    if (rec.fallback_columns > 0)
      spdlog::warn("batch {}: {} columns fell back to zero fill", j_, rec.fallback_columns);
    rec.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    history_.push_back(rec);
  }

  TrackerConfig config_;
  Matrix P_;
  Matrix prev_Y_;
  Index j_ = 0;
  Index k_ = 2;
  Phase phase_ = Phase::kUpdate;
  double lambda_est_ = 0.0;
  std::vector<BatchRecord> history_;
  std::vector<Index> detections_;
};

inline BatchTruth truth_for(const Dataset& ds, Index j, Matrix* scratch) {
  *scratch = ds.Ltilde.middleCols(j * ds.config.alpha, ds.config.alpha);
  return BatchTruth{&ds.P[static_cast<std::size_t>(j)], scratch};
}

// Runs the tracker over every batch of a generated dataset. Batch size and
// rank are taken from the dataset.
inline StMissTracker track_dataset(const Dataset& ds, TrackerConfig config) {
  config.alpha = ds.config.alpha;
  config.r = ds.config.r;
  StMissTracker tracker(config);
  Matrix lt;
  for (Index j = 0; j < ds.num_batches(); ++j) {
    const Batch b = make_batch(ds, j);
    const BatchTruth truth = truth_for(ds, j, &lt);
    if (j == 0)
      tracker.init(b, truth);
    else
      tracker.step(b, truth);
  }
  return tracker;
}

inline std::vector<Matrix> simple_pca_baseline(const std::vector<Batch>& batches, Index r) {
  std::vector<Matrix> out;
  out.reserve(batches.size());
  for (const Batch& b : batches) out.push_back(init_first_batch(b, r));
  return out;
}

// Per-batch distance of the baseline to the dataset's ground truth.
inline std::vector<double> simple_pca_errors(const Dataset& ds) {
  std::vector<double> out;
  for (Index j = 0; j < ds.num_batches(); ++j)
    out.push_back(dist(init_first_batch(make_batch(ds, j), ds.config.r),
                       ds.P[static_cast<std::size_t>(j)]));
  return out;
}

inline void write_tracker_csv(std::ostream& os, const std::vector<BatchRecord>& history) {
  os << "j,t_start,dist,bound,mean_recon_err,refined_recon_err,phase,detected,elapsed_ms\n";
  os << std::setprecision(17);
  for (const BatchRecord& r : history) {
    os << r.j << ',' << r.t_start << ',' << r.dist << ',' << r.bound << ',' << r.mean_recon_err
       << ',' << r.refined_recon_err << ',' << phase_name(r.phase) << ',' << (r.detected ? 1 : 0)
       << ',' << r.elapsed_ms << '\n';
  }
}

}  // namespace subtrack

#endif  // SUBTRACK_STMISS_HPP_
