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


// Federated robust subspace tracking: node-local fill, the over-the-air
// power method for the subspace update, and federated change detection.
//
// Time steps are 1-based (t = 1 is the initialization step). Each time step
// consumes one mini-batch of alpha columns split across the K nodes.

#ifndef SUBTRACK_FEDRST_HPP_
#define SUBTRACK_FEDRST_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "subtrack/error.hpp"
#include "subtrack/fedcore.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/sparse.hpp"
#include "subtrack/stmiss.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

enum class FillMode { kModCs, kProjectedLs };
enum class FedInitMode { kOracle, kOutlierFreeBatch };

struct FedDetectionConfig {
  double eps = 0.01;
  double lambda_plus = 1.0;  // oracle mode
  ThresholdMode mode = ThresholdMode::kOracle;
  Index k_updates = 6;
  Index L_det = 0;  // 0: ceil(2 log(n r))
};

struct FedRstConfig {
  Index alpha = 60;
  Index r = 30;
  Index K = 4;
  double sigma_c = 0.0;
  std::uint64_t seed = 0;
  double eps = 0.01;       // target accuracy, sets the default L
  Index L = 0;             // 0: ceil(2 log(1/eps))
  FedInitMode init = FedInitMode::kOracle;
  double eps_init = 0.1;
  Index init_L = 0;        // 0: ceil(3 log(n/eps)), used for random-init runs
  FillMode fill = FillMode::kModCs;
  CsConfig cs;
  bool refine = false;
  double eps_nolev = 0.0;  // bound column only
  double delta_tv = 0.0;   // bound column only
  std::optional<FedDetectionConfig> detection;
};

inline Index default_update_iterations(double eps) {
  return static_cast<Index>(std::ceil(2.0 * std::log(1.0 / eps)));
}

inline Index default_init_iterations(Index n, double eps) {
  return static_cast<Index>(std::ceil(3.0 * std::log(static_cast<double>(n) / eps)));
}

inline Index default_detection_iterations(Index n, Index r) {
  return std::max<Index>(2, static_cast<Index>(std::ceil(
                                2.0 * std::log(static_cast<double>(n) * static_cast<double>(r)))));
}

// Column slices of one mini-batch, one per node.
inline std::vector<Batch> split_batch(const Batch& batch, const FedTopology& topo) {
  if (batch.Y.cols() != topo.d) throw DimensionMismatch("batch width differs from topology");
  std::vector<Batch> out;
  for (const auto& [b, e] : topo.ranges) {
    Batch nb;
    nb.j = batch.j;
    nb.t_start = batch.t_start + b;
    nb.Y = batch.Y.middleCols(b, e - b);
    nb.missing.assign(batch.missing.begin() + b, batch.missing.begin() + e);
    if (!batch.outliers.empty())
      nb.outliers.assign(batch.outliers.begin() + b, batch.outliers.begin() + e);
    out.push_back(std::move(nb));
  }
  return out;
}

struct NodeFill {
  std::vector<Matrix> Lhat;               // per node
  std::vector<std::vector<IndexSet>> support;  // per node, per column
  Index cs_iters = 0;
  Index failed_columns = 0;
};

// Node-local fill with the broadcast basis P. No communication.
inline NodeFill fed_modcs_fill(const Matrix& P, const std::vector<Batch>& nodes, FillMode mode,
                               const CsConfig& cs) {
  NodeFill out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Batch& b = nodes[k];
    if (b.Y.rows() != P.rows()) throw DimensionMismatch("node batch row count differs from basis");
    if (mode == FillMode::kProjectedLs) {
      Index fb = 0;
      out.Lhat.push_back(projected_ls_fill(P, b.Y, b.missing, &fb));
      out.support.emplace_back(b.missing);
      out.failed_columns += fb;
    } else {
      std::vector<IndexSet> sup;
      Index failed = 0;
      out.Lhat.push_back(modcs_fill(P, b, cs, &sup, &out.cs_iters, &failed));
      out.support.push_back(std::move(sup));
      if (failed > 0) spdlog::warn("node {}: {} modified-CS columns failed", k, failed);
      out.failed_columns += failed;
    }
  }
  return out;
}

inline Matrix concat_columns(const std::vector<Matrix>& parts) {
  Index cols = 0;
  for (const Matrix& m : parts) cols += m.cols();
  Matrix out(parts.empty() ? 0 : parts.front().rows(), cols);
  Index at = 0;
  for (const Matrix& m : parts) {
    out.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  return out;
}

struct FedDetection {
  bool detected = false;
  double lambda_det = 0.0;  // estimated top eigenvalue of Psi L L^T Psi
  double statistic = 0.0;   // lambda_det / alpha
};

// Rank-one power method on the node-local Psi-projected shards. L_det
// transmissions: L_det - 1 iterations plus the eigenvalue transmission.
inline FedDetection fed_detect_change(const Matrix& Pprev, const std::vector<Matrix>& shards,
                                      Channel& channel, Index alpha, double eps,
                                      double lambda_plus, Index L_det, std::uint64_t init_seed) {
  if (!(lambda_plus > 0.0)) throw ConfigError("detection needs lambda+ > 0");
  if (L_det < 2) throw ConfigError("L_det must be >= 2");
  std::vector<Matrix> projected;
  for (const Matrix& Z : shards) projected.push_back(project_out(Pprev, Z));
  PmConfig cfg;
  cfg.r = 1;
  cfg.L = L_det - 1;
  cfg.init_seed = init_seed;
  const PmResult pm = fedoa_pm(projected, cfg, channel);
  FedDetection out;
  out.lambda_det = pm.sigma1_hat;
  out.statistic = pm.sigma1_hat / static_cast<double>(alpha);
  out.detected = out.statistic >= 2.0 * eps * eps * lambda_plus;
  return out;
}

inline Matrix oracle_init(const Matrix& P1, double eps_init, std::uint64_t seed) {
  if (!(eps_init >= 0.0 && eps_init < 1.0)) throw ConfigError("eps_init must be in [0, 1)");
  if (eps_init == 0.0) return P1;
  Stream stream(seed, "fed-oracle-init");
  return basis_at_distance(P1, eps_init, stream);
}

struct FedRecord {
  Index t = 0;
  Index t_start = 0;
  double dist = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double sigma1_hat = std::numeric_limits<double>::quiet_NaN();
  double sigma_r_op = std::numeric_limits<double>::quiet_NaN();  // r-th eigenvalue of L L^T
  std::uint64_t transmissions = 0;
  Index pm_iterations = 0;
  Index detection_transmissions = 0;
  bool detected = false;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  Phase phase = Phase::kUpdate;
  double mean_recon_err = std::numeric_limits<double>::quiet_NaN();
  double refined_recon_err = std::numeric_limits<double>::quiet_NaN();
  double support_precision = std::numeric_limits<double>::quiet_NaN();
  double support_recall = std::numeric_limits<double>::quiet_NaN();
  Index failed_columns = 0;
  double elapsed_ms = 0.0;
};

struct FedStepOutput {
  Matrix Lhat;
  Matrix Lhat_refined;
};

class FedRstTracker {
 public:
  explicit FedRstTracker(FedRstConfig config)
      : config_(std::move(config)), channel_(config_.sigma_c, config_.seed) {
    if (config_.alpha < config_.r || config_.r < 1) throw ConfigError("tracker needs alpha >= r >= 1");
    if (!(config_.eps > 0.0 && config_.eps < 1.0)) throw ConfigError("eps must be in (0, 1)");
    topo_ = partition_columns(config_.alpha, config_.K);
    if (config_.L == 0) config_.L = default_update_iterations(config_.eps);
    if (config_.detection && config_.detection->k_updates < 2)
      throw ConfigError("k_updates must be at least 2");
  }

  const FedRstConfig& config() const { return config_; }
  const FedTopology& topology() const { return topo_; }
  const Matrix& current() const { return P_; }
  Phase phase() const { return phase_; }
  const std::vector<FedRecord>& history() const { return history_; }
  const std::vector<Index>& detections() const { return detections_; }
  std::uint64_t transmissions() const { return channel_.counter(); }
  double lambda_plus_estimate() const { return lambda_est_; }

  // Oracle mode: P1 at distance eps_init from the supplied truth. Batch
  // mode: random-init power method on the zero-filled first batch.
  void init(const Batch& batch, const BatchTruth& truth = {}) {
    const auto start = std::chrono::steady_clock::now();
    check_batch(batch);
    rows_ = batch.Y.rows();
    FedRecord rec;
    rec.t = 1;
    rec.t_start = batch.t_start;
    const std::uint64_t before = channel_.counter();
    if (config_.init == FedInitMode::kOracle) {
      if (!truth.P) throw InvalidMode("oracle init needs the true first basis");
      P_ = oracle_init(*truth.P, config_.eps_init, config_.seed);
    } else if (config_.init == FedInitMode::kOutlierFreeBatch) {
      std::vector<Matrix> shards;
      for (const Batch& b : split_batch(batch, topo_)) shards.push_back(zero_fill(b.Y, b.missing));
      const PmResult pm = random_pm(shards, init_iterations());
      P_ = pm.U;
      rec.sigma1_hat = pm.sigma1_hat;
      rec.pm_iterations = init_iterations();
    } else {
      throw InvalidMode("unknown init mode");
    }
    t_ = 1;
    k_ = 2;
    phase_ = Phase::kUpdate;
    rec.transmissions = channel_.counter() - before;
    rec.bound = config_.eps_init;
    finish(rec, nullptr, truth, start);
  }

  FedStepOutput step(const Batch& batch, const BatchTruth& truth = {}) {
    if (t_ == 0) throw ConfigError("tracker used before init");
    const auto start = std::chrono::steady_clock::now();
    check_batch(batch);
    ++t_;
    FedRecord rec;
    rec.t = t_;
    rec.t_start = batch.t_start;
    const std::uint64_t before = channel_.counter();
    const std::vector<Batch> nodes = split_batch(batch, topo_);
    const Matrix P_prev = P_;
    const bool detecting = config_.detection.has_value();
    NodeFill fill;
    if (detecting && k_ == 1) {
      const PmResult pm = random_pm(held_shards_, init_iterations());
      P_ = pm.U;
      rec.sigma1_hat = pm.sigma1_hat;
      rec.pm_iterations = init_iterations();
      k_ = 2;
      fill = fed_modcs_fill(P_, nodes, config_.fill, config_.cs);
    } else {
      fill = fed_modcs_fill(P_prev, nodes, config_.fill, config_.cs);
      bool hold = false;
      if (detecting && phase_ == Phase::kDetect) {
        const FedDetectionConfig& dc = *config_.detection;
        const double lam = dc.mode == ThresholdMode::kOracle ? dc.lambda_plus : lambda_est_;
        const std::uint64_t det_before = channel_.counter();
        const FedDetection det =
            fed_detect_change(P_prev, fill.Lhat, channel_, config_.alpha, dc.eps, lam,
                              detection_iterations(), detection_seed());
        rec.detection_transmissions = static_cast<Index>(channel_.counter() - det_before);
        rec.statistic = det.statistic;
        if (det.detected) {
          rec.detected = true;
          detections_.push_back(t_);
          phase_ = Phase::kUpdate;
          k_ = 1;
          held_shards_ = fill.Lhat;
          hold = true;
        }
      }
      if (!hold) {
        const PmResult pm = warm_pm(fill.Lhat, P_prev);
        P_ = pm.U;
        rec.sigma1_hat = pm.sigma1_hat;
        rec.pm_iterations = config_.L;
        if (detecting && phase_ == Phase::kUpdate) {
          ++k_;
          if (k_ >= config_.detection->k_updates) {
            phase_ = Phase::kDetect;
            lambda_est_ = pm.sigma1_hat / static_cast<double>(config_.alpha);
          }
        }
      }
    }
    FedStepOutput out;
    out.Lhat = concat_columns(fill.Lhat);
    rec.failed_columns = fill.failed_columns;
    if (!batch.outliers.empty()) {
      SupportScore score;
      std::size_t col = 0;
      for (const auto& node : fill.support)
        for (const IndexSet& s : node) {
          score.add(s, batch.missing[col], batch.outliers[col]);
          ++col;
        }
      rec.support_precision = score.precision();
      rec.support_recall = score.recall();
    }
    if (config_.refine)
      out.Lhat_refined = concat_columns(fed_modcs_fill(P_, nodes, config_.fill, config_.cs).Lhat);
    rec.transmissions = channel_.counter() - before;
    rec.bound = rst_bound(t_, config_.eps_init, config_.delta_tv, config_.eps_nolev);
    finish(rec, &out, truth, start);
    return out;
  }

 private:
  void check_batch(const Batch& batch) const {
    if (batch.Y.cols() != config_.alpha) throw DimensionMismatch("batch width differs from alpha");
    if (static_cast<Index>(batch.missing.size()) != batch.Y.cols())
      throw DimensionMismatch("one missing set per column");
    if (t_ > 0 && batch.Y.rows() != P_.rows()) throw DimensionMismatch("batch row count changed");
  }

  Index init_iterations() const {
    return config_.init_L > 0 ? config_.init_L : default_init_iterations(rows_, config_.eps);
  }
  Index detection_iterations() const {
    const Index L = config_.detection->L_det;
    return L > 0 ? L : default_detection_iterations(rows_, config_.r);
  }
  std::uint64_t detection_seed() const { return config_.seed ^ (0x9e3779b97f4a7c15ULL * t_); }

  PmResult warm_pm(const std::vector<Matrix>& shards, const Matrix& init) {
    PmConfig cfg;
    cfg.r = config_.r;
    cfg.L = config_.L;
    cfg.init = init;
    return run(shards, cfg);
  }

  PmResult random_pm(const std::vector<Matrix>& shards, Index L) {
    PmConfig cfg;
    cfg.r = config_.r;
    cfg.L = L;
    cfg.init_seed = config_.seed + 0x51ed * static_cast<std::uint64_t>(t_ + 1);
    return run(shards, cfg);
  }

  PmResult run(const std::vector<Matrix>& shards, const PmConfig& cfg) {
    try {
      return fedoa_pm(shards, cfg, channel_);
    } catch (const RankCollapse& e) {
      spdlog::error("time step {}: {}", t_, e.what());
      throw;
    }
  }

  void finish(FedRecord& rec, const FedStepOutput* out, const BatchTruth& truth,
              std::chrono::steady_clock::time_point start) {
    rec.phase = phase_;
    if (truth.P) rec.dist = dist(P_, *truth.P);
    if (out != nullptr) {
      if (truth.Ltilde) {
        rec.mean_recon_err = detail::mean_relative_error(out->Lhat, *truth.Ltilde);
        if (out->Lhat_refined.size() > 0)
          rec.refined_recon_err = detail::mean_relative_error(out->Lhat_refined, *truth.Ltilde);
      }
      // Diagnostic only (not available to the nodes): r-th eigenvalue of
      // the operator the power method ran on.
      const SvdResult s = r_svd(out->Lhat, config_.r);
      rec.sigma_r_op = s.values(config_.r - 1) * s.values(config_.r - 1);
    }
    rec.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    history_.push_back(rec);
  }

  FedRstConfig config_;
  Channel channel_;
  FedTopology topo_;
  Matrix P_;
  Index rows_ = 0;
  Index t_ = 0;
  Index k_ = 2;
  Phase phase_ = Phase::kUpdate;
  double lambda_est_ = 0.0;
  std::vector<Matrix> held_shards_;
  std::vector<FedRecord> history_;
  std::vector<Index> detections_;
};

// Runs the federated tracker over every batch of a dataset; alpha and r are
// taken from the dataset.
inline FedRstTracker fed_track_dataset(const Dataset& ds, FedRstConfig config) {
  config.alpha = ds.config.alpha;
  config.r = ds.config.r;
  FedRstTracker tracker(config);
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

// sqrt(n) sigma_c / sigma_r with sigma_r the r-th eigenvalue of L L^T.
inline double predicted_noise_floor(Index n, double sigma_c, double sigma_r_op) {
  return std::sqrt(static_cast<double>(n)) * sigma_c / sigma_r_op;
}

inline void write_fed_csv(std::ostream& os, const std::vector<FedRecord>& history) {
  os << "t,dist,bound,sigma1_hat,transmissions,detected,mean_recon_err,elapsed_ms\n";
  os << std::setprecision(17);
  for (const FedRecord& r : history) {
    os << r.t << ',' << r.dist << ',' << r.bound << ',' << r.sigma1_hat << ',' << r.transmissions
       << ',' << (r.detected ? 1 : 0) << ',' << r.mean_recon_err << ',' << r.elapsed_ms << '\n';
  }
}

}  // namespace subtrack

#endif  // SUBTRACK_FEDRST_HPP_
