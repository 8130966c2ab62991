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


// Sparse recovery with partial support knowledge (modified-CS), support
// thresholding, LS debiasing and the centralized robust tracker built on them.

#ifndef SUBTRACK_SPARSE_HPP_
#define SUBTRACK_SPARSE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include <spdlog/spdlog.h>

#include "subtrack/error.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/rng.hpp"
#include "subtrack/stmiss.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

struct CsSolverConfig {
  int max_iters = 5000;          // FISTA iterations per penalty value
  double tol = 1e-10;            // relative step tolerance
  int max_halvings = 80;
  int bisect_steps = 40;
  double bisect_rel_tol = 1e-4;  // stop once xi (1 - tol) <= residual <= xi
};

enum class XiMode { kOracle, kFallback };

struct CsConfig {
  double xi = 0.0;
  double omega = 0.0;
  XiMode mode = XiMode::kOracle;
  CsSolverConfig solver;

  static CsConfig from_smin(double s_min) {
    if (!(s_min > 0.0)) throw ConfigError("s_min must be positive");
    CsConfig c;
    c.xi = s_min / 15.0;
    c.omega = s_min / 2.0;
    return c;
  }
  // xi = ||Psi y|| / 2 per column, omega = 7.5 xi.
  static CsConfig fallback() {
    CsConfig c;
    c.mode = XiMode::kFallback;
    return c;
  }
};

struct CsResult {
  Vector x;
  double residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool fast_path = false;  // a point supported on M is already feasible
  std::vector<double> objective_trace;  // best feasible objective per outer step
};

namespace sparse_detail {

inline Vector apply_psi(const Matrix& P, const Vector& x) { return x - P * (P.transpose() * x); }

inline double partial_l1(const Vector& x, const std::vector<char>& free) {
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i)
    if (!free[static_cast<std::size_t>(i)]) s += std::abs(x(i));
  return s;
}

// Least-squares fit of the free coordinates for fixed penalized ones.
// Returns false when the restricted normal matrix is ill-conditioned.
inline bool polish_free(const Matrix& P, const Vector& ytilde, const IndexSet& M, Vector& x) {
  if (M.empty()) return true;
  Vector fixed = x;
  for (Index i : M) fixed(i) = 0.0;
  const Vector b = ytilde - apply_psi(P, fixed);
  try {
    const Vector l = masked_projected_ls(P, b, M);
    for (Index i : M) x(i) = b(i) - l(i);
  } catch (const IllConditioned&) {
    return false;
  }
  return true;
}

// FISTA with adaptive restart on 0.5 ||Psi x - yt||^2 + mu ||x_{M^c}||_1.
// The gradient Psi x - yt is 1-Lipschitz, so the step is 1.
inline int fista(const Matrix& P, const Vector& ytilde, const std::vector<char>& free, double mu,
                 const CsSolverConfig& cfg, Vector& x) {
  Vector z = x;
  double theta = 1.0;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    Vector g = apply_psi(P, z) - ytilde;
    Vector xn = z - g;
    for (Index i = 0; i < xn.size(); ++i) {
      if (free[static_cast<std::size_t>(i)]) continue;
      const double v = xn(i);
      xn(i) = v > mu ? v - mu : (v < -mu ? v + mu : 0.0);
    }
    const double step = (xn - x).norm();
    // Restart momentum when it points uphill.
    if ((z - xn).dot(xn - x) > 0.0) {
      theta = 1.0;
      z = xn;
    } else {
      const double theta_n = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      z = xn + ((theta - 1.0) / theta_n) * (xn - x);
      theta = theta_n;
    }
    x = std::move(xn);
    if (step <= cfg.tol * std::max(1.0, x.norm())) {
      ++it;
      break;
    }
  }
  return it;
}

}  // namespace sparse_detail

// min ||x_{M^c}||_1 subject to ||yt - Psi x|| <= xi, Psi = I - P P^T.
// Solved on the penalized form with halving continuation then bisection on
// the penalty; the best feasible iterate is returned after refitting x_M.
inline CsResult solve_modcs(const Matrix& P, const Vector& ytilde, const IndexSet& M, double xi,
                            const CsSolverConfig& cfg = {}) {
  using namespace sparse_detail;
  const Index n = P.rows();
  if (ytilde.size() != n) throw DimensionMismatch("solve_modcs: ytilde has wrong length");
  if (!(xi > 0.0)) throw ConfigError("solve_modcs needs xi > 0");
  std::vector<char> free(static_cast<std::size_t>(n), 0);
  for (Index i : M) free[static_cast<std::size_t>(i)] = 1;
  CsResult out;
  out.x = Vector::Zero(n);
  out.residual = ytilde.norm();
  if (out.residual <= xi) {
    out.fast_path = true;
    return out;
  }
  // A point supported on M is optimal (objective 0) if feasible.
  Vector x = Vector::Zero(n);
  if (polish_free(P, ytilde, M, x)) {
    const double res = (ytilde - apply_psi(P, x)).norm();
    if (res <= xi) {
      out.x = x;
      out.residual = res;
      out.fast_path = true;
      return out;
    }
  }
  Vector best;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_res = 0.0;
  auto consider = [&](Vector cand) {
    polish_free(P, ytilde, M, cand);
    const double res = (ytilde - apply_psi(P, cand)).norm();
    if (res > xi * (1.0 + 1e-9)) return res;
    const double obj = partial_l1(cand, free);
    if (obj < best_obj) {
      best_obj = obj;
      best = std::move(cand);
      best_res = res;
    }
    out.objective_trace.push_back(best_obj);
    return res;
  };
  double mu = 0.0;
  {
    // Smallest penalty with x_{M^c} = 0 as a minimizer is max |g_{M^c}| at the
    // LS point; start just below it.
    const Vector g = apply_psi(P, x) - ytilde;
    for (Index i = 0; i < n; ++i)
      if (!free[static_cast<std::size_t>(i)]) mu = std::max(mu, std::abs(g(i)));
    mu *= 0.5;
  }
  double mu_infeasible = 2.0 * mu;
  double mu_feasible = 0.0;
  for (int h = 0; h < cfg.max_halvings && mu > 0.0; ++h) {
    out.iterations += fista(P, ytilde, free, mu, cfg, x);
    const double res = consider(x);
    if (res <= xi * (1.0 + 1e-9)) {
      mu_feasible = mu;
      break;
    }
    mu_infeasible = mu;
    mu *= 0.5;
  }
  if (best.size() == 0)
    throw SolverDidNotConverge("modified-CS residual stays above xi after continuation");
  Vector xf = best;
  for (int b = 0; b < cfg.bisect_steps; ++b) {
    if (best_res >= xi * (1.0 - cfg.bisect_rel_tol)) break;
    const double mid = std::sqrt(mu_feasible * mu_infeasible);
    Vector trial = xf;
    out.iterations += fista(P, ytilde, free, mid, cfg, trial);
    const double res = consider(trial);
    if (res <= xi * (1.0 + 1e-9)) {
      mu_feasible = mid;
      xf = std::move(trial);
    } else {
      mu_infeasible = mid;
    }
  }
  out.x = std::move(best);
  out.residual = best_res;
  out.objective = best_obj;
  return out;
}

// M union {i : |x_i| > omega}, sorted.
inline IndexSet threshold_support(const Vector& x, double omega, const IndexSet& M) {
  IndexSet out = M;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x(i)) > omega) out.push_back(i);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline Vector ls_debias(const Matrix& P, const Vector& y, const IndexSet& T) {
  return masked_projected_ls(P, y, T);
}

struct RicBound {
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
};

namespace sparse_detail {

inline double restricted_norm2(const Matrix& P, const IndexSet& T) {
  Matrix PT(static_cast<Index>(T.size()), P.cols());
  for (std::size_t k = 0; k < T.size(); ++k) PT.row(static_cast<Index>(k)) = P.row(T[k]);
  return top_eigenvalue_psd(PT.transpose() * PT);
}

}  // namespace sparse_detail

// Bracket for max_{|T| <= s} ||P_T||^2: the upper value sums the s largest
// squared row norms, the lower value is the best of the top-norm rows and
// `samples` random supports.
inline RicBound ric_bracket(const Matrix& P, Index s, std::uint64_t seed = 0, int samples = 256) {
  const Index n = P.rows();
  if (s < 0 || s > n) throw ConfigError("ric_bound needs 0 <= s <= n");
  RicBound out;
  if (s == 0) return out;
  const Vector norms = P.rowwise().squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + s, order.end(),
                    [&](Index a, Index b) { return norms(a) > norms(b); });
  double sum = 0.0;
  for (Index k = 0; k < s; ++k) sum += norms(order[static_cast<std::size_t>(k)]);
  out.upper = std::min(1.0, sum);
  IndexSet top(order.begin(), order.begin() + s);
  std::sort(top.begin(), top.end());
  out.lower = sparse_detail::restricted_norm2(P, top);
  Stream stream(seed, "ric-sample");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (int k = 0; k < samples; ++k) {
    std::iota(pool.begin(), pool.end(), 0);
    for (Index i = 0; i < s; ++i) {
      const auto pick = i + static_cast<Index>(stream.below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
    }
    IndexSet T(pool.begin(), pool.begin() + s);
    std::sort(T.begin(), T.end());
    out.lower = std::max(out.lower, sparse_detail::restricted_norm2(P, T));
  }
  out.upper = std::max(out.upper, out.lower);
  return out;
}

// Restricted isometry constant of Psi = I - P P^T at level s, equal to
// max_{|T| <= s} ||P_T||^2. Exhaustive for n <= 20, otherwise ric_bracket.
inline RicBound ric_bound(const Matrix& P, Index s, std::uint64_t seed = 0, int samples = 256) {
  const Index n = P.rows();
  if (n > 20) return ric_bracket(P, s, seed, samples);
  if (s < 0 || s > n) throw ConfigError("ric_bound needs 0 <= s <= n");
  RicBound out;
  out.exact = true;
  if (s == 0) return out;
  // Monotone in T, so supports of size exactly s suffice.
  std::vector<char> pick(static_cast<std::size_t>(n), 0);
  std::fill(pick.begin(), pick.begin() + s, 1);
  do {
    IndexSet T;
    for (Index i = 0; i < n; ++i)
      if (pick[static_cast<std::size_t>(i)]) T.push_back(i);
    out.upper = std::max(out.upper, sparse_detail::restricted_norm2(P, T));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  out.lower = out.upper;
  return out;
}

struct ColumnFill {
  Vector l;
  IndexSet support;  // estimated T: known missing set plus detected outliers
  int cs_iters = 0;
  bool failed = false;
  bool fallback_xi = false;
};

// One column of the modified-CS pipeline: project, solve, threshold, debias.
// Failures zero-fill the known missing set and are flagged.
inline ColumnFill modcs_fill_column(const Matrix& P, const Vector& y, const IndexSet& M,
                                    const CsConfig& cfg) {
  ColumnFill out;
  const Vector yt = sparse_detail::apply_psi(P, y);
  double xi = cfg.xi;
  double omega = cfg.omega;
  if (cfg.mode == XiMode::kFallback) {
    xi = 0.5 * yt.norm();
    omega = 7.5 * xi;
    out.fallback_xi = true;
  }
  try {
    if (xi > 0.0) {
      const CsResult cs = solve_modcs(P, yt, M, xi, cfg.solver);
      out.cs_iters = cs.iterations;
      out.support = threshold_support(cs.x, omega, M);
    } else {
      out.support = M;
    }
    out.l = ls_debias(P, y, out.support);
  } catch (const Error& e) {
    spdlog::debug("modified-CS column failed: {}", e.what());
    out.failed = true;
    out.support = M;
    out.l = y;
    for (Index i : M) out.l(i) = 0.0;
  }
  return out;
}

struct SupportScore {
  Index true_pos = 0;
  Index false_pos = 0;
  Index false_neg = 0;

  double precision() const {
    const Index d = true_pos + false_pos;
    return d == 0 ? 1.0 : static_cast<double>(true_pos) / static_cast<double>(d);
  }
  double recall() const {
    const Index d = true_pos + false_neg;
    return d == 0 ? 1.0 : static_cast<double>(true_pos) / static_cast<double>(d);
  }
  void add(const IndexSet& estimated, const IndexSet& known, const IndexSet& truth) {
    IndexSet est;
    std::set_difference(estimated.begin(), estimated.end(), known.begin(), known.end(),
                        std::back_inserter(est));
    IndexSet both;
    std::set_intersection(est.begin(), est.end(), truth.begin(), truth.end(),
                          std::back_inserter(both));
    true_pos += static_cast<Index>(both.size());
    false_pos += static_cast<Index>(est.size() - both.size());
    false_neg += static_cast<Index>(truth.size() - both.size());
  }
};

// Bound for trackers started from a given estimate with error eps_init.
inline double rst_bound(Index j, double eps_init, double delta_tv, double eps_nolev) {
  double geo = 0.0;
  double p = 1.0;
  for (Index i = 1; i < j; ++i) {
    p *= 0.3;
    geo += p;
  }
  return std::max(std::pow(0.3, static_cast<double>(j - 1)) * eps_init + delta_tv * geo, eps_nolev);
}

struct RstRecord {
  BatchRecord base;
  double support_precision = std::numeric_limits<double>::quiet_NaN();
  double support_recall = std::numeric_limits<double>::quiet_NaN();
  Index cs_iters = 0;
  Index failed_columns = 0;
};

struct RstConfig {
  Index alpha = 60;
  Index r = 30;
  double eps_init = 0.1;  // for the bound column
  double eps_nolev = 0.0;
  double delta_tv = 0.0;
  bool refine = false;
  CsConfig cs;
};

struct RstBatchOutput {
  Matrix Lhat;
  Matrix Lhat_refined;
  std::vector<IndexSet> support;
};

inline Matrix modcs_fill(const Matrix& P, const Batch& batch, const CsConfig& cfg,
                         std::vector<IndexSet>* supports, Index* cs_iters, Index* failed) {
  Matrix L(batch.Y.rows(), batch.Y.cols());
  if (supports) supports->assign(static_cast<std::size_t>(batch.Y.cols()), {});
  for (Index t = 0; t < batch.Y.cols(); ++t) {
    ColumnFill f = modcs_fill_column(P, batch.Y.col(t), batch.missing[static_cast<std::size_t>(t)], cfg);
    L.col(t) = f.l;
    if (cs_iters) *cs_iters += f.cs_iters;
    if (failed && f.failed) ++*failed;
    if (supports) (*supports)[static_cast<std::size_t>(t)] = std::move(f.support);
  }
  return L;
}

class RstTracker {
 public:
  explicit RstTracker(RstConfig config) : config_(std::move(config)) {
    if (config_.alpha < config_.r || config_.r < 1) throw ConfigError("tracker needs alpha >= r >= 1");
  }

  const Matrix& current() const { return P_; }
  const std::vector<RstRecord>& history() const { return history_; }

  // Start from a supplied estimate (oracle or external batch method).
  void init_with(const Matrix& P1, const BatchTruth& truth = {}) {
    if (P1.cols() != config_.r) throw DimensionMismatch("initial basis rank differs from r");
    P_ = P1;
    j_ = 1;
    RstRecord rec;
    rec.base.j = 1;
    rec.base.bound = config_.eps_init;
    if (truth.P) rec.base.dist = dist(P_, *truth.P);
    history_.push_back(rec);
  }

  // Start from the r-SVD of an outlier-free first batch.
  void init_from_batch(const Batch& batch, const BatchTruth& truth = {}) {
    init_with(init_first_batch(batch, config_.r), truth);
    history_.back().base.t_start = batch.t_start;
  }

  RstBatchOutput step(const Batch& batch, const BatchTruth& truth = {}) {
    if (j_ == 0) throw ConfigError("tracker used before init");
    if (batch.Y.cols() != config_.alpha) throw DimensionMismatch("batch width differs from alpha");
    const auto start = std::chrono::steady_clock::now();
    ++j_;
    RstRecord rec;
    rec.base.j = j_;
    rec.base.t_start = batch.t_start;
    RstBatchOutput out;
    out.Lhat = modcs_fill(P_, batch, config_.cs, &out.support, &rec.cs_iters, &rec.failed_columns);
    P_ = r_svd(out.Lhat, config_.r).basis;
    if (config_.refine)
      out.Lhat_refined = modcs_fill(P_, batch, config_.cs, nullptr, nullptr, nullptr);
    rec.base.fallback_columns = rec.failed_columns;
    rec.base.bound = rst_bound(j_, config_.eps_init, config_.delta_tv, config_.eps_nolev);
    if (truth.P) rec.base.dist = dist(P_, *truth.P);
    if (truth.Ltilde) {
      rec.base.mean_recon_err = detail::mean_relative_error(out.Lhat, *truth.Ltilde);
      if (config_.refine)
        rec.base.refined_recon_err = detail::mean_relative_error(out.Lhat_refined, *truth.Ltilde);
    }
    if (!batch.outliers.empty()) {
      SupportScore score;
      for (std::size_t t = 0; t < out.support.size(); ++t)
        score.add(out.support[t], batch.missing[t], batch.outliers[t]);
      rec.support_precision = score.precision();
      rec.support_recall = score.recall();
    }
    if (rec.failed_columns > 0)
      spdlog::warn("batch {}: {} modified-CS columns failed", j_, rec.failed_columns);
    rec.base.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    history_.push_back(rec);
    return out;
  }

 private:
  RstConfig config_;
  Matrix P_;
  Index j_ = 0;
  std::vector<RstRecord> history_;
};

inline void write_rst_csv(std::ostream& os, const std::vector<RstRecord>& history) {
  os << "j,t_start,dist,bound,mean_recon_err,refined_recon_err,phase,detected,elapsed_ms,"
        "support_precision,support_recall,cs_iters\n";
  os << std::setprecision(17);
  for (const RstRecord& r : history) {
    const BatchRecord& b = r.base;
    os << b.j << ',' << b.t_start << ',' << b.dist << ',' << b.bound << ',' << b.mean_recon_err << ','
       << b.refined_recon_err << ',' << phase_name(b.phase) << ',' << (b.detected ? 1 : 0) << ','
       << b.elapsed_ms << ',' << r.support_precision << ',' << r.support_recall << ',' << r.cs_iters
       << '\n';
  }
}

}  // namespace subtrack

#endif  // SUBTRACK_SPARSE_HPP_
