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


// Synthetic data: subspace sequences under the rotation and piecewise change
// models, bounded coefficients, complement-space residuals, missing-entry
// masks and sparse outliers.

#ifndef SUBTRACK_SYNTH_HPP_
#define SUBTRACK_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "subtrack/error.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/rng.hpp"

namespace subtrack {

enum class SkewScale {
  kUnit,      // generator scaled to unit spectral norm
  kGaussian,  // standard normal complement block, no scaling
};

// Walks P_(t) = exp(-delta B_t) P_(t-1). B_t = Q_t P^T - P Q_t^T with Q_t a
// Gaussian block orthogonal to P; only this block moves span(P), so the
// exponential has a closed form on the 2r-dimensional invariant subspace.
class RotationWalker {
 public:
  RotationWalker(Matrix P0, double delta, std::uint64_t seed, SkewScale scale = SkewScale::kUnit)
      : P_(std::move(P0)), delta_(delta), seed_(seed), scale_(scale) {}

  const Matrix& current() const { return P_; }

  // Advances to step t (t counts from 1 for the first move).
  void step(std::uint64_t t) {
    if (delta_ == 0.0) return;
    Stream stream(seed_, "skew", t);
    const Matrix G = stream.gaussian(P_.rows(), P_.cols());
    // Q = G - P (P^T G), kept implicit.
    const Matrix PtG = P_.transpose() * G;
    auto [s2, V] = sym_eig_desc(G.transpose() * G - PtG.transpose() * PtG);
    double norm = 1.0;
    if (scale_ == SkewScale::kUnit) {
      norm = std::sqrt(std::max(s2(0), 0.0));
      if (norm == 0.0) return;
    }
    const Index r = P_.cols();
    Vector c(r), sn(r);
    for (Index i = 0; i < r; ++i) {
      const double s = std::sqrt(std::max(s2(i), 0.0)) / norm;
      c(i) = std::cos(delta_ * s);
      sn(i) = (s > 0.0 ? std::sin(delta_ * s) / s : delta_) / norm;
    }
    const Matrix C1 = V * c.asDiagonal() * V.transpose();
    const Matrix C2 = V * sn.asDiagonal() * V.transpose();
    Matrix next = P_ * (C1 + PtG * C2) - G * C2;
    // The closed form preserves orthonormality up to rounding; a Householder
    // pass every kReorthPeriod steps removes the accumulated drift.
    if (t % kReorthPeriod == 0)
      P_ = householder_qr(next).Q;
    else
      P_ = std::move(next);
  }

  static constexpr std::uint64_t kReorthPeriod = 16;

 private:
  Matrix P_;
  double delta_;
  std::uint64_t seed_;
  SkewScale scale_;
};

inline std::vector<Matrix> gen_rotation_sequence(Index n, Index r, double delta,
                                                 Index num_steps, std::uint64_t seed,
                                                 SkewScale scale = SkewScale::kUnit) {
  if (!(n > r && r >= 1) || delta < 0.0) throw ConfigError("gen_rotation_sequence arguments");
  Stream init(seed, "init-basis");
  RotationWalker walker(random_basis(n, r, init), delta, seed, scale);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(num_steps));
  for (Index t = 0; t < num_steps; ++t) {
    if (t > 0) walker.step(static_cast<std::uint64_t>(t));
    out.push_back(walker.current());
  }
  return out;
}

// Basis at subspace distance exactly eps from P: every principal angle is
// arcsin(eps), moving along a random direction orthogonal to P.
inline Matrix basis_at_distance(const Matrix& P, double eps, Stream& stream) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("basis_at_distance needs eps in [0,1]");
  if (P.rows() < 2 * P.cols()) throw DimensionMismatch("basis_at_distance needs n >= 2r");
  const Matrix Q = qr_orthonormalize(project_out(P, stream.gaussian(P.rows(), P.cols()))).Q;
  const Matrix Qp = qr_orthonormalize(project_out(P, Q)).Q;
  return std::sqrt(1.0 - eps * eps) * P + eps * Qp;
}

// One basis per mini-batch. change_batches holds 0-based batch indices at
// which a fresh subspace starts.
inline std::vector<Matrix> gen_piecewise_sequence(Index n, Index r, Index num_batches,
                                                  const std::vector<Index>& change_batches,
                                                  std::uint64_t seed, Index j_star = 3,
                                                  bool orthogonal_changes = false) {
  for (std::size_t i = 0; i < change_batches.size(); ++i) {
    const Index c = change_batches[i];
    if (c < 1 || c >= num_batches) throw InvalidSpacing("change batch out of range");
    if (i > 0 && c - change_batches[i - 1] <= j_star + 2)
      throw InvalidSpacing("changes closer than j_star + 2 batches");
  }
  if (orthogonal_changes && n < 2 * r) throw InvalidSpacing("no room for an orthogonal change");
  Stream stream(seed, "piecewise");
  std::vector<Matrix> out;
  Matrix P = random_basis(n, r, stream);
  std::size_t next = 0;
  for (Index j = 0; j < num_batches; ++j) {
    if (next < change_batches.size() && change_batches[next] == j) {
      Matrix G = stream.gaussian(n, r);
      if (orthogonal_changes) G = project_out(P, G);
      P = qr_orthonormalize(G).Q;
      ++next;
    }
    out.push_back(P);
  }
  return out;
}

struct CoefficientModel {
  double lambda_minus = 1.0;
  double lambda_plus = 1.0;
  double lambda_v_plus = 0.0;
  Index r_v = 0;  // residual effective dimension; 0 means r
};

// Coordinate i of a_t is uniform on [-sqrt(3 lambda_i), sqrt(3 lambda_i)] with
// lambda_i spaced linearly from lambda_plus down to lambda_minus.
inline Vector draw_coefficients(Index r, const CoefficientModel& m, std::uint64_t seed,
                                std::uint64_t t) {
  Stream stream(seed, "coef", t);
  Vector a(r);
  for (Index i = 0; i < r; ++i) {
    const double frac = r > 1 ? static_cast<double>(i) / static_cast<double>(r - 1) : 0.0;
    const double lam = m.lambda_plus + frac * (m.lambda_minus - m.lambda_plus);
    const double b = std::sqrt(3.0 * lam);
    a(i) = stream.uniform(-b, b);
  }
  return a;
}

// Residual lying in the orthogonal complement of P. Built from a fixed
// r_v-dimensional frame with uniform weights of variance lambda_v_plus, so
// that ||E[v v^T]|| <= lambda_v_plus and ||v||^2 <= 3 r_v lambda_v_plus.
inline Vector draw_residual(const Matrix& P, const Matrix& frame, const CoefficientModel& m,
                            std::uint64_t seed, std::uint64_t t) {
  if (m.lambda_v_plus == 0.0) return Vector::Zero(P.rows());
  Stream stream(seed, "resid", t);
  const double b = std::sqrt(3.0 * m.lambda_v_plus);
  Vector c(frame.cols());
  for (Index i = 0; i < c.size(); ++i) c(i) = stream.uniform(-b, b);
  return project_out(P, frame * c);
}

inline Matrix residual_frame(Index n, Index r, const CoefficientModel& m, std::uint64_t seed) {
  Stream stream(seed, "resid-frame");
  return random_basis(n, m.r_v > 0 ? m.r_v : r, stream);
}

// Column t of the outputs uses subspaces[t / alpha].
inline std::pair<Matrix, Matrix> gen_coefficients_and_residual(
    const std::vector<Matrix>& subspaces, Index alpha, const CoefficientModel& m,
    std::uint64_t seed) {
  if (!(m.lambda_minus > 0.0 && m.lambda_plus >= m.lambda_minus))
    throw ConfigError("coefficient variances must satisfy 0 < lambda- <= lambda+");
  if (!(m.lambda_v_plus >= 0.0 && m.lambda_v_plus < m.lambda_minus))
    throw ConfigError("residual bound must satisfy 0 <= lambda_v+ < lambda-");
  const Index n = subspaces.front().rows();
  const Index r = subspaces.front().cols();
  const Index d = alpha * static_cast<Index>(subspaces.size());
  const Matrix frame = residual_frame(n, r, m, seed);
  Matrix A(r, d), V(n, d);
  for (Index t = 0; t < d; ++t) {
    const auto u = static_cast<std::uint64_t>(t);
    A.col(t) = draw_coefficients(r, m, seed, u);
    V.col(t) = draw_residual(subspaces[static_cast<std::size_t>(t / alpha)], frame, m, seed, u);
  }
  return {A, V};
}

enum class MaskMode { kBernoulli, kBounded };

struct MaskParams {
  MaskMode mode = MaskMode::kBernoulli;
  double rho = 1.0;        // Bernoulli observation probability
  double col_frac = 0.0;   // bounded: per-column missing fraction
  double row_frac = 0.0;   // bounded: per-row, per-batch missing fraction
  Index alpha = 1;         // batch length for the row quota
};

namespace detail {

// Draws `count` rows from `allowed` whose per-batch load stays below `quota`.
// Rejection sampling with a 100-attempt cap, then least-loaded repair.
inline IndexSet quota_sample(const std::vector<Index>& allowed, Index count,
                             std::vector<Index>& load, Index quota, Stream& stream) {
  IndexSet pick;
  if (count == 0) return pick;
  std::vector<Index> pool = allowed;
  const auto m = static_cast<Index>(pool.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Index i = 0; i < count; ++i)
      std::swap(pool[i], pool[i + static_cast<Index>(stream.below(m - i))]);
    bool ok = true;
    for (Index i = 0; i < count && ok; ++i) ok = load[pool[i]] < quota;
    if (ok) {
      pick.assign(pool.begin(), pool.begin() + count);
      break;
    }
  }
  if (pick.empty()) {
    std::vector<Index> order = allowed;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return load[a] < load[b]; });
    if (load[order[count - 1]] >= quota) throw InfeasibleFractions("row quota exhausted");
    pick.assign(order.begin(), order.begin() + count);
  }
  std::sort(pick.begin(), pick.end());
  for (Index i : pick) ++load[i];
  return pick;
}

}  // namespace detail

inline std::vector<IndexSet> gen_masks(Index n, Index d, const MaskParams& p, std::uint64_t seed) {
  std::vector<IndexSet> masks(static_cast<std::size_t>(d));
  if (p.mode == MaskMode::kBernoulli) {
    if (!(p.rho > 0.0 && p.rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
    for (Index t = 0; t < d; ++t) {
      Stream stream(seed, "mask", static_cast<std::uint64_t>(t));
      for (Index i = 0; i < n; ++i)
        if (stream.uniform() > p.rho) masks[t].push_back(i);
    }
    return masks;
  }
  const auto count = static_cast<Index>(std::floor(p.col_frac * static_cast<double>(n)));
  const auto quota = static_cast<Index>(std::floor(p.row_frac * static_cast<double>(p.alpha)));
  if (count > 0 && count * p.alpha > quota * n)
    throw InfeasibleFractions("column and row missing fractions cannot both hold");
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::vector<Index> load(static_cast<std::size_t>(n), 0);
  for (Index t = 0; t < d; ++t) {
    if (t % p.alpha == 0) std::fill(load.begin(), load.end(), 0);
    Stream stream(seed, "mask", static_cast<std::uint64_t>(t));
    masks[t] = detail::quota_sample(all, count, load, quota, stream);
  }
  return masks;
}

struct OutlierParams {
  double col_frac = 0.0;
  double row_frac = 0.0;
  double s_min = 1.0;
  double s_max = 1.0;
  Index alpha = 1;
  bool clean_first_batch = false;
};

struct Outliers {
  std::vector<IndexSet> support;
  std::vector<Vector> values;  // aligned with support
};

inline Outliers gen_outliers(Index n, Index d, const OutlierParams& p,
                             const std::vector<IndexSet>& masks, std::uint64_t seed) {
  if (!(p.s_max >= p.s_min && p.s_min > 0.0)) throw ConfigError("need s_max >= s_min > 0");
  Outliers out;
  out.support.resize(static_cast<std::size_t>(d));
  out.values.resize(static_cast<std::size_t>(d));
  const auto count = static_cast<Index>(std::floor(p.col_frac * static_cast<double>(n)));
  const auto quota = static_cast<Index>(std::floor(p.row_frac * static_cast<double>(p.alpha)));
  if (count > 0 && count * p.alpha > quota * n)
    throw InfeasibleFractions("column and row outlier fractions cannot both hold");
  std::vector<Index> load(static_cast<std::size_t>(n), 0);
  bool pinned = false;
  for (Index t = 0; t < d; ++t) {
    if (t % p.alpha == 0) std::fill(load.begin(), load.end(), 0);
    out.values[t] = Vector(0);
    if (count == 0 || (p.clean_first_batch && t < p.alpha)) continue;
    std::vector<Index> allowed;
    allowed.reserve(static_cast<std::size_t>(n));
    const IndexSet& miss = masks[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i)
      if (!std::binary_search(miss.begin(), miss.end(), i)) allowed.push_back(i);
    if (static_cast<Index>(allowed.size()) < count)
      throw InfeasibleFractions("not enough observed entries for the outlier support");
    Stream stream(seed, "outlier", static_cast<std::uint64_t>(t));
    out.support[t] = detail::quota_sample(allowed, count, load, quota, stream);
    Vector vals(count);
    for (Index i = 0; i < count; ++i) {
      double mag = stream.uniform(p.s_min, p.s_max);
      if (!pinned) {
        mag = p.s_min;
        pinned = true;
      }
      vals(i) = stream.uniform() < 0.5 ? -mag : mag;
    }
    out.values[t] = vals;
  }
  return out;
}

// y_t = l~_t with missing entries zeroed, plus outliers on their support.
inline Matrix assemble_observations(const Matrix& Ltilde, const std::vector<IndexSet>& masks,
                                    const Outliers* outliers) {
  const Index d = Ltilde.cols();
  if (static_cast<Index>(masks.size()) != d ||
      (outliers && static_cast<Index>(outliers->support.size()) != d))
    throw DimensionMismatch("mask or outlier count differs from column count");
  Matrix Y = Ltilde;
  for (Index t = 0; t < d; ++t) {
    for (Index i : masks[t]) Y(i, t) = 0.0;
    if (outliers) {
      const IndexSet& s = outliers->support[t];
      for (std::size_t k = 0; k < s.size(); ++k) Y(s[k], t) += outliers->values[t](static_cast<Index>(k));
    }
  }
  return Y;
}

enum class ChangeKind { kRotation, kPiecewise };

struct ModelConfig {
  Index n = 1000;
  Index d = 3000;
  Index r = 30;
  Index alpha = 60;
  ChangeKind kind = ChangeKind::kRotation;
  double delta = 1e-4;
  SkewScale skew = SkewScale::kUnit;
  std::vector<Index> change_batches;  // piecewise model, 0-based
  Index j_star = 3;
  CoefficientModel coef;
  MaskParams mask;
  OutlierParams outlier;  // col_frac = 0 disables outliers
};

struct DatasetStats {
  double lambda_plus = 0, lambda_minus = 0, f = 0;
  double lambda_v_plus = 0;  // measured from the per-batch SVD split
  double noise_level = 0;    // sqrt(lambda_v_plus / lambda_minus)
  double delta_tv = 0;       // max drift between consecutive batch subspaces
  double delta_large = 0;    // smallest measured change (piecewise)
  double missing_frac = 0, max_miss_col_frac = 0, max_miss_row_frac = 0;
  double max_out_col_frac = 0, max_out_row_frac = 0;
  double s_min = 0;          // smallest generated outlier magnitude
  double max_coef_norm2 = 0, max_resid_norm2 = 0;
  bool audit_pass = false;
  std::vector<std::string> audit_notes;
};

struct Dataset {
  ModelConfig config;
  std::uint64_t seed = 0;
  Matrix Y;
  Matrix Ltilde;
  Matrix A;
  Matrix V;
  std::vector<IndexSet> missing;
  Outliers outliers;
  std::vector<Matrix> P;  // per-batch ground truth from the SVD split
  DatasetStats stats;

  Index num_batches() const { return config.d / config.alpha; }
};

// Contiguous view of mini-batch j.
struct Batch {
  Index j = 0;
  Index t_start = 0;
  Matrix Y;
  std::vector<IndexSet> missing;
  std::vector<IndexSet> outliers;  // ground truth supports when known
};

inline Batch make_batch(const Dataset& ds, Index j) {
  const Index a = ds.config.alpha;
  Batch b;
  b.j = j;
  b.t_start = j * a;
  b.Y = ds.Y.middleCols(j * a, a);
  b.missing.assign(ds.missing.begin() + j * a, ds.missing.begin() + (j + 1) * a);
  if (!ds.outliers.support.empty())
    b.outliers.assign(ds.outliers.support.begin() + j * a,
                      ds.outliers.support.begin() + (j + 1) * a);
  return b;
}

namespace detail {

inline void audit(Dataset& ds) {
  const ModelConfig& c = ds.config;
  DatasetStats& s = ds.stats;
  const Index J = ds.num_batches();
  s.lambda_plus = c.coef.lambda_plus;
  s.lambda_minus = c.coef.lambda_minus;
  s.f = s.lambda_plus / s.lambda_minus;
  s.lambda_v_plus = 0.0;
  for (Index j = 0; j < J; ++j) {
    const Matrix Vj = project_out(ds.P[j], ds.Ltilde.middleCols(j * c.alpha, c.alpha));
    const double sv = spectral_norm(Vj);
    s.lambda_v_plus = std::max(s.lambda_v_plus, sv * sv / static_cast<double>(c.alpha));
  }
  s.noise_level = std::sqrt(s.lambda_v_plus / s.lambda_minus);
  s.delta_tv = 0.0;
  s.delta_large = 1.0;
  for (Index j = 1; j < J; ++j) {
    const double dj = dist(ds.P[j - 1], ds.P[j]);
    const bool is_change = std::find(c.change_batches.begin(), c.change_batches.end(), j) !=
                           c.change_batches.end();
    if (is_change && c.kind == ChangeKind::kPiecewise)
      s.delta_large = std::min(s.delta_large, dj);
    else
      s.delta_tv = std::max(s.delta_tv, dj);
  }
  if (c.change_batches.empty()) s.delta_large = 0.0;

  const double n = static_cast<double>(c.n);
  Index total_missing = 0;
  std::vector<Index> row_load(static_cast<std::size_t>(c.n), 0);
  std::vector<Index> out_load(static_cast<std::size_t>(c.n), 0);
  s.max_miss_col_frac = s.max_miss_row_frac = s.max_out_col_frac = s.max_out_row_frac = 0.0;
  s.s_min = 0.0;
  for (Index t = 0; t < c.d; ++t) {
    if (t % c.alpha == 0) {
      std::fill(row_load.begin(), row_load.end(), 0);
      std::fill(out_load.begin(), out_load.end(), 0);
    }
    const IndexSet& m = ds.missing[t];
    total_missing += static_cast<Index>(m.size());
    s.max_miss_col_frac = std::max(s.max_miss_col_frac, static_cast<double>(m.size()) / n);
    for (Index i : m)
      s.max_miss_row_frac = std::max(s.max_miss_row_frac,
                                     static_cast<double>(++row_load[i]) / static_cast<double>(c.alpha));
    const IndexSet& o = ds.outliers.support[t];
    s.max_out_col_frac = std::max(s.max_out_col_frac, static_cast<double>(o.size()) / n);
    for (Index i : o)
      s.max_out_row_frac = std::max(s.max_out_row_frac,
                                    static_cast<double>(++out_load[i]) / static_cast<double>(c.alpha));
    for (Index k = 0; k < ds.outliers.values[t].size(); ++k) {
      const double mag = std::abs(ds.outliers.values[t](k));
      s.s_min = s.s_min == 0.0 ? mag : std::min(s.s_min, mag);
    }
  }
  s.missing_frac = static_cast<double>(total_missing) / (n * static_cast<double>(c.d));
  s.max_coef_norm2 = ds.A.colwise().squaredNorm().maxCoeff();
  s.max_resid_norm2 = ds.V.colwise().squaredNorm().maxCoeff();

  s.audit_notes.clear();
  s.audit_pass = true;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) {
      s.audit_pass = false;
      s.audit_notes.push_back(what);
    }
  };
  if (c.mask.mode == MaskMode::kBounded) {
    require(s.max_miss_col_frac <= c.mask.col_frac + 1e-12, "missing column fraction");
    require(s.max_miss_row_frac <= c.mask.row_frac + 1e-12, "missing row fraction");
  }
  if (c.outlier.col_frac > 0.0) {
    require(s.max_out_col_frac <= c.outlier.col_frac + 1e-12, "outlier column fraction");
    require(s.max_out_row_frac <= c.outlier.row_frac + 1e-12, "outlier row fraction");
    require(s.s_min == c.outlier.s_min, "outlier minimum magnitude");
  }
  const double rv = static_cast<double>(c.coef.r_v > 0 ? c.coef.r_v : c.r);
  require(s.max_resid_norm2 <= 3.0 * rv * c.coef.lambda_v_plus * (1.0 + 1e-12),
          "residual norm bound");
  require(s.max_coef_norm2 <= 3.0 * static_cast<double>(c.r) * c.coef.lambda_plus,
          "coefficient norm bound");
  if (c.kind == ChangeKind::kPiecewise && !c.change_batches.empty())
    require(s.delta_large >= s.delta_tv, "large change exceeds drift");
  ds.stats.audit_notes.push_back("coefficients are centered uniform draws");
}

}  // namespace detail

inline Dataset generate_dataset(const ModelConfig& config, std::uint64_t seed) {
  const ModelConfig& c = config;
  if (c.alpha < 1 || c.d % c.alpha != 0)
    throw ConfigError("d must be a positive multiple of alpha");
  if (!(c.n > c.r && c.r >= 1 && c.alpha >= c.r)) throw ConfigError("need n > r >= 1, alpha >= r");
  Dataset ds;
  ds.config = c;
  ds.config.mask.alpha = c.alpha;
  ds.config.outlier.alpha = c.alpha;
  ds.seed = seed;
  const Index J = c.d / c.alpha;
  const Matrix frame = residual_frame(c.n, c.r, c.coef, seed);
  ds.Ltilde.resize(c.n, c.d);
  ds.A.resize(c.r, c.d);
  ds.V.resize(c.n, c.d);
  auto fill_column = [&](const Matrix& P, Index t) {
    const auto u = static_cast<std::uint64_t>(t);
    ds.A.col(t) = draw_coefficients(c.r, c.coef, seed, u);
    ds.V.col(t) = draw_residual(P, frame, c.coef, seed, u);
    ds.Ltilde.col(t) = P * ds.A.col(t) + ds.V.col(t);
  };
  if (!(c.coef.lambda_v_plus >= 0.0 && c.coef.lambda_v_plus < c.coef.lambda_minus))
    throw ConfigError("residual bound must satisfy 0 <= lambda_v+ < lambda-");
  if (c.kind == ChangeKind::kRotation) {
    Stream init(seed, "init-basis");
    RotationWalker walker(random_basis(c.n, c.r, init), c.delta, seed, c.skew);
    for (Index t = 0; t < c.d; ++t) {
      if (t > 0) walker.step(static_cast<std::uint64_t>(t));
      fill_column(walker.current(), t);
    }
  } else {
    const auto seq = gen_piecewise_sequence(c.n, c.r, J, c.change_batches, seed, c.j_star);
    for (Index t = 0; t < c.d; ++t) fill_column(seq[static_cast<std::size_t>(t / c.alpha)], t);
  }
  ds.missing = gen_masks(c.n, c.d, ds.config.mask, seed);
  if (c.outlier.col_frac > 0.0) {
    ds.outliers = gen_outliers(c.n, c.d, ds.config.outlier, ds.missing, seed);
  } else {
    ds.outliers.support.assign(static_cast<std::size_t>(c.d), {});
    ds.outliers.values.assign(static_cast<std::size_t>(c.d), Vector(0));
  }
  ds.Y = assemble_observations(ds.Ltilde, ds.missing, &ds.outliers);
  ds.P.reserve(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) ds.P.push_back(r_svd(ds.Ltilde.middleCols(j * c.alpha, c.alpha), c.r).basis);
  detail::audit(ds);
  return ds;
}

}  // namespace subtrack

#endif  // SUBTRACK_SYNTH_HPP_
