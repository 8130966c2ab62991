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


// Simulated over-the-air federated power method: column partitions, the
// additive Gaussian aggregation channel, the power method with optional
// delayed normalization, and the closed-form analysis helpers.

#ifndef SUBTRACK_FEDCORE_HPP_
#define SUBTRACK_FEDCORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "subtrack/error.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/rng.hpp"

namespace subtrack {

enum class PartitionMode { kEven, kGiven };

struct FedTopology {
  Index d = 0;
  // Half-open column ranges [begin, end), in order.
  std::vector<std::pair<Index, Index>> ranges;

  Index K() const { return static_cast<Index>(ranges.size()); }
  Index size(Index k) const {
    const auto& [b, e] = ranges[static_cast<std::size_t>(k)];
    return e - b;
  }
};

inline FedTopology partition_columns(Index d, Index K, PartitionMode mode = PartitionMode::kEven,
                                     const std::vector<Index>& sizes = {}) {
  if (K < 1 || K > d)
    throw InvalidPartition("need 1 <= K <= d, got K = " + std::to_string(K) +
                           ", d = " + std::to_string(d));
  FedTopology topo;
  topo.d = d;
  std::vector<Index> widths;
  if (mode == PartitionMode::kEven) {
    for (Index k = 0; k < K; ++k) widths.push_back(d / K + (k < d % K ? 1 : 0));
  } else {
    if (static_cast<Index>(sizes.size()) != K)
      throw InvalidPartition(std::to_string(sizes.size()) + " sizes for K = " +
                             std::to_string(K));
    Index total = 0;
    for (Index s : sizes) {
      if (s < 1) throw InvalidPartition("empty partition");
      total += s;
    }
    if (total != d)
      throw InvalidPartition("sizes sum to " + std::to_string(total) + ", expected " +
                             std::to_string(d));
    widths = sizes;
  }
  Index begin = 0;
  for (Index w : widths) {
    topo.ranges.emplace_back(begin, begin + w);
    begin += w;
  }
  return topo;
}

// Splits the columns of Z into per-node shards.
inline std::vector<Matrix> shard_columns(const Matrix& Z, const FedTopology& topo) {
  if (Z.cols() != topo.d)
    throw DimensionMismatch("matrix has " + std::to_string(Z.cols()) + " columns, topology " +
                            std::to_string(topo.d));
  std::vector<Matrix> out;
  for (const auto& [b, e] : topo.ranges) out.emplace_back(Z.middleCols(b, e - b));
  return out;
}

// Every transmission draws noise from Stream(seed, "channel", counter), so
// the draw a transmission sees depends only on its index.
class Channel {
 public:
  Channel(double sigma_c, std::uint64_t seed) : sigma_c_(sigma_c), seed_(seed) {
    if (!(sigma_c >= 0.0)) throw ConfigError("sigma_c must be >= 0");
  }

  double sigma_c() const { return sigma_c_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Sum of the summands plus noise of std noise_scale * sigma_c.
  Matrix transmit(const std::vector<Matrix>& summands, double noise_scale = 1.0) {
    if (summands.empty()) throw ShapeMismatch("no summands");
    const Index rows = summands.front().rows();
    const Index cols = summands.front().cols();
    Matrix sum = Matrix::Zero(rows, cols);
    for (const Matrix& s : summands) {
      if (s.rows() != rows || s.cols() != cols)
        throw ShapeMismatch(std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                            " summand, expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
      sum += s;
    }
    add_noise(sum, noise_scale);
    return sum;
  }

  Matrix transmit_sum(const Matrix& exact_sum, double noise_scale = 1.0) {
    Matrix out = exact_sum;
    add_noise(out, noise_scale);
    return out;
  }

 private:
  void add_noise(Matrix& M, double noise_scale) {
    Stream stream(seed_, "channel", counter_++);
    const double sd = sigma_c_ * noise_scale;
    if (sd > 0.0) M += stream.gaussian(M.rows(), M.cols(), sd);
  }

  double sigma_c_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// A = tail I + U diag(top - tail) U^T, applied without forming A.
struct SpikedOperator {
  Matrix U;
  Vector top;
  double tail = 1.0;

  Matrix operator()(const Matrix& X) const {
    const Vector gain = top.array() - tail;
    return tail * X + U * (gain.asDiagonal() * (U.transpose() * X));
  }
};

struct PmConfig {
  Index r = 1;
  Index L = 100;
  Index eta = 1;
  std::optional<Matrix> init;  // orthonormalized if given
  std::uint64_t init_seed = 0;
  const Matrix* truth = nullptr;  // enables the per-iteration dist trace
  bool keep_iterates = false;     // keeps every normalized iterate
};

struct PmIterate {
  Index l = 0;
  double dist = std::numeric_limits<double>::quiet_NaN();
  bool normalized = false;
  bool scaled = false;
};

struct PmResult {
  Matrix U;
  double sigma1_hat = 0.0;
  std::vector<PmIterate> trace;
  std::vector<Matrix> iterates;  // normalized iterates, when kept
  std::uint64_t transmissions = 0;
};

namespace fed_detail {

constexpr double kScaleHigh = 1e150;
constexpr double kScaleLow = 1e-150;

inline Matrix orthonormalize_or_collapse(const Matrix& X, Index l) {
  try {
    return qr_orthonormalize(X).Q;
  } catch (const RankDeficient& e) {
    throw RankCollapse("iteration " + std::to_string(l) + ": " + e.what());
  }
}

// products(U) returns the per-node summands Z_k Z_k^T U.
template <class Products>
PmResult run_pm(Products&& products, Index n, const PmConfig& cfg, Channel& channel) {
  if (cfg.r < 1 || cfg.r > n)
    throw DimensionMismatch("r = " + std::to_string(cfg.r) + " with n = " + std::to_string(n));
  if (cfg.eta < 1) throw ConfigError("eta must be >= 1");
  if (cfg.L < 1) throw ConfigError("L must be >= 1");
  if (cfg.truth != nullptr && cfg.truth->rows() != n)
    throw DimensionMismatch("ground-truth basis has the wrong row count");

  PmResult out;
  Matrix X;
  if (cfg.init) {
    if (cfg.init->rows() != n || cfg.init->cols() != cfg.r)
      throw DimensionMismatch("init must be n x r");
    X = orthonormalize_or_collapse(*cfg.init, 0);
  } else {
    Stream stream(cfg.init_seed, "fedpm-init");
    X = orthonormalize_or_collapse(stream.gaussian(n, cfg.r), 0);
  }
  if (cfg.keep_iterates) out.iterates.push_back(X);

  // The transmitted iterate is X * 2^exponent.
  int exponent = 0;
  const std::uint64_t start = channel.counter();
  for (Index l = 1; l <= cfg.L; ++l) {
    X = channel.transmit(products(X), std::ldexp(1.0, -exponent));
    PmIterate rec;
    rec.l = l;
    const double peak = X.cwiseAbs().maxCoeff();
    if (peak > kScaleHigh || (peak > 0.0 && peak < kScaleLow)) {
      const int shift = std::ilogb(peak);
      X *= std::ldexp(1.0, -shift);
      exponent += shift;
      rec.scaled = true;
    }
    Matrix Q;
    if (l % cfg.eta == 0 || l == cfg.L) Q = orthonormalize_or_collapse(X, l);
    if (l % cfg.eta == 0) {
      X = Q;
      exponent = 0;
      rec.normalized = true;
      if (cfg.keep_iterates) out.iterates.push_back(X);
    }
    if (cfg.truth != nullptr) {
      if (Q.size() == 0) Q = orthonormalize_or_collapse(X, l);
      rec.dist = dist(*cfg.truth, Q);
    }
    if (l == cfg.L) out.U = std::move(Q);
    out.trace.push_back(rec);
  }

  // One extra transmission for the eigenvalue; Lambda = U^T (A U + W).
  const Matrix B = channel.transmit(products(out.U));
  const Matrix Lambda = out.U.transpose() * B;
  const Matrix sym = 0.5 * (Lambda + Lambda.transpose());
  out.sigma1_hat = sym_eig_desc(sym).first(0);
  out.transmissions = channel.counter() - start;
  return out;
}

}  // namespace fed_detail

// Shard form: node k holds Z_k (n x d_k).
inline PmResult fedoa_pm(const std::vector<Matrix>& shards, const PmConfig& cfg,
                         Channel& channel) {
  if (shards.empty()) throw InvalidPartition("no shards");
  const Index n = shards.front().rows();
  for (const Matrix& Z : shards)
    if (Z.rows() != n) throw DimensionMismatch("shards disagree in row count");
  auto products = [&shards](const Matrix& U) {
    std::vector<Matrix> out;
    out.reserve(shards.size());
    for (const Matrix& Z : shards) out.emplace_back(Z * (Z.transpose() * U));
    return out;
  };
  return fed_detail::run_pm(products, n, cfg, channel);
}

// Operator form: a single aggregate A U per transmission.
inline PmResult fedoa_pm(const std::function<Matrix(const Matrix&)>& apply, Index n,
                         const PmConfig& cfg, Channel& channel) {
  auto products = [&apply](const Matrix& U) { return std::vector<Matrix>{apply(U)}; };
  return fed_detail::run_pm(products, n, cfg, channel);
}

struct GammaFactors {
  double num = 1.0;
  double denom = 1.0;
};

inline GammaFactors gamma_factors(Index eta, double sigma_r, double sigma_r1) {
  if (eta < 1) throw ConfigError("eta must be >= 1");
  if (!(sigma_r > 0.0)) throw ConfigError("sigma_r must be positive");
  // num^2 = sum_i a^i b^(eta-1-i) and denom^2 = sum_i b^i with
  // a = (sigma_r1 / sigma_r)^2, b = sigma_r^-2, i = 0..eta-1.
  const double a = (sigma_r1 / sigma_r) * (sigma_r1 / sigma_r);
  const double b = 1.0 / (sigma_r * sigma_r);
  std::vector<double> bpow(static_cast<std::size_t>(eta), 1.0);
  for (std::size_t i = 1; i < bpow.size(); ++i) bpow[i] = bpow[i - 1] * b;
  double num = 0.0;
  double denom = 0.0;
  double pa = 1.0;
  for (std::size_t i = 0; i < bpow.size(); ++i) {
    denom += bpow[i];
    num += pa * bpow[bpow.size() - 1 - i];
    pa *= a;
  }
  return {std::sqrt(num), std::sqrt(denom)};
}

struct PmSpectrum {
  double sigma_r = 1.0;
  double sigma_r1 = 0.0;
  double sigma_c = 0.0;

  double R() const { return sigma_r1 / sigma_r; }
  double nsr() const { return sigma_c / sigma_r; }
};

struct DescentBound {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
};

inline DescentBound descent_bound(double dist_prev, Index eta, const PmSpectrum& s, Index n,
                                  Index r) {
  const GammaFactors g = gamma_factors(eta, s.sigma_r, s.sigma_r1);
  const double nsr = s.nsr();
  const double num = std::pow(s.R(), static_cast<double>(eta)) * dist_prev +
                     std::sqrt(static_cast<double>(n)) * nsr * g.num;
  const double den = 0.9 * std::sqrt(std::max(0.0, 1.0 - dist_prev * dist_prev)) -
                     std::sqrt(static_cast<double>(r)) * nsr * g.denom;
  if (!(den > 0.0)) return {};
  return {true, num / den};
}

constexpr double kDefaultIterationConstant = 2.0;

// ceil(C_L * log(n r / eps) / log(1/R)) for a random init, or
// ceil(C_L * log(1 / (eps sqrt(1 - eps0^2))) / log(1/R)) with an init of
// quality eps0.
inline Index required_iterations(double R, double eps, Index n, Index r,
                                 std::optional<double> eps0 = std::nullopt,
                                 double C_L = kDefaultIterationConstant) {
  if (R >= 0.99) throw RatioTooLarge("R = " + std::to_string(R) + " >= 0.99");
  if (!(R > 0.0)) throw ConfigError("R must be positive");
  if (!(eps > 0.0 && eps < 1.0 / 3.0)) throw ConfigError("eps must be in (0, 1/3)");
  double top;
  if (eps0) {
    if (!(*eps0 >= 0.0 && *eps0 < 1.0)) throw ConfigError("eps0 must be in [0, 1)");
    top = std::log(1.0 / (eps * std::sqrt(1.0 - *eps0 * *eps0)));
  } else {
    top = std::log(static_cast<double>(n) * static_cast<double>(r) / eps);
  }
  const double L = std::ceil(C_L * top / std::log(1.0 / R));
  return std::max<Index>(1, static_cast<Index>(L));
}

// Eigenvalue sandwich for a run that reached dist <= eps, widened by
// 3 sqrt(n) sigma_c for the noisy final transmission.
struct Sandwich {
  double lower = 0.0;
  double upper = 0.0;
};

inline Sandwich eigenvalue_sandwich(double sigma1, double sigma_r, double sigma_r1, double eps,
                                    Index n, double sigma_c) {
  const double slack = 3.0 * std::sqrt(static_cast<double>(n)) * sigma_c;
  return {(1.0 - 4.0 * eps * eps) * sigma1 - eps * eps * sigma_r1 - eps * sigma_r - slack,
          (1.0 + eps) * sigma1 + slack};
}

// Frozen from random_init_pilot(50, 3, 20000, seed, {2, 5, 10, 20, 50}) on
// seeds 9001..9003 (0.0247, 0.0265, 0.0239), rounded down.
constexpr double kRandomInitC0 = 0.02;

struct InitQuality {
  double success_rate = 0.0;
  double c0 = 0.0;
  std::vector<double> dist0;
};

// Fraction of Gaussian inits with dist^2 <= 1 - c0 / (gamma n r) to a fixed
// random target subspace.
inline InitQuality random_init_quality_check(Index n, Index r, double gamma, Index trials,
                                             std::uint64_t seed, double c0 = kRandomInitC0) {
  if (r < 1 || r > n) throw ConfigError("need 1 <= r <= n");
  if (trials < 100) throw ConfigError("trials must be >= 100");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  Stream target_stream(seed, "init-target");
  const Matrix target = random_basis(n, r, target_stream);
  const double threshold =
      1.0 - c0 / (gamma * static_cast<double>(n) * static_cast<double>(r));
  InitQuality out;
  out.c0 = c0;
  Index ok = 0;
  for (Index t = 0; t < trials; ++t) {
    Stream stream(seed, "init-trial", static_cast<std::uint64_t>(t));
    const Matrix U0 = qr_orthonormalize(stream.gaussian(n, r)).Q;
    const double d0 = dist(target, U0);
    out.dist0.push_back(d0);
    if (d0 * d0 <= threshold) ++ok;
  }
  out.success_rate = static_cast<double>(ok) / static_cast<double>(trials);
  return out;
}

// Largest c0 for which, in the pilot sample, the bound holds with frequency
// at least 1 - 1/gamma for every gamma in the list.
inline double random_init_pilot(Index n, Index r, Index trials, std::uint64_t seed,
                                const std::vector<double>& gammas) {
  const InitQuality q = random_init_quality_check(n, r, 1.0, trials, seed, 0.0);
  std::vector<double> z;
  z.reserve(q.dist0.size());
  for (double d0 : q.dist0)
    z.push_back(static_cast<double>(n) * static_cast<double>(r) * (1.0 - d0 * d0));
  std::sort(z.begin(), z.end());
  double c0 = std::numeric_limits<double>::infinity();
  for (double g : gammas) {
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(z.size()) / g));
    c0 = std::min(c0, g * z[std::min(k, z.size() - 1)]);
  }
  return c0;
}

// Rows l = 1..L; sigma1_hat is filled on the last row only.
inline void write_pm_csv(std::ostream& os, const PmResult& res) {
  os << "l,dist,sigma1_hat,scaled\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const PmIterate& it = res.trace[i];
    os << it.l << ',';
    if (!std::isnan(it.dist)) os << it.dist;
    os << ',';
    if (i + 1 == res.trace.size()) os << res.sigma1_hat;
    os << ',' << (it.scaled ? 1 : 0) << '\n';
  }
}

}  // namespace subtrack

#endif  // SUBTRACK_FEDCORE_HPP_
