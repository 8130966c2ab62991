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


#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "subtrack/fedcore.hpp"
#include "subtrack/oracle/jacobi.hpp"

namespace subtrack {
namespace {

// Z = U_full diag(sqrt(lambda)) V^T, so Z Z^T has eigenvalues lambda.
Matrix WithSpectrum(const Vector& lambda, Index d, Stream& s, Matrix* U_full) {
  const Index n = lambda.size();
  *U_full = random_basis(n, n, s);
  const Matrix V = random_basis(d, n, s);
  return *U_full * lambda.cwiseSqrt().asDiagonal() * V.transpose();
}

Vector DistinctSpectrum(Index n) {
  Vector lam(n);
  for (Index i = 0; i < n; ++i) lam(i) = 10.0 / static_cast<double>(i + 1);
  return lam;
}

// Centralized power method on the concatenated matrix, normalized with
// modified Gram-Schmidt (positive R diagonal, like the Householder QR).
std::vector<Matrix> CentralizedPm(const Matrix& Z, const Matrix& U0, Index L) {
  std::vector<Matrix> out;
  Matrix Q, R;
  oracle::gram_schmidt(U0, Q, R);
  out.push_back(Q);
  for (Index l = 0; l < L; ++l) {
    const Matrix next = Z * (Z.transpose() * Q);
    oracle::gram_schmidt(next, Q, R);
    out.push_back(Q);
  }
  return out;
}

// Reference configuration: n = 100, r = 5, sigma_r = 1, sigma_{r+1} = 0.9.
struct NoisyRun {
  double dist;
  double sigma1_hat;
};

NoisyRun ReferenceRun(std::uint64_t seed, double eps) {
  const Index n = 100, r = 5, d = 200;
  Vector lam(n);
  for (Index i = 0; i < r; ++i) lam(i) = 2.0 - static_cast<double>(i) / static_cast<double>(r - 1);
  for (Index i = r; i < n; ++i)
    lam(i) = 0.9 - 0.8 * static_cast<double>(i - r) / static_cast<double>(n - r - 1);
  Stream s(seed, "fedcore-test-reference");
  Matrix Uf;
  const Matrix Z = WithSpectrum(lam, d, s, &Uf);
  const double sigma_c = eps * 1.0 / (5.0 * std::sqrt(static_cast<double>(n)));
  Channel ch(sigma_c, seed);
  const Matrix U = Uf.leftCols(r);
  PmConfig cfg;
  cfg.r = r;
  cfg.L = required_iterations(0.9, eps, n, r);
  cfg.init_seed = seed;
  cfg.truth = &U;
  const PmResult res = fedoa_pm(shard_columns(Z, partition_columns(d, 4)), cfg, ch);
  return {res.trace.back().dist, res.sigma1_hat};
}

TEST(Partition, EvenSplits) {
  const FedTopology a = partition_columns(10, 2);
  ASSERT_EQ(a.K(), 2);
  EXPECT_EQ(a.ranges[0], std::make_pair(Index{0}, Index{5}));
  EXPECT_EQ(a.ranges[1], std::make_pair(Index{5}, Index{10}));
  const FedTopology b = partition_columns(10, 1);
  ASSERT_EQ(b.K(), 1);
  EXPECT_EQ(b.size(0), 10);
  const FedTopology c = partition_columns(7, 3);
  EXPECT_EQ(c.size(0), 3);
  EXPECT_EQ(c.size(1), 2);
  EXPECT_EQ(c.size(2), 2);
}

TEST(Partition, EvenSizesDifferByAtMostOneAndCover) {
  for (Index d = 1; d <= 40; ++d) {
    for (Index K = 1; K <= d; ++K) {
      const FedTopology t = partition_columns(d, K);
      Index lo = d, hi = 0, next = 0;
      for (Index k = 0; k < K; ++k) {
        EXPECT_EQ(t.ranges[static_cast<std::size_t>(k)].first, next);
        next = t.ranges[static_cast<std::size_t>(k)].second;
        lo = std::min(lo, t.size(k));
        hi = std::max(hi, t.size(k));
      }
      EXPECT_EQ(next, d);
      EXPECT_GE(lo, 1);
      EXPECT_LE(hi - lo, 1);
    }
  }
}

TEST(Partition, GivenSizesAreValidated) {
  const FedTopology t = partition_columns(9, 3, PartitionMode::kGiven, {2, 3, 4});
  EXPECT_EQ(t.ranges[2], std::make_pair(Index{5}, Index{9}));
  EXPECT_THROW(partition_columns(9, 3, PartitionMode::kGiven, {2, 3, 3}), InvalidPartition);
  EXPECT_THROW(partition_columns(9, 3, PartitionMode::kGiven, {0, 5, 4}), InvalidPartition);
  EXPECT_THROW(partition_columns(9, 2, PartitionMode::kGiven, {2, 3, 4}), InvalidPartition);
  EXPECT_THROW(partition_columns(3, 4), InvalidPartition);
  EXPECT_THROW(partition_columns(3, 0), InvalidPartition);
}

TEST(Channel, ZeroNoiseIsExactSum) {
  Stream s(1, "fedcore-test-channel");
  const Matrix a = s.gaussian(5, 2), b = s.gaussian(5, 2);
  Channel ch(0.0, 3);
  EXPECT_EQ(ch.transmit({a, b}), a + b);
  EXPECT_EQ(ch.counter(), 1u);
}

TEST(Channel, EmpiricalVarianceMatchesDeclared) {
  const double sigma = 0.3;
  Channel ch(sigma, 11);
  const Matrix zero = Matrix::Zero(2, 2);
  double sum = 0.0, sum2 = 0.0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const Matrix w = ch.transmit({zero, zero});
    sum += w.sum();
    sum2 += w.squaredNorm();
  }
  const double m = 4.0 * trials;
  const double var = sum2 / m - (sum / m) * (sum / m);
  EXPECT_NEAR(var / (sigma * sigma), 1.0, 0.05);
  EXPECT_EQ(ch.counter(), static_cast<std::uint64_t>(trials));
}

TEST(Channel, FreshNoisePerTransmissionAndReproduciblePerSeed) {
  const Matrix x = Matrix::Zero(3, 3);
  Channel a(1.0, 5), b(1.0, 5);
  const Matrix a1 = a.transmit_sum(x), a2 = a.transmit_sum(x);
  EXPECT_GT((a1 - a2).norm(), 0.1);
  EXPECT_EQ(a1, b.transmit_sum(x));
  EXPECT_EQ(a2, b.transmit_sum(x));
}

TEST(Channel, ShapeMismatchThrows) {
  Channel ch(1.0, 1);
  EXPECT_THROW(ch.transmit({Matrix::Zero(3, 2), Matrix::Zero(2, 3)}), ShapeMismatch);
  EXPECT_THROW(ch.transmit(std::vector<Matrix>{}), ShapeMismatch);
  EXPECT_THROW(Channel(-1.0, 1), ConfigError);
}

TEST(FedPm, NoiselessIteratesMatchCentralizedPowerMethod) {
  const Index n = 40, r = 4, d = 60, L = 30;
  Stream s(2, "fedcore-test-equiv");
  Matrix Uf;
  const Matrix Z = WithSpectrum(DistinctSpectrum(n), d, s, &Uf);
  const Matrix U0 = s.gaussian(n, r);
  const std::vector<Matrix> ref = CentralizedPm(Z, U0, L);
  for (Index K : {1, 4}) {
    Channel ch(0.0, 1);
    PmConfig cfg;
    cfg.r = r;
    cfg.L = L;
    cfg.init = U0;
    cfg.keep_iterates = true;
    const PmResult res = fedoa_pm(shard_columns(Z, partition_columns(d, K)), cfg, ch);
    ASSERT_EQ(res.iterates.size(), ref.size());
    for (std::size_t l = 0; l < ref.size(); ++l)
      EXPECT_LE((res.iterates[l] - ref[l]).cwiseAbs().maxCoeff(), 1e-10) << "K=" << K << " l=" << l;
    EXPECT_EQ(res.transmissions, static_cast<std::uint64_t>(L + 1));
  }
}

TEST(FedPm, NoiselessConvergesToOracleBasis) {
  const Index n = 12, r = 3, d = 20;
  Stream s(3, "fedcore-test-oracle");
  Matrix Uf;
  const Matrix Z = WithSpectrum(DistinctSpectrum(n), d, s, &Uf);
  const oracle::EigenPairs e = oracle::jacobi_left_svd(Z, r);
  const double lam1 = oracle::jacobi_eig(Z * Z.transpose()).values(0);
  for (Index K : {1, 4}) {
    Channel ch(0.0, 1);
    PmConfig cfg;
    cfg.r = r;
    cfg.L = 200;
    const PmResult res = fedoa_pm(shard_columns(Z, partition_columns(d, K)), cfg, ch);
    EXPECT_LE(oracle::jacobi_proj_dist(e.vectors, res.U), 1e-8);
    EXPECT_NEAR(res.sigma1_hat, lam1, 1e-9 * lam1);
  }
}

TEST(FedPm, DiagonalCaseFindsFirstAxis) {
  const Index n = 6;
  Matrix Z = Matrix::Identity(n, n);
  Z(0, 0) = 2.0;  // Z Z^T = diag(4, 1, ..., 1)
  Channel ch(0.0, 1);
  PmConfig cfg;
  cfg.r = 1;
  cfg.L = 80;
  const PmResult res = fedoa_pm({Z}, cfg, ch);
  EXPECT_NEAR(std::abs(res.U(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(res.sigma1_hat, 4.0, 1e-12);
}

TEST(FedPm, DelayedNormalizationMatchesEveryEtaIterates) {
  const Index n = 30, r = 3, d = 50;
  Stream s(4, "fedcore-test-eta");
  Matrix Uf;
  const Matrix Z = WithSpectrum(DistinctSpectrum(n), d, s, &Uf);
  PmConfig cfg;
  cfg.r = r;
  cfg.L = 20;
  cfg.init_seed = 9;
  cfg.keep_iterates = true;
  Channel c1(0.0, 1), c5(0.0, 1);
  const PmResult every = fedoa_pm({Z}, cfg, c1);
  cfg.eta = 5;
  const PmResult delayed = fedoa_pm({Z}, cfg, c5);
  ASSERT_EQ(delayed.iterates.size(), 5u);
  for (std::size_t i = 0; i < delayed.iterates.size(); ++i)
    EXPECT_LE(dist(every.iterates[5 * i], delayed.iterates[i]), 1e-9);
  for (const PmIterate& it : delayed.trace) EXPECT_EQ(it.normalized, it.l % 5 == 0);
}

TEST(FedPm, RescalingPreservesTheSubspaceAndNoiseScale) {
  const Index n = 50, r = 2;
  Stream s(5, "fedcore-test-scale");
  const SpikedOperator A{random_basis(n, r, s), Vector::Constant(r, 1e40), 1e39};
  PmConfig cfg;
  cfg.r = r;
  cfg.L = 40;
  cfg.eta = 20;
  cfg.init_seed = 1;
  cfg.truth = &A.U;
  Channel ch(1e-3, 2);
  const PmResult res = fedoa_pm(std::function<Matrix(const Matrix&)>(A), n, cfg, ch);
  bool any_scaled = false;
  for (const PmIterate& it : res.trace) any_scaled = any_scaled || it.scaled;
  EXPECT_TRUE(any_scaled);
  // Channel noise is negligible against an iterate of size 1e40 per step.
  EXPECT_LE(res.trace.back().dist, 1e-12);
  EXPECT_NEAR(res.sigma1_hat / 1e40, 1.0, 1e-12);
}

TEST(FedPm, RankCollapseReportsIteration) {
  const Index n = 10;
  Matrix Z = Matrix::Zero(n, 3);
  Z(0, 0) = 1.0;  // rank one
  Channel ch(0.0, 1);
  PmConfig cfg;
  cfg.r = 2;
  cfg.L = 5;
  try {
    fedoa_pm({Z}, cfg, ch);
    FAIL() << "expected RankCollapse";
  } catch (const RankCollapse& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
  }
}

TEST(FedPm, RejectsInconsistentInputs) {
  Channel ch(0.0, 1);
  PmConfig cfg;
  cfg.r = 2;
  EXPECT_THROW(fedoa_pm({Matrix::Zero(4, 2), Matrix::Zero(5, 2)}, cfg, ch), DimensionMismatch);
  cfg.r = 6;
  EXPECT_THROW(fedoa_pm({Matrix::Identity(4, 4)}, cfg, ch), DimensionMismatch);
  cfg.r = 2;
  cfg.init = Matrix::Identity(3, 2);
  EXPECT_THROW(fedoa_pm({Matrix::Identity(4, 4)}, cfg, ch), DimensionMismatch);
}

TEST(FedPm, NoisyConvergenceAndEigenvalueSandwich) {
  const double eps = 0.05;
  int ok = 0;
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    const NoisyRun run = ReferenceRun(seed, eps);
    if (run.dist > eps) continue;
    ++ok;
    const Sandwich b = eigenvalue_sandwich(2.0, 1.0, 0.9, eps, 100,
                                           eps / (5.0 * std::sqrt(100.0)));
    EXPECT_GE(run.sigma1_hat, b.lower);
    EXPECT_LE(run.sigma1_hat, b.upper);
  }
  EXPECT_GE(ok, 90);
}

TEST(FedPm, DescentBoundHoldsOnBlocks) {
  const Index n = 200, r = 5;
  int good = 0, total = 0;
  for (Index eta : {1, 4}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Stream s(seed, "fedcore-test-descent");
      const SpikedOperator A{random_basis(n, r, s), Vector::Constant(r, 1.5), 1.0};
      const PmSpectrum spec{1.5, 1.0, 1e-4};
      Channel ch(spec.sigma_c, seed);
      PmConfig cfg;
      cfg.r = r;
      cfg.L = 80;
      cfg.eta = eta;
      cfg.init_seed = seed;
      cfg.truth = &A.U;
      const PmResult res = fedoa_pm(std::function<Matrix(const Matrix&)>(A), n, cfg, ch);
      double prev = -1.0;
      for (const PmIterate& it : res.trace) {
        if (!it.normalized) continue;
        if (prev >= 0.0) {
          const DescentBound b = descent_bound(prev, eta, spec, n, r);
          ++total;
          if (!b.feasible || it.dist <= b.value) ++good;
        }
        prev = it.dist;
      }
    }
  }
  ASSERT_GT(total, 0);
  EXPECT_GE(static_cast<double>(good), 0.95 * total);
}

TEST(Analysis, GammaFactorExamples) {
  GammaFactors g = gamma_factors(1, 3.0, 2.0);
  EXPECT_DOUBLE_EQ(g.num, 1.0);
  EXPECT_DOUBLE_EQ(g.denom, 1.0);
  g = gamma_factors(2, 2.0, 1.0);
  EXPECT_NEAR(g.num, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(g.denom, std::sqrt(1.25), 1e-15);
  for (Index eta = 1; eta <= 8; ++eta) {
    g = gamma_factors(eta, 1.7, 1.7);
    EXPECT_NEAR(g.num, g.denom, 1e-14 * g.denom);
  }
}

TEST(Analysis, GammaFactorsMatchDirectSums) {
  for (Index eta = 1; eta <= 12; ++eta) {
    for (double sr : {0.7, 1.1, 3.3}) {
      for (double s1 : {0.2, 1.0, 1.05}) {
        double num = 0.0, den = 0.0;
        for (Index i = 0; i < eta; ++i) {
          num += std::pow(s1, 2.0 * i);
          den += std::pow(sr, 2.0 * i);
        }
        const double scale = std::pow(sr, 2.0 * eta - 2.0);
        const GammaFactors g = gamma_factors(eta, sr, s1);
        EXPECT_NEAR(g.num, std::sqrt(num / scale), 1e-12 * std::sqrt(num / scale));
        EXPECT_NEAR(g.denom, std::sqrt(den / scale), 1e-12 * std::sqrt(den / scale));
      }
    }
  }
  EXPECT_TRUE(std::isfinite(gamma_factors(2000, 3.3, 1.0).num));
}

TEST(Analysis, DescentBoundExamples) {
  const PmSpectrum noiseless{2.0, 1.0, 0.0};
  DescentBound b = descent_bound(0.3, 3, noiseless, 100, 5);
  ASSERT_TRUE(b.feasible);
  EXPECT_NEAR(b.value, std::pow(0.5, 3) * 0.3 / (0.9 * std::sqrt(1 - 0.09)), 1e-15);
  const PmSpectrum noisy{2.0, 1.0, 0.02};
  b = descent_bound(0.0, 1, noisy, 100, 5);
  ASSERT_TRUE(b.feasible);
  EXPECT_NEAR(b.value, 10.0 * 0.01 / (0.9 - std::sqrt(5.0) * 0.01), 1e-15);
  const PmSpectrum loud{1.0, 0.5, 1.0};
  EXPECT_FALSE(descent_bound(0.0, 1, loud, 100, 5).feasible);
  EXPECT_FALSE(descent_bound(1.0, 1, noiseless, 100, 5).feasible);
}

TEST(Analysis, RequiredIterationsExamples) {
  EXPECT_EQ(required_iterations(0.5, 0.1, 100, 5, std::nullopt, 1.0), 13);
  EXPECT_EQ(required_iterations(0.5, 0.1, 100, 5), 25);
  EXPECT_EQ(required_iterations(0.5, 0.1, 100, 5, 0.0, 1.0),
            static_cast<Index>(std::ceil(std::log(10.0) / std::log(2.0))));
  const Index near = required_iterations(0.989, 0.1, 100, 5, std::nullopt, 1.0);
  EXPECT_EQ(near, static_cast<Index>(std::ceil(std::log(5000.0) / std::log(1.0 / 0.989))));
  EXPECT_THROW(required_iterations(0.99, 0.1, 100, 5), RatioTooLarge);
  EXPECT_THROW(required_iterations(0.5, 0.4, 100, 5), ConfigError);
  EXPECT_THROW(required_iterations(0.5, 0.0, 100, 5), ConfigError);
  EXPECT_GT(required_iterations(0.5, 0.1, 100, 5, 0.9, 1.0),
            required_iterations(0.5, 0.1, 100, 5, 0.0, 1.0));
}

TEST(Analysis, SandwichContainsTheTopEigenvalue) {
  const Sandwich s = eigenvalue_sandwich(2.0, 1.0, 0.9, 0.05, 100, 0.0);
  EXPECT_NEAR(s.lower, (1 - 0.01) * 2.0 - 0.0025 * 0.9 - 0.05, 1e-15);
  EXPECT_NEAR(s.upper, 2.1, 1e-15);
}

TEST(InitQuality, FullSpaceAlwaysSucceeds) {
  const InitQuality q = random_init_quality_check(4, 4, 10.0, 100, 1);
  EXPECT_DOUBLE_EQ(q.success_rate, 1.0);
  for (double d0 : q.dist0) EXPECT_LE(d0, 1e-7);
}

TEST(InitQuality, CalibratedRateAtGammaTen) {
  const InitQuality q = random_init_quality_check(50, 3, 10.0, 1000, 2);
  EXPECT_GE(q.success_rate, 0.9);
  EXPECT_DOUBLE_EQ(q.c0, kRandomInitC0);
}

TEST(InitQuality, PilotCalibrationIsReproducibleAndAboveFrozenValue) {
  for (std::uint64_t seed : {9001, 9002, 9003}) {
    const double c0 = random_init_pilot(50, 3, 20000, seed, {2, 5, 10, 20, 50});
    EXPECT_GT(c0, kRandomInitC0);
  }
}

TEST(InitQuality, RejectsBadArguments) {
  EXPECT_THROW(random_init_quality_check(10, 0, 10.0, 100, 1), ConfigError);
  EXPECT_THROW(random_init_quality_check(10, 2, 10.0, 99, 1), ConfigError);
}

TEST(Csv, HeaderAndRows) {
  PmResult res;
  res.sigma1_hat = 2.5;
  res.trace = {{1, 0.5, true, false}, {2, std::nan(""), true, true}};
  std::ostringstream os;
  write_pm_csv(os, res);
  EXPECT_EQ(os.str(), "l,dist,sigma1_hat,scaled\n1,0.5,,0\n2,,2.5,1\n");
}

}  // namespace
}  // namespace subtrack
