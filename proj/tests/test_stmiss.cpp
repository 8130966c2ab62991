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

#include <gtest/gtest.h>

#include "subtrack/oracle/jacobi.hpp"
#include "subtrack/stmiss.hpp"

namespace subtrack {
namespace {

ModelConfig SmallRotation(double rho = 0.9) {
  ModelConfig c;
  c.n = 200;
  c.d = 1200;
  c.r = 5;
  c.alpha = 60;
  c.delta = 1e-3;
  c.mask.rho = rho;
  return c;
}

ModelConfig SmallPiecewise(std::vector<Index> changes) {
  ModelConfig c = SmallRotation();
  c.kind = ChangeKind::kPiecewise;
  c.change_batches = std::move(changes);
  return c;
}

TrackerConfig DetectConfig() {
  TrackerConfig tc;
  tc.detection = DetectionConfig{};
  tc.detection->eps = 0.01;
  tc.detection->k_updates = updates_to_converge(0.01);
  return tc;
}

Batch CleanBatch(const Matrix& Y) {
  Batch b;
  b.Y = Y;
  b.missing.assign(static_cast<std::size_t>(Y.cols()), {});
  return b;
}

TEST(Bounds, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(theoretical_bound(1, 0.0, 0.01), 0.1);
  EXPECT_NEAR(theoretical_bound(2, 0.1, 1e-3), 0.06, 1e-15);
  EXPECT_DOUBLE_EQ(theoretical_bound(200, 0.0, 0.01), 0.01);
  EXPECT_DOUBLE_EQ(simple_pca_bound(1e-3), 0.025);
  EXPECT_EQ(updates_to_converge(0.01), 6);
}

TEST(Bounds, LooseFormDominatesAndRecursionIsWithinTwice) {
  for (double dtv : {0.0, 1e-3, 0.01, 0.1}) {
    for (double eps : {1e-4, 1e-2}) {
      for (Index j = 1; j <= 30; ++j) {
        EXPECT_LE(theoretical_bound(j, dtv, eps), theoretical_bound_loose(j, dtv, eps) + 1e-15);
        double geo = 0.0;
        for (Index i = 1; i < j; ++i) geo += std::pow(0.3, static_cast<double>(i));
        const double simplified =
            2.0 * std::max(eps, std::pow(0.3, static_cast<double>(j - 1)) * 0.025 + dtv * geo);
        EXPECT_LE(recursion_bound(j, dtv, eps), simplified + 1e-15) << j;
      }
    }
  }
  EXPECT_DOUBLE_EQ(recursion_bound(1, 0.0, 1e-3), 0.025);
}

TEST(Bounds, PiecewiseReachesTwiceEps) {
  const double eps = 0.01;
  const Index K = updates_to_converge(eps);
  EXPECT_LE(piecewise_bound(10 + K, 10, eps), 2.0 * eps);
  EXPECT_NEAR(piecewise_bound(10, 10, eps), 0.22 * 0.25 + eps, 1e-15);
}

TEST(Bounds, PcaSddnCases) {
  EXPECT_TRUE(pca_sddn_bound(1.0, 0.0, 1.0, 0.0, 1e-6, 5, 100).feasible);
  const double eps = 0.2;
  const SddnResult ok = pca_sddn_bound(0.1, 1e-4, 1.0, eps * eps, eps, 30, 1000);
  EXPECT_TRUE(ok.feasible);
  EXPECT_GT(ok.alpha_star, 0.0);
  for (double e : {0.01, 0.5, 0.99}) EXPECT_FALSE(pca_sddn_bound(3.0, 1.0, 1.0, 0.0, e, 5, 100).feasible);
  EXPECT_THROW(pca_sddn_bound(3.5, 0.1, 1.0, 0.0, 0.1, 5, 100), ConfigError);
}

TEST(Init, ExactLowRankNoMissing) {
  Stream s(3, "init");
  const Matrix P = random_basis(40, 3, s);
  const Matrix Y = P * s.gaussian(3, 12);
  EXPECT_LT(oracle::jacobi_proj_dist(init_first_batch(CleanBatch(Y), 3), P), 1e-10);
}

TEST(Init, AllZeroIsRankDeficient) {
  EXPECT_THROW(init_first_batch(CleanBatch(Matrix::Zero(20, 8)), 2), RankDeficient);
}

TEST(Init, SimplePcaOfOneBatchIsInit) {
  const Dataset ds = generate_dataset(SmallRotation(), 5);
  const Batch b = make_batch(ds, 0);
  const auto base = simple_pca_baseline({b}, ds.config.r);
  ASSERT_EQ(base.size(), 1u);
  EXPECT_LT(dist(base[0], init_first_batch(b, ds.config.r)), 1e-14);
}

TEST(Init, SparseMissingWithinSimplePcaBound) {
  // Batch size about 4.5 r log n with 2% of entries missing.
  ModelConfig c = SmallRotation(0.98);
  c.alpha = 120;
  c.d = 120;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset ds = generate_dataset(c, seed);
    const double d1 = dist(init_first_batch(make_batch(ds, 0), c.r), ds.P[0]);
    EXPECT_LE(d1, 3.0 * simple_pca_bound(ds.stats.noise_level)) << seed;
  }
}

TEST(Track, NoMissingGivesIdentityFill) {
  Stream s(8, "nomiss");
  const Matrix P = random_basis(30, 2, s);
  const Matrix Y1 = P * s.gaussian(2, 10);
  const Matrix Y2 = P * s.gaussian(2, 10) + 0.01 * s.gaussian(30, 10);
  TrackerConfig tc;
  tc.alpha = 10;
  tc.r = 2;
  StMissTracker tr(tc);
  tr.init(CleanBatch(Y1));
  const BatchOutput out = tr.step(CleanBatch(Y2));
  EXPECT_EQ((out.Lhat - Y2).norm(), 0.0);
  EXPECT_LT(dist(tr.current(), r_svd(Y2, 2).basis), 1e-12);
}

TEST(Track, PerfectPreviousEstimateGivesExactPca) {
  Stream s(12, "perfect");
  const Matrix P = random_basis(50, 3, s);
  Batch b1 = CleanBatch(P * s.gaussian(3, 20));
  Batch b2 = CleanBatch(P * s.gaussian(3, 20));
  const Matrix truth2 = b2.Y;
  for (Index t = 0; t < 20; ++t) {
    IndexSet m;
    for (Index i = t % 5; i < 50; i += 9) m.push_back(i);
    for (Index i : m) b2.Y(i, t) = 0.0;
    b2.missing[static_cast<std::size_t>(t)] = m;
  }
  TrackerConfig tc;
  tc.alpha = 20;
  tc.r = 3;
  StMissTracker tr(tc);
  tr.init(b1);
  ASSERT_LT(dist(tr.current(), P), 1e-12);
  const BatchOutput out = tr.step(b2);
  EXPECT_LT((out.Lhat - truth2).norm(), 1e-10 * truth2.norm());
  EXPECT_LT(dist(tr.current(), P), 1e-10);
}

TEST(Track, HistoryInvariantsAgainstRecomputedDistance) {
  const Dataset ds = generate_dataset(SmallRotation(), 21);
  TrackerConfig tc;
  tc.alpha = ds.config.alpha;
  tc.r = ds.config.r;
  StMissTracker tr(tc);
  Matrix lt;
  for (Index j = 0; j < ds.num_batches(); ++j) {
    const BatchTruth truth = truth_for(ds, j, &lt);
    if (j == 0) {
      tr.init(make_batch(ds, j), truth);
    } else {
      tr.step(make_batch(ds, j), truth);
    }
    const BatchRecord& rec = tr.history().back();
    EXPECT_EQ(rec.j, j + 1);
    EXPECT_TRUE(std::isfinite(rec.dist));
    EXPECT_GE(rec.dist, 0.0);
    EXPECT_LE(rec.dist, 1.0);
    EXPECT_DOUBLE_EQ(rec.dist, dist(tr.current(), ds.P[static_cast<std::size_t>(j)]));
  }
}

TEST(Track, RefinementDominatesOnAverage) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = generate_dataset(SmallRotation(), seed);
    const StMissTracker tr = track_dataset(ds, TrackerConfig{});
    for (const BatchRecord& rec : tr.history())
      EXPECT_LE(rec.refined_recon_err, rec.mean_recon_err + 1e-10) << seed << " " << rec.j;
  }
}

// Slow-change property at desk scale with the batch size rule C = 1.
TEST(Track, SlowChangePropertyHoldsIn95Of100Seeds) {
  ModelConfig c = SmallRotation();
  c.alpha = 120;
  c.d = 1200;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Dataset ds = generate_dataset(c, seed);
    TrackerConfig tc;
    tc.refine = false;
    const StMissTracker tr = track_dataset(ds, tc);
    bool pass = true;
    for (const BatchRecord& rec : tr.history()) {
      if (rec.j < 2) continue;
      pass = pass && rec.dist <= 3.0 * theoretical_bound(rec.j, ds.stats.delta_tv, ds.stats.noise_level);
    }
    ok += pass ? 1 : 0;
  }
  EXPECT_GE(ok, 95);
}

TEST(Track, BeatsSimplePcaAfterFewBatches) {
  const Dataset ds = generate_dataset(SmallRotation(), 33);
  const StMissTracker tr = track_dataset(ds, TrackerConfig{});
  const auto base = simple_pca_errors(ds);
  for (const BatchRecord& rec : tr.history()) {
    if (rec.j < 5) continue;
    EXPECT_LT(rec.dist, base[static_cast<std::size_t>(rec.j - 1)]);
  }
}

TEST(Track, BatchWidthMismatchThrows) {
  TrackerConfig tc;
  tc.alpha = 10;
  tc.r = 2;
  StMissTracker tr(tc);
  EXPECT_THROW(tr.init(CleanBatch(Matrix::Ones(20, 9))), DimensionMismatch);
  TrackerConfig bad;
  bad.alpha = 2;
  bad.r = 3;
  EXPECT_THROW(StMissTracker{bad}, ConfigError);
}

TEST(Detect, InSpanStatisticIsZero) {
  Stream s(4, "span");
  const Matrix P = random_basis(30, 3, s);
  const DetectionResult d = detect_change(P, P * s.gaussian(3, 15), 15, 0.01, 1.0);
  EXPECT_LT(d.statistic, 1e-24);
  EXPECT_FALSE(d.detected);
}

TEST(Detect, StatisticMatchesDenseEigenvalue) {
  Stream s(6, "dense");
  const Matrix P = random_basis(25, 3, s);
  const Matrix L = s.gaussian(25, 10);
  const Matrix Psi = Matrix::Identity(25, 25) - P * P.transpose();
  const double lam = oracle::jacobi_eig(Psi * L * L.transpose() * Psi).values(0);
  EXPECT_NEAR(detect_change(P, L, 10, 0.1, 1.0).statistic, lam / 10.0, 1e-10 * lam);
}

TEST(Detect, NoFalseAlarmsOnChangeFreeRuns) {
  int alarms = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Dataset ds = generate_dataset(SmallPiecewise({}), seed);
    alarms += static_cast<int>(track_dataset(ds, DetectConfig()).detections().size());
  }
  EXPECT_EQ(alarms, 0);
}

TEST(Detect, ChangeFlaggedWithinOneBatchThenReconverges) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset ds = generate_dataset(SmallPiecewise({10}), seed);
    const StMissTracker tr = track_dataset(ds, DetectConfig());
    ASSERT_EQ(tr.detections().size(), 1u) << seed;
    const Index first_after = 11;  // 1-based batch holding the new subspace
    EXPECT_GE(tr.detections()[0], first_after);
    EXPECT_LE(tr.detections()[0], first_after + 1);
    const Index K = updates_to_converge(0.01);
    EXPECT_LE(tr.history()[static_cast<std::size_t>(first_after + K - 1)].dist, 2.0 * 0.01 * 3.0);
  }
}

TEST(Detect, TinyChangeDoesNotCrash) {
  ModelConfig c = SmallPiecewise({});
  c.kind = ChangeKind::kRotation;
  c.delta = 0.0;
  const Dataset ds = generate_dataset(c, 2);
  EXPECT_NO_THROW(track_dataset(ds, DetectConfig()));
}

TEST(Detect, EstimatedThresholdModeRuns) {
  const Dataset ds = generate_dataset(SmallPiecewise({10}), 3);
  TrackerConfig tc = DetectConfig();
  tc.detection->mode = ThresholdMode::kEstimated;
  const StMissTracker tr = track_dataset(ds, tc);
  EXPECT_GT(tr.lambda_plus_estimate(), 0.0);
  ASSERT_FALSE(tr.detections().empty());
  EXPECT_LE(tr.detections()[0], 12);
}

TEST(Csv, HeaderAndRows) {
  const Dataset ds = generate_dataset(SmallRotation(), 1);
  const StMissTracker tr = track_dataset(ds, TrackerConfig{});
  std::ostringstream os;
  write_tracker_csv(os, tr.history());
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "j,t_start,dist,bound,mean_recon_err,refined_recon_err,phase,detected,elapsed_ms");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, ds.num_batches());
}

}  // namespace
}  // namespace subtrack
