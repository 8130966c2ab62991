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
#include <filesystem>

#include <gtest/gtest.h>

#include "subtrack/dataset_io.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {
namespace {

ModelConfig SmallRotation() {
  ModelConfig c;
  c.n = 60;
  c.d = 200;
  c.r = 3;
  c.alpha = 20;
  c.delta = 1e-3;
  c.mask.rho = 0.9;
  return c;
}

TEST(Rotation, ZeroDeltaIsConstant) {
  const auto seq = gen_rotation_sequence(20, 3, 0.0, 10, 4);
  for (const Matrix& P : seq) EXPECT_LT(dist(P, seq.front()), 1e-14);
}

TEST(Rotation, StepsAreOrthonormalAndBounded) {
  const double delta = 1e-3;
  const auto seq = gen_rotation_sequence(50, 4, delta, 40, 9);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    EXPECT_LE(orthonormality_error(seq[t]), 1e-12);
    // A unit-norm generator moves the subspace by at most sin(delta).
    EXPECT_LE(dist(seq[t - 1], seq[t]), std::sin(delta) * (1.0 + 1e-8));
    EXPECT_GE(dist(seq[t - 1], seq[t]), 0.5 * delta);
  }
}

TEST(Rotation, PlanarRotationMatchesClosedForm) {
  const double theta = 0.37;
  Matrix P = Matrix::Zero(4, 1);
  P(0, 0) = 1.0;
  Matrix B = Matrix::Zero(4, 4);
  B(0, 2) = -1.0;
  B(2, 0) = 1.0;
  const Matrix P2 = rotate_basis(P, B, -theta);
  EXPECT_NEAR(dist(P, P2), std::abs(std::sin(theta)), 1e-14);
  EXPECT_NEAR(std::abs(P2(0, 0)), std::cos(theta), 1e-14);
  EXPECT_NEAR(std::abs(P2(2, 0)), std::sin(theta), 1e-14);
}

TEST(Rotation, WalkerAgreesWithDenseExponential) {
  // The walker's closed form must equal expm of the dense generator.
  Stream init(1, "walker");
  const Matrix P0 = random_basis(12, 3, init);
  RotationWalker walker(P0, 0.05, 77, SkewScale::kUnit);
  walker.step(1);
  Stream stream(77, "skew", 1);
  Matrix Q = project_out(P0, stream.gaussian(12, 3));
  Q /= spectral_norm(Q);
  const Matrix B = Q * P0.transpose() - P0 * Q.transpose();
  EXPECT_NEAR(spectral_norm(B), 1.0, 1e-12);
  EXPECT_LT(dist(walker.current(), rotate_basis(P0, B, 0.05)), 1e-12);
}

TEST(Piecewise, ConstantAndChanges) {
  const auto flat = gen_piecewise_sequence(10, 2, 5, {}, 3);
  for (const Matrix& P : flat) EXPECT_LT(dist(P, flat.front()), 1e-14);
  const auto ortho = gen_piecewise_sequence(6, 2, 8, {4}, 3, 1, true);
  EXPECT_LT(dist(ortho[0], ortho[3]), 1e-14);
  EXPECT_NEAR(dist(ortho[3], ortho[4]), 1.0, 1e-12);
  EXPECT_THROW(gen_piecewise_sequence(10, 2, 20, {4, 6}, 3, 3), InvalidSpacing);
  EXPECT_THROW(gen_piecewise_sequence(10, 2, 20, {0}, 3), InvalidSpacing);
}

TEST(Coefficients, UniformVarianceMatchesClosedForm) {
  CoefficientModel m;
  m.lambda_minus = m.lambda_plus = 4.0 / 3.0;  // uniform on [-2, 2]
  double sum = 0.0, sum2 = 0.0;
  const int N = 100000;
  for (int t = 0; t < N; ++t) {
    const double a = draw_coefficients(1, m, 5, static_cast<std::uint64_t>(t))(0);
    EXPECT_LE(std::abs(a), 2.0);
    sum += a;
    sum2 += a * a;
  }
  const double var = sum2 / N - (sum / N) * (sum / N);
  EXPECT_NEAR(var / (4.0 / 3.0), 1.0, 0.05);
  EXPECT_NEAR(sum / N, 0.0, 0.02);
}

TEST(Coefficients, ResidualZeroAndOrthogonal) {
  const auto seq = gen_rotation_sequence(30, 3, 0.0, 1, 1);
  std::vector<Matrix> subs(5, seq[0]);
  CoefficientModel m;
  auto [A, V] = gen_coefficients_and_residual(subs, 10, m, 2);
  EXPECT_EQ(V.norm(), 0.0);
  EXPECT_EQ(A.cols(), 50);
  m.lambda_v_plus = 0.01;
  m.r_v = 4;
  std::tie(A, V) = gen_coefficients_and_residual(subs, 10, m, 2);
  EXPECT_LT((seq[0].transpose() * V).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(V.colwise().squaredNorm().maxCoeff(), 3.0 * 4 * 0.01);
  m.lambda_v_plus = 2.0;
  EXPECT_THROW(gen_coefficients_and_residual(subs, 10, m, 2), ConfigError);
}

TEST(Masks, BernoulliFractions) {
  MaskParams p;
  p.rho = 1.0;
  for (const auto& m : gen_masks(50, 20, p, 1)) EXPECT_TRUE(m.empty());
  p.rho = 0.9;
  const auto masks = gen_masks(1000, 3000, p, 1);
  std::size_t total = 0;
  for (const auto& m : masks) {
    total += m.size();
    EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
  }
  EXPECT_NEAR(static_cast<double>(total) / 3e6, 0.1, 0.01);
}

TEST(Masks, BoundedRespectsBothFractions) {
  MaskParams p;
  p.mode = MaskMode::kBounded;
  p.col_frac = 0.05;
  p.row_frac = 0.1;
  p.alpha = 40;
  const auto masks = gen_masks(200, 160, p, 3);
  std::vector<int> load(200, 0);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    if (t % 40 == 0) std::fill(load.begin(), load.end(), 0);
    EXPECT_EQ(masks[t].size(), 10u);
    for (Index i : masks[t]) EXPECT_LE(++load[i], 4);
  }
  p.row_frac = 0.01;
  EXPECT_THROW(gen_masks(200, 160, p, 3), InfeasibleFractions);
}

TEST(Masks, AssumedRegimeFractions) {
  // Column fraction 0.01/(mu r) and row fraction 1e-4/f^2 with mu r = 1, f = 1.
  MaskParams p;
  p.mode = MaskMode::kBounded;
  p.col_frac = 0.01;
  p.row_frac = 0.2;
  p.alpha = 100;
  const auto masks = gen_masks(1000, 300, p, 8);
  std::vector<int> load(1000, 0);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    if (t % 100 == 0) std::fill(load.begin(), load.end(), 0);
    EXPECT_LE(static_cast<double>(masks[t].size()) / 1000.0, 0.01);
    for (Index i : masks[t]) EXPECT_LE(++load[i] / 100.0, 0.2);
  }
}

TEST(Outliers, FractionsMagnitudesAndDisjointness) {
  MaskParams mp;
  mp.rho = 0.9;
  const auto masks = gen_masks(100, 60, mp, 2);
  OutlierParams op;
  const auto none = gen_outliers(100, 60, op, masks, 2);
  for (const auto& s : none.support) EXPECT_TRUE(s.empty());
  op.col_frac = 0.05;
  op.row_frac = 0.2;
  op.s_min = 3.0;
  op.s_max = 6.0;
  op.alpha = 20;
  op.clean_first_batch = true;
  const auto out = gen_outliers(100, 60, op, masks, 2);
  double smallest = 1e300;
  for (std::size_t t = 0; t < 60; ++t) {
    if (t < 20) EXPECT_TRUE(out.support[t].empty());
    else EXPECT_EQ(out.support[t].size(), 5u);
    for (std::size_t k = 0; k < out.support[t].size(); ++k) {
      EXPECT_FALSE(std::binary_search(masks[t].begin(), masks[t].end(), out.support[t][k]));
      const double mag = std::abs(out.values[t](static_cast<Index>(k)));
      EXPECT_GE(mag, 3.0);
      EXPECT_LE(mag, 6.0);
      smallest = std::min(smallest, mag);
    }
  }
  EXPECT_EQ(smallest, 3.0);
}

TEST(Assemble, EntrywiseReconstruction) {
  ModelConfig c = SmallRotation();
  c.outlier.col_frac = 0.05;
  c.outlier.row_frac = 0.2;
  c.outlier.s_min = 2.0;
  c.outlier.s_max = 4.0;
  const Dataset ds = generate_dataset(c, 12);
  for (Index t = 0; t < c.d; ++t) {
    Vector expect = ds.Ltilde.col(t);
    for (Index i : ds.missing[t]) expect(i) = 0.0;
    for (std::size_t k = 0; k < ds.outliers.support[t].size(); ++k)
      expect(ds.outliers.support[t][k]) += ds.outliers.values[t](static_cast<Index>(k));
    ASSERT_EQ((ds.Y.col(t) - expect).norm(), 0.0);
  }
  Matrix L = Matrix::Ones(3, 2);
  std::vector<IndexSet> masks = {{}, {0, 1, 2}};
  const Matrix Y = assemble_observations(L, masks, nullptr);
  EXPECT_EQ(Y.col(1).norm(), 0.0);
  EXPECT_EQ(Y.col(0), L.col(0));
  EXPECT_THROW(assemble_observations(L, {{}}, nullptr), DimensionMismatch);
}

TEST(Dataset, AuditAndSvdSplit) {
  ModelConfig c = SmallRotation();
  c.coef.lambda_v_plus = 1e-4;
  const Dataset ds = generate_dataset(c, 3);
  EXPECT_TRUE(ds.stats.audit_pass);
  for (Index j = 0; j < ds.num_batches(); ++j) {
    const Matrix Lt = ds.Ltilde.middleCols(j * c.alpha, c.alpha);
    const Matrix Lj = ds.P[j] * (ds.P[j].transpose() * Lt);
    EXPECT_LT((Lj * (Lt - Lj).transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_GT(ds.stats.delta_tv, 0.0);
  EXPECT_LT(ds.stats.noise_level, 1.0);
}

TEST(Dataset, DeterministicAndPiecewise) {
  const ModelConfig c = SmallRotation();
  EXPECT_EQ(generate_dataset(c, 5).Y, generate_dataset(c, 5).Y);
  EXPECT_NE(generate_dataset(c, 5).Y, generate_dataset(c, 6).Y);
  ModelConfig pc = c;
  pc.kind = ChangeKind::kPiecewise;
  pc.change_batches = {5};
  const Dataset ds = generate_dataset(pc, 5);
  EXPECT_LT(ds.stats.delta_tv, 1e-10);
  EXPECT_GT(ds.stats.delta_large, 0.5);
}

TEST(DatasetIo, BitExactRoundTrip) {
  ModelConfig c = SmallRotation();
  c.outlier.col_frac = 0.05;
  c.outlier.row_frac = 0.2;
  c.outlier.s_min = 2.0;
  c.outlier.s_max = 4.0;
  c.coef.lambda_v_plus = 1e-3;
  const Dataset ds = generate_dataset(c, 21);
  const auto dir = std::filesystem::temp_directory_path() / "subtrack_io_test";
  std::filesystem::remove_all(dir);
  export_dataset(ds, dir);
  const Dataset back = import_dataset(dir);
  EXPECT_EQ(back.Y, ds.Y);
  EXPECT_EQ(back.Ltilde, ds.Ltilde);
  EXPECT_EQ(back.A, ds.A);
  EXPECT_EQ(back.V, ds.V);
  ASSERT_EQ(back.P.size(), ds.P.size());
  for (std::size_t j = 0; j < ds.P.size(); ++j) EXPECT_EQ(back.P[j], ds.P[j]);
  EXPECT_EQ(back.missing, ds.missing);
  EXPECT_EQ(back.outliers.support, ds.outliers.support);
  for (std::size_t t = 0; t < ds.outliers.values.size(); ++t)
    EXPECT_EQ(back.outliers.values[t], ds.outliers.values[t]);
  EXPECT_EQ(back.stats.delta_tv, ds.stats.delta_tv);
  EXPECT_EQ(back.seed, ds.seed);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace subtrack
