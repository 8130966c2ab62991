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

#include <gtest/gtest.h>

#include "subtrack/linalg.hpp"
#include "subtrack/oracle/jacobi.hpp"

namespace subtrack {
namespace {

Matrix DenseProjectedLs(const Matrix& P, const Vector& y, const IndexSet& M) {
  const Index n = P.rows();
  const Matrix psi = Matrix::Identity(n, n) - P * P.transpose();
  Matrix IM = Matrix::Zero(n, static_cast<Index>(M.size()));
  for (std::size_t i = 0; i < M.size(); ++i) IM(M[i], static_cast<Index>(i)) = 1.0;
  const Matrix psiM = psi * IM;
  const Matrix normal = psiM.transpose() * psiM;
  return y - IM * normal.ldlt().solve(psiM.transpose() * (psi * y));
}

IndexSet RandomSubset(Index n, Index m, Stream& s) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < m; ++i) std::swap(all[i], all[i + static_cast<Index>(s.below(n - i))]);
  IndexSet out(all.begin(), all.begin() + m);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Qr, IdentityAndScaling) {
  auto qr = qr_orthonormalize(Matrix::Identity(3, 3));
  EXPECT_LT((qr.Q - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((qr.R - Matrix::Identity(3, 3)).norm(), 1e-15);
  qr = qr_orthonormalize(2.0 * Matrix::Identity(2, 2));
  EXPECT_LT((qr.Q - Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT((qr.R - 2.0 * Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Qr, MatchesGramSchmidt) {
  Stream s(11, "qr-test");
  const Matrix M = s.gaussian(6, 3);
  const auto qr = qr_orthonormalize(M);
  Matrix Qg, Rg;
  oracle::gram_schmidt(M, Qg, Rg);
  EXPECT_LE((M - qr.Q * qr.R).norm() / M.norm(), 1e-10);
  EXPECT_LE(orthonormality_error(qr.Q), 1e-10);
  EXPECT_LT((qr.Q - Qg).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((qr.R - Rg).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Qr, PropertyOrthonormalOnRandomShapes) {
  for (int trial = 0; trial < 200; ++trial) {
    Stream s(trial, "qr-prop");
    const Index n = 1 + static_cast<Index>(s.below(20));
    const Index r = 1 + static_cast<Index>(s.below(static_cast<std::uint64_t>(n)));
    const Matrix M = s.gaussian(n, r);
    const auto qr = qr_orthonormalize(M);
    ASSERT_LE(orthonormality_error(qr.Q), 1e-10);
    ASSERT_LE((M - qr.Q * qr.R).norm() / M.norm(), 1e-10);
    for (Index i = 0; i < r; ++i) ASSERT_GE(qr.R(i, i), 0.0);
  }
}

TEST(Qr, RankDeficientThrows) {
  Matrix M(4, 2);
  M << 1, 2, 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(qr_orthonormalize(M), RankDeficient);
  EXPECT_THROW(qr_orthonormalize(Matrix::Zero(3, 2)), RankDeficient);
}

TEST(RSvd, Diagonal) {
  const Matrix M = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
  const auto res = r_svd(M, 2);
  Matrix E = Matrix::Zero(3, 2);
  E(0, 0) = E(1, 1) = 1.0;
  EXPECT_LT(dist(res.basis, E), 1e-12);
  EXPECT_NEAR(res.values(0), 3.0, 1e-12);
  EXPECT_NEAR(res.values(1), 2.0, 1e-12);
  EXPECT_FALSE(res.no_gap);
}

TEST(RSvd, ExactLowRank) {
  Stream s(3, "lowrank");
  const Matrix P = random_basis(40, 4, s);
  const Matrix M = P * s.gaussian(4, 25);
  EXPECT_LT(dist(r_svd(M, 4).basis, P), 1e-10);
  const Matrix W = P * s.gaussian(4, 100);
  EXPECT_LT(dist(r_svd(W, 4).basis, P), 1e-10);
}

TEST(RSvd, MatchesJacobiOracle) {
  Stream s(8, "rsvd-jacobi");
  const Matrix M = s.gaussian(8, 5);
  const auto res = r_svd(M, 3);
  const auto ref = oracle::jacobi_left_svd(M, 3);
  EXPECT_LT(dist(res.basis, ref.vectors), 1e-10);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(res.values(i) / ref.values(i), 1.0, 1e-8);
}

TEST(RSvd, PropertyAgreesWithJacobiUpTo12) {
  for (int trial = 0; trial < 100; ++trial) {
    Stream s(trial, "rsvd-prop");
    const Index n = 1 + static_cast<Index>(s.below(12));
    const Index d = 1 + static_cast<Index>(s.below(12));
    const Index r = 1 + static_cast<Index>(s.below(static_cast<std::uint64_t>(std::min(n, d))));
    const Matrix M = s.gaussian(n, d);
    const auto res = r_svd(M, r);
    const auto ref = oracle::jacobi_left_svd(M, r);
    ASSERT_LT(oracle::jacobi_proj_dist(res.basis, ref.vectors), 1e-8) << n << "x" << d << " r=" << r;
    ASSERT_LE(orthonormality_error(res.basis), 1e-10);
  }
}

TEST(RSvd, WideAndTallLargeBlocks) {
  Stream s(5, "rsvd-big");
  const Matrix M = s.gaussian(60, 300);
  const auto res = r_svd(M, 5);
  const auto ref = oracle::jacobi_left_svd(M, 5);
  EXPECT_LT(dist(res.basis, ref.vectors), 1e-8);
  const Matrix T = s.gaussian(200, 40);
  const auto rt = r_svd(T, 7);
  const auto reft = oracle::jacobi_left_svd(T, 7);
  EXPECT_LT(dist(rt.basis, reft.vectors), 1e-8);
}

TEST(RSvd, TieSetsNoGap) {
  const Matrix M = Matrix::Identity(4, 4);
  const auto res = r_svd(M, 2);
  EXPECT_TRUE(res.no_gap);
  EXPECT_LE(orthonormality_error(res.basis), 1e-12);
}

TEST(RSvd, ZeroMatrixIsRankDeficient) {
  EXPECT_THROW(r_svd(Matrix::Zero(5, 3), 2), RankDeficient);
  EXPECT_THROW(r_svd(Matrix::Zero(5, 3), 4), DimensionMismatch);
}

TEST(Dist, TrivialCases) {
  Stream s(1, "dist");
  const Matrix P = random_basis(5, 2, s);
  EXPECT_LT(dist(P, P), 1e-7);
  Matrix e1 = Matrix::Zero(2, 1), e2 = Matrix::Zero(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  EXPECT_DOUBLE_EQ(dist(e1, e2), 1.0);
  EXPECT_THROW(dist(e1, Matrix::Identity(3, 1)), DimensionMismatch);
}

TEST(Dist, MatchesPrincipalAngleOracle) {
  Stream s(6, "dist-oracle");
  const Matrix P1 = random_basis(6, 2, s);
  const Matrix P2 = random_basis(6, 2, s);
  EXPECT_NEAR(dist(P1, P2), oracle::jacobi_dist(P1, P2), 1e-10);
}

TEST(Dist, PropertySymmetricBoundedRotationInvariant) {
  for (int trial = 0; trial < 200; ++trial) {
    Stream s(trial, "dist-prop");
    const Index n = 2 + static_cast<Index>(s.below(15));
    const Index r = 1 + static_cast<Index>(s.below(static_cast<std::uint64_t>(n - 1)));
    const Matrix P1 = random_basis(n, r, s);
    const Matrix P2 = random_basis(n, r, s);
    const Matrix O = random_basis(r, r, s);
    const double d12 = dist(P1, P2);
    ASSERT_GE(d12, 0.0);
    ASSERT_LE(d12, 1.0);
    ASSERT_NEAR(d12, dist(P2, P1), 1e-10);
    ASSERT_NEAR(d12, dist(P1 * O, P2), 1e-10);
    ASSERT_NEAR(d12, dist(P1, P2 * O), 1e-10);
  }
}

TEST(SpectralNorm, Cases) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 5.0;
  D(1, 1) = 1.0;
  EXPECT_NEAR(spectral_norm(D), 5.0, 1e-14);
  EXPECT_EQ(spectral_norm(Matrix::Zero(3, 4)), 0.0);
  Stream s(7, "spec");
  const Matrix M = s.gaussian(7, 4);
  EXPECT_NEAR(spectral_norm(M) / oracle::jacobi_spectral_norm(M), 1.0, 1e-8);
}

TEST(SpectralNorm, NearTiesStayAccurate) {
  Matrix D = Matrix::Identity(5, 5);
  D(0, 0) = 1.0 + 1e-9;
  D(1, 1) = 1.0;
  Stream s(2, "ties");
  const Matrix Q = random_basis(5, 5, s);
  EXPECT_NEAR(spectral_norm(Q * D * Q.transpose()), 1.0 + 1e-9, 1e-13);
}

TEST(MaskedProjectedLs, EmptyMaskReturnsInput) {
  Stream s(4, "ls");
  const Matrix P = random_basis(10, 2, s);
  const Vector y = s.gaussian(10, 1);
  EXPECT_EQ((masked_projected_ls(P, y, {}) - y).norm(), 0.0);
}

TEST(MaskedProjectedLs, ExactSubspaceGivesPerfectFill) {
  Stream s(5, "ls-exact");
  const Matrix P = random_basis(50, 3, s);
  const Vector l = P * s.gaussian(3, 1);
  const IndexSet M = RandomSubset(50, 8, s);
  Vector y = l;
  for (Index i : M) y(i) = 0.0;
  EXPECT_LT((masked_projected_ls(P, y, M) - l).norm(), 1e-12);
}

TEST(MaskedProjectedLs, PropertyMatchesDenseFormula) {
  for (int trial = 0; trial < 100; ++trial) {
    Stream s(trial, "ls-prop");
    const Index n = 10 + static_cast<Index>(s.below(40));
    const Index r = 1 + static_cast<Index>(s.below(4));
    const Index m = static_cast<Index>(s.below(static_cast<std::uint64_t>(n / 3)));
    const Matrix P = random_basis(n, r, s);
    const Matrix Phat = qr_orthonormalize(P + 0.1 * s.gaussian(n, r)).Q;
    const Vector lt = P * s.gaussian(r, 1) + 0.01 * s.gaussian(n, 1);
    const IndexSet M = RandomSubset(n, m, s);
    Vector y = lt;
    for (Index i : M) y(i) = 0.0;
    const Vector got = masked_projected_ls(Phat, y, M);
    const Vector want = DenseProjectedLs(Phat, y, M);
    ASSERT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10);
    for (Index i = 0; i < n; ++i)
      if (!std::binary_search(M.begin(), M.end(), i)) {
        ASSERT_EQ(got(i), y(i));
      }
  }
}

TEST(MaskedProjectedLs, IllConditionedThrows) {
  Matrix P = Matrix::Zero(6, 1);
  P(2, 0) = 1.0;
  Vector y = Vector::Ones(6);
  y(2) = 0.0;
  EXPECT_THROW(masked_projected_ls(P, y, {2}), IllConditioned);
}

TEST(Incoherence, Extremes) {
  Matrix E = Matrix::Zero(8, 2);
  E(0, 0) = E(1, 1) = 1.0;
  EXPECT_DOUBLE_EQ(incoherence(E), 4.0);
  Matrix H(4, 2);
  H << 1, 1, 1, -1, 1, 1, 1, -1;
  H /= 2.0;
  EXPECT_NEAR(incoherence(H), 1.0, 1e-15);
}

TEST(Incoherence, RandomBasesAreIncoherent) {
  // Monte Carlo over 100 seeds; the observed maximum is about 2.2 log n.
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Stream s(seed, "mu");
    worst = std::max(worst, incoherence(random_basis(1000, 30, s)));
  }
  EXPECT_LE(worst, 5.0 * std::log(1000.0));
}

TEST(Expm, SkewGivesOrthogonal) {
  Stream s(9, "expm");
  const Matrix G = s.gaussian(7, 7);
  const Matrix B = G - G.transpose();
  const Matrix E = expm(0.3 * B);
  EXPECT_LT(orthonormality_error(E), 1e-12);
  Matrix A = Matrix::Zero(2, 2);
  A(0, 1) = -0.7;
  A(1, 0) = 0.7;
  const Matrix R = expm(A);
  EXPECT_NEAR(R(0, 0), std::cos(0.7), 1e-15);
  EXPECT_NEAR(R(1, 0), std::sin(0.7), 1e-15);
}

}  // namespace
}  // namespace subtrack
