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


// Dense kernels shared by every tracker: Householder QR, truncated SVD by
// orthogonal iteration, subspace distance, projected least squares.

#ifndef SUBTRACK_LINALG_HPP_
#define SUBTRACK_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subtrack/error.hpp"
#include "subtrack/rng.hpp"

namespace subtrack {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
// Sorted, duplicate-free row indices.
using IndexSet = std::vector<Index>;

struct QrResult {
  Matrix Q;  // n x m, orthonormal columns
  Matrix R;  // m x m, upper triangular with non-negative diagonal
};

struct SvdResult {
  Matrix basis;
  Vector values;  // non-increasing
  bool no_gap = false;
  int iterations = 0;
};

// Reduced Householder QR without a rank check. Requires rows >= cols.
inline QrResult householder_qr(const Matrix& M) {
  const Index n = M.rows();
  const Index m = M.cols();
  if (n < m) throw DimensionMismatch("householder_qr needs rows >= cols");
  Matrix A = M;
  std::vector<Vector> reflectors(static_cast<std::size_t>(m));
  std::vector<double> betas(static_cast<std::size_t>(m), 0.0);
  for (Index k = 0; k < m; ++k) {
    Vector v = A.col(k).tail(n - k);
    const double norm = v.norm();
    if (norm == 0.0) {
      reflectors[k] = Vector::Zero(n - k);
      continue;
    }
    const double alpha = -std::copysign(norm, v(0));
    v(0) -= alpha;
    const double vv = v.squaredNorm();
    const double beta = 2.0 / vv;
    auto block = A.block(k, k, n - k, m - k);
    const Eigen::RowVectorXd w = v.transpose() * block;
    block.noalias() -= (beta * v) * w;
    reflectors[k] = std::move(v);
    betas[k] = beta;
  }
  QrResult out;
  out.R = A.topRows(m).triangularView<Eigen::Upper>();
  out.Q = Matrix::Identity(n, m);
  for (Index k = m - 1; k >= 0; --k) {
    if (betas[k] == 0.0) continue;
    const Vector& v = reflectors[k];
    auto block = out.Q.block(k, 0, n - k, m);
    const Eigen::RowVectorXd w = v.transpose() * block;
    block.noalias() -= (betas[k] * v) * w;
  }
  for (Index i = 0; i < m; ++i) {
    if (out.R(i, i) < 0.0) {
      out.R.row(i) *= -1.0;
      out.Q.col(i) *= -1.0;
    }
  }
  return out;
}

// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
inline std::pair<Vector, Matrix> sym_eig_desc(const Matrix& H) {
  const Matrix S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Index m = S.rows();
  Vector vals(m);
  Matrix vecs(m, m);
  for (Index i = 0; i < m; ++i) {
    vals(i) = es.eigenvalues()(m - 1 - i);
    vecs.col(i) = es.eigenvectors().col(m - 1 - i);
  }
  return {vals, vecs};
}

// Largest eigenvalue of a symmetric positive semidefinite matrix. Power
// iteration on repeated squares, then a Rayleigh quotient with the original.
inline double top_eigenvalue_psd(const Matrix& C) {
  const Index m = C.rows();
  if (m == 0) return 0.0;
  if (m == 1) return std::max(0.0, C(0, 0));
  const double tr = C.trace();
  if (!(tr > 0.0)) return 0.0;
  Matrix S = C / tr;
  for (int it = 0; it < 64; ++it) {
    Matrix S2 = S * S;
    const double t = S2.trace();
    if (!(t > 0.0)) break;
    S2 /= t;
    const double change = (S2 - S).cwiseAbs().maxCoeff();
    S = std::move(S2);
    if (change < 1e-15) break;
  }
  Index best = 0;
  S.colwise().squaredNorm().maxCoeff(&best);
  Vector v = S.col(best);
  if (!(v.norm() > 0.0)) v = Vector::Ones(m);
  v.normalize();
  for (int it = 0; it < 3; ++it) {
    Vector w = C * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
  }
  return std::max(0.0, v.dot(C * v));
}

// Largest singular value, from the smaller Gram matrix.
inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  if (M.cols() <= M.rows()) return std::sqrt(top_eigenvalue_psd(M.transpose() * M));
  return std::sqrt(top_eigenvalue_psd(M * M.transpose()));
}

// x -> x - P (P^T x), the projector onto the orthogonal complement of span(P).
inline Matrix project_out(const Matrix& P, const Matrix& X) {
  return X - P * (P.transpose() * X);
}

inline double dist(const Matrix& P1, const Matrix& P2) {
  if (P1.rows() != P2.rows())
    throw DimensionMismatch("dist: ambient dimensions " + std::to_string(P1.rows()) + " vs " +
                            std::to_string(P2.rows()));
  return std::clamp(spectral_norm(project_out(P1, P2)), 0.0, 1.0);
}

inline double orthonormality_error(const Matrix& P) {
  return (P.transpose() * P - Matrix::Identity(P.cols(), P.cols())).cwiseAbs().maxCoeff();
}

inline QrResult qr_orthonormalize(const Matrix& M) {
  if (M.cols() == 0 || M.rows() < M.cols())
    throw RankDeficient("matrix has more columns than rows");
  QrResult qr = householder_qr(M);
  Eigen::JacobiSVD<Matrix> svd(qr.R);
  const Vector s = svd.singularValues();
  if (!(s(0) > 0.0) || s(s.size() - 1) <= 1e-12 * s(0))
    throw RankDeficient("smallest singular value " + std::to_string(s(s.size() - 1)) +
                        " vs largest " + std::to_string(s(0)));
  return qr;
}

inline SvdResult r_svd(const Matrix& M, Index r) {
  const Index n = M.rows();
  const Index d = M.cols();
  if (r < 1 || r > std::min(n, d))
    throw DimensionMismatch("r_svd: rank " + std::to_string(r) + " for a " + std::to_string(n) +
                            "x" + std::to_string(d) + " matrix");
  // Reduce to a k x k Gram matrix whose eigenvectors give the left singular
  // vectors (after lifting by Q when d <= n).
  Matrix lift;
  Matrix G;
  if (d <= n) {
    QrResult qr = householder_qr(M);
    G = qr.R * qr.R.transpose();
    lift = std::move(qr.Q);
  } else {
    QrResult qr = householder_qr(M.transpose());
    G = qr.R.transpose() * qr.R;
  }
  const Index k = G.rows();
  const Index p = std::min(k, r + std::max<Index>(r, 8));

  Matrix X;
  if (p == k) {
    X = Matrix::Identity(k, k);
  } else {
    Stream stream(0x5eed, "r_svd");
    X = householder_qr(G * stream.gaussian(k, p)).Q;
  }
  const double scale = std::max(G.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  Vector theta;
  Matrix Xr_prev;
  SvdResult out;
  for (int it = 1; it <= 10000; ++it) {
    if (p < k) X = householder_qr(G * X).Q;
    auto [vals, vecs] = sym_eig_desc(X.transpose() * G * X);
    X = X * vecs;
    theta = vals;
    out.iterations = it;
    if (p == k) break;
    const Matrix Xr = X.leftCols(r);
    const double resid =
        (G * Xr - Xr * theta.head(r).asDiagonal()).cwiseAbs().maxCoeff() / scale;
    const bool settled = Xr_prev.size() > 0 && dist(Xr_prev, Xr) <= 1e-14;
    if (resid <= 1e-13 || settled) break;
    Xr_prev = Xr;
  }
  out.values = theta.head(r).cwiseMax(0.0).cwiseSqrt();
  const double s1 = out.values(0);
  if (!(s1 > 0.0) || out.values(r - 1) < 1e-14 * s1)
    throw RankDeficient("sigma_r = " + std::to_string(out.values(r - 1)) +
                        ", sigma_1 = " + std::to_string(s1));
  if (p > r) {
    const double next = std::sqrt(std::max(0.0, theta(r)));
    out.no_gap = next / out.values(r - 1) > 1.0 - 1e-10;
  }
  out.basis = lift.size() > 0 ? Matrix(lift * X.leftCols(r)) : Matrix(X.leftCols(r));
  return out;
}

// l = y - I_M (Psi_M)^+ (Psi y) with Psi = I - P P^T applied as an operator.
// The |M| x |M| normal matrix I - P_M P_M^T is inverted through the r x r
// Gram matrix of P_M.
inline Vector masked_projected_ls(const Matrix& P, const Vector& y, const IndexSet& M) {
  const Index n = P.rows();
  if (y.size() != n) throw DimensionMismatch("masked_projected_ls: y has wrong length");
  if (M.empty()) return y;
  const Index m = static_cast<Index>(M.size());
  const Index r = P.cols();
  const Vector psi_y = y - P * (P.transpose() * y);
  Matrix PM(m, r);
  Vector b(m);
  for (Index i = 0; i < m; ++i) {
    const Index row = M[static_cast<std::size_t>(i)];
    if (row < 0 || row >= n) throw DimensionMismatch("masked_projected_ls: index out of range");
    PM.row(i) = P.row(row);
    b(i) = psi_y(row);
  }
  Vector z;
  double lo = 0.0;
  double hi = 1.0;
  if (m <= r) {
    auto [vals, vecs] = sym_eig_desc(Matrix::Identity(m, m) - PM * PM.transpose());
    hi = vals(0);
    lo = vals(m - 1);
    if (!(lo > 0.0) || hi / lo > 1e12)
      throw IllConditioned("normal matrix condition number " + std::to_string(hi / lo));
    z = vecs * ((vecs.transpose() * b).array() / vals.array()).matrix();
  } else {
    auto [g, V] = sym_eig_desc(PM.transpose() * PM);
    lo = 1.0 - g(0);
    hi = std::max(1.0, 1.0 - g(r - 1));
    if (!(lo > 0.0) || hi / lo > 1e12)
      throw IllConditioned("normal matrix condition number " + std::to_string(hi / lo));
    const Vector c = V.transpose() * (PM.transpose() * b);
    z = b + PM * (V * (c.array() / (1.0 - g.array())).matrix());
  }
  Vector l = y;
  for (Index i = 0; i < m; ++i) l(M[static_cast<std::size_t>(i)]) -= z(i);
  return l;
}

inline double incoherence(const Matrix& P) {
  return static_cast<double>(P.rows()) / static_cast<double>(P.cols()) *
         P.rowwise().squaredNorm().maxCoeff();
}

// Scaling and squaring with a truncated Taylor series.
inline Matrix expm(const Matrix& A) {
  const Index m = A.rows();
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  while (norm1 / std::ldexp(1.0, s) > 0.5) ++s;
  const Matrix B = A / std::ldexp(1.0, s);
  Matrix E = Matrix::Identity(m, m);
  Matrix term = Matrix::Identity(m, m);
  for (int k = 1; k <= 60; ++k) {
    term = term * B / static_cast<double>(k);
    E += term;
    if (term.cwiseAbs().colwise().sum().maxCoeff() <
        1e-16 * E.cwiseAbs().colwise().sum().maxCoeff())
      break;
  }
  for (int i = 0; i < s; ++i) E = E * E;
  return E;
}

// exp(-delta B) P for a skew-symmetric n x n generator B, re-orthonormalized.
inline Matrix rotate_basis(const Matrix& P, const Matrix& B, double delta) {
  return householder_qr(expm(-delta * B) * P).Q;
}

inline Matrix random_basis(Index n, Index r, Stream& stream) {
  return qr_orthonormalize(stream.gaussian(n, r)).Q;
}

}  // namespace subtrack

#endif  // SUBTRACK_LINALG_HPP_
