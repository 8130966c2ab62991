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


// Brute-force reference routines used only by tests and acceptance suites.
// They share no code path with the production kernels.

#ifndef SUBTRACK_ORACLE_JACOBI_HPP_
#define SUBTRACK_ORACLE_JACOBI_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace subtrack::oracle {

struct EigenPairs {
  Eigen::VectorXd values;   // decreasing
  Eigen::MatrixXd vectors;  // columns match values
};

// Cyclic Jacobi rotations until every off-diagonal entry is negligible.
inline EigenPairs jacobi_eig(const Eigen::MatrixXd& S_in) {
  const Eigen::Index m = S_in.rows();
  Eigen::MatrixXd A = 0.5 * (S_in + S_in.transpose());
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(m, m);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < m; ++p)
      for (Eigen::Index q = p + 1; q < m; ++q) off += A(p, q) * A(p, q);
    if (off <= 1e-34 * std::max(1.0, A.squaredNorm())) break;
    for (Eigen::Index p = 0; p < m; ++p) {
      for (Eigen::Index q = p + 1; q < m; ++q) {
        if (A(p, q) == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < m; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < m; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < m; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return A(a, a) > A(b, b); });
  EigenPairs out{Eigen::VectorXd(m), Eigen::MatrixXd(m, m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    out.values(i) = A(order[i], order[i]);
    out.vectors.col(i) = V.col(order[i]);
  }
  return out;
}

// Top-r left singular vectors and singular values from the eigenpairs of M M^T.
inline EigenPairs jacobi_left_svd(const Eigen::MatrixXd& M, Eigen::Index r) {
  EigenPairs e = jacobi_eig(M * M.transpose());
  EigenPairs out{e.values.head(r).cwiseMax(0.0).cwiseSqrt(), e.vectors.leftCols(r)};
  return out;
}

inline double jacobi_spectral_norm(const Eigen::MatrixXd& M) {
  return std::sqrt(std::max(0.0, jacobi_eig(M.transpose() * M).values(0)));
}

// Subspace distance through principal angles: sqrt(1 - sigma_min^2(P1^T P2)).
inline double jacobi_dist(const Eigen::MatrixXd& P1, const Eigen::MatrixXd& P2) {
  const Eigen::MatrixXd C = P1.transpose() * P2;
  const EigenPairs e = jacobi_eig(C.transpose() * C);
  return std::sqrt(std::max(0.0, 1.0 - e.values(e.values.size() - 1)));
}

// ||(I - P1 P1^T) P2||_2 by Jacobi; accurate for tiny distances.
inline double jacobi_proj_dist(const Eigen::MatrixXd& P1, const Eigen::MatrixXd& P2) {
  return jacobi_spectral_norm(P2 - P1 * (P1.transpose() * P2));
}

// Modified Gram-Schmidt with R's diagonal positive by construction.
inline void gram_schmidt(const Eigen::MatrixXd& M, Eigen::MatrixXd& Q, Eigen::MatrixXd& R) {
  const Eigen::Index n = M.rows(), m = M.cols();
  Q = M;
  R = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double c = Q.col(i).dot(Q.col(j));
        R(i, j) += c;
        Q.col(j) -= c * Q.col(i);
      }
    }
    R(j, j) = Q.col(j).norm();
    Q.col(j) /= R(j, j);
  }
  (void)n;
}

}  // namespace subtrack::oracle

#endif  // SUBTRACK_ORACLE_JACOBI_HPP_
