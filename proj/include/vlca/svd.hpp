// SPDX-License-Identifier: Apache-2.0
//
// Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
// Accurate to working precision for the small per-class matrices the
// low-rank loss works on, including tiny singular values.
#pragma once

#include "vlca/core.hpp"
#include "vlca/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace vlca {

/// M = U diag(sigma) V^T with r = min(p, q), sigma nonincreasing.
struct SvdFactors {
  Matrix u;      // p x r
  Vector sigma;  // r
  Matrix v;      // q x r
};

namespace detail {

// Columns of `a` (rows >= cols) are rotated in place until mutually
// orthogonal; `v` accumulates the rotations.
inline void jacobi_orthogonalize(Matrix& a, Matrix& v, int max_sweeps) {
  const Eigen::Index n = a.cols();
  constexpr double tol = std::numeric_limits<double>::epsilon();
  // columns this small are zero to working precision; rotating them against
  // the others only shuffles roundoff and can keep the sweep from settling
  const double negligible = tol * tol * a.squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = a.col(i).squaredNorm();
        const double beta = a.col(j).squaredNorm();
        const double gamma = a.col(i).dot(a.col(j));
        if (alpha <= negligible || beta <= negligible) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          const double x = a(r, i), y = a(r, j);
          a(r, i) = c * x - s * y;
          a(r, j) = s * x + c * y;
        }
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
          const double x = v(r, i), y = v(r, j);
          v(r, i) = c * x - s * y;
          v(r, j) = s * x + c * y;
        }
      }
    }
    if (!rotated) return;
  }
  throw Error(Errc::ConvergenceFailure, "Jacobi SVD did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

// Replace the columns of `u` flagged in `missing` by unit vectors orthogonal
// to every other column (Gram-Schmidt against the standard basis).
inline void complete_orthonormal(Matrix& u, const std::vector<bool>& missing) {
  const Eigen::Index p = u.rows();
  Eigen::Index next_basis = 0;
  for (Eigen::Index col = 0; col < u.cols(); ++col) {
    if (!missing[static_cast<std::size_t>(col)]) continue;
    bool done = false;
    while (!done && next_basis < p) {
      Vector cand = Vector::Unit(p, next_basis++);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index other = 0; other < u.cols(); ++other)
          if (other != col && (!missing[static_cast<std::size_t>(other)] || other < col))
            cand -= u.col(other).dot(cand) * u.col(other);
      const double nrm = cand.norm();
      if (nrm > 1e-8) {
        u.col(col) = cand / nrm;
        done = true;
      }
    }
  }
}

}  // namespace detail

inline SvdFactors svd(const Matrix& m, int max_sweeps = 60) {
  if (!m.allFinite()) throw Error(Errc::InvalidArgument, "svd input has non-finite entries");
  if (m.rows() == 0 || m.cols() == 0) throw Error(Errc::DimensionMismatch, "svd of an empty matrix");
  const bool transposed = m.rows() < m.cols();
  Matrix a = transposed ? Matrix(m.transpose()) : m;
  const Eigen::Index r = a.cols();
  Matrix v = Matrix::Identity(r, r);
  detail::jacobi_orthogonalize(a, v, max_sweeps);

  Vector norms(r);
  for (Eigen::Index j = 0; j < r; ++j) norms(j) = a.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return norms(x) > norms(y); });

  SvdFactors f;
  f.sigma.resize(r);
  Matrix left(a.rows(), r), right(r, r);
  std::vector<bool> missing(static_cast<std::size_t>(r), false);
  const double cutoff = norms.maxCoeff() * std::numeric_limits<double>::epsilon() * static_cast<double>(a.rows());
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto j = order[static_cast<std::size_t>(k)];
    f.sigma(k) = norms(j);
    right.col(k) = v.col(j);
    if (norms(j) > cutoff && norms(j) > 0.0) {
      left.col(k) = a.col(j) / norms(j);
    } else {
      left.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  detail::complete_orthonormal(left, missing);

  if (transposed) {
    f.u = std::move(right);
    f.v = std::move(left);
  } else {
    f.u = std::move(left);
    f.v = std::move(right);
  }
  return f;
}

/// Count of singular values above rel_tol * sigma_1.
inline int numerical_rank(const Vector& sigma, double rel_tol = 1e-10) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > rel_tol * sigma(0)) ++r;
  return r;
}

}  // namespace vlca
