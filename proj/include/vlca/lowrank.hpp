// SPDX-License-Identifier: Apache-2.0
//
// Intra-class low-rank constraint: per-class feature matrices are pushed
// towards rank one through the nuclear/spectral norm ratio.
#pragma once

#include "vlca/batch.hpp"
#include "vlca/core.hpp"
#include "vlca/svd.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

namespace vlca {

struct ClassGroup {
  int label = 0;
  std::vector<Eigen::Index> rows;  // indices into the batch, in batch order
  Matrix matrix;                   // rows.size() x n
};

/// One group per label present, ordered by label; rows keep batch order.
inline std::vector<ClassGroup> group_by_label(const FeatureBatch& batch) {
  batch.validate();
  std::map<int, std::vector<Eigen::Index>> by_label;
  for (Eigen::Index i = 0; i < batch.size(); ++i) by_label[batch.labels[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<ClassGroup> groups;
  groups.reserve(by_label.size());
  for (auto& [label, rows] : by_label) {
    const auto count = static_cast<Eigen::Index>(rows.size());
    ClassGroup g{label, std::move(rows), Matrix(count, batch.features.cols())};
    for (std::size_t r = 0; r < g.rows.size(); ++r) g.matrix.row(static_cast<Eigen::Index>(r)) = batch.features.row(g.rows[r]);
    groups.push_back(std::move(g));
  }
  return groups;
}

inline constexpr double kDegenerateSigma = 1e-10;

/// sum(sigma) / sigma_1 - 1. Zero exactly when the matrix has rank one.
///
/// Gradient: sum_i w_i u_i v_i^T with w_1 = (sigma_1 - sum sigma) / sigma_1^2
/// and w_j = 1 / sigma_1 otherwise. At repeated singular values this is one
/// choice of subgradient. Matrices with sigma_1 <= kDegenerateSigma give
/// zero loss and gradient and set diagnostics["degenerate"].
inline LossValue rank_surrogate(const Matrix& m) {
  LossValue out;
  out.grad_features = Matrix::Zero(m.rows(), m.cols());
  const auto f = svd(m);
  const double s1 = f.sigma(0);
  out.diagnostics["numerical_rank"] = numerical_rank(f.sigma);
  out.diagnostics["sigma_1"] = s1;
  if (!(s1 > kDegenerateSigma)) {
    out.diagnostics["degenerate"] = 1.0;
    return out;
  }
  const double total = f.sigma.sum();
  out.value = total / s1 - 1.0;
  Vector w = Vector::Constant(f.sigma.size(), 1.0 / s1);
  w(0) = (s1 - total) / (s1 * s1);
  out.grad_features = f.u * w.asDiagonal() * f.v.transpose();
  // smallest relative gap between consecutive singular values; gradient
  // checks are only meaningful when this is bounded away from zero
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i + 1 < f.sigma.size(); ++i) gap = std::min(gap, (f.sigma(i) - f.sigma(i + 1)) / s1);
  out.diagnostics["min_gap"] = gap;
  return out;
}

/// Mean of rank_surrogate over the class groups holding at least two rows.
/// Singleton groups are already rank one and contribute nothing.
inline LossValue approximate_loss(const FeatureBatch& batch) {
  LossValue out;
  out.grad_features = Matrix::Zero(batch.features.rows(), batch.features.cols());
  const auto groups = group_by_label(batch);
  int engaged = 0;
  double sum = 0.0, rank_sum = 0.0, degenerate = 0.0;
  for (const auto& g : groups) {
    if (g.rows.size() < 2) continue;
    ++engaged;
    auto part = rank_surrogate(g.matrix);
    sum += part.value;
    rank_sum += part.diagnostics["numerical_rank"];
    degenerate += part.diagnostics.count("degenerate") ? 1.0 : 0.0;
    for (std::size_t r = 0; r < g.rows.size(); ++r)
      out.grad_features.row(g.rows[r]) = part.grad_features.row(static_cast<Eigen::Index>(r));
  }
  if (engaged > 0) {
    out.value = sum / engaged;
    out.grad_features /= engaged;
  }
  out.diagnostics["l_approx"] = out.value;
  out.diagnostics["groups"] = static_cast<double>(groups.size());
  out.diagnostics["groups_engaged"] = engaged;
  out.diagnostics["mean_group_size"] = static_cast<double>(batch.size()) / static_cast<double>(groups.size());
  out.diagnostics["mean_numerical_rank"] = engaged ? rank_sum / engaged : 0.0;
  out.diagnostics["degenerate_groups"] = degenerate;
  return out;
}

}  // namespace vlca
