// SPDX-License-Identifier: Apache-2.0
//
// Interclass semantic distributions from class word vectors, and the KL
// supervision loss against softmax network outputs.
#pragma once

#include "vlca/core.hpp"
#include "vlca/error.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace vlca {

/// Pairwise cosine similarities between class vectors.
struct SimilarityMatrix {
  Matrix d;
  Eigen::Index classes() const noexcept { return d.rows(); }
};

/// Row k is the semantic probability distribution of class k.
struct SemanticDistribution {
  Matrix p;
  Eigen::Index classes() const noexcept { return p.rows(); }
};

inline constexpr double kSimilarityFloor = 1e-6;

inline SimilarityMatrix build_similarity(std::span<const Vector> vectors) {
  const auto c = static_cast<Eigen::Index>(vectors.size());
  if (c == 0) throw Error(Errc::InvalidArgument, "no class vectors");
  const auto dim = vectors[0].size();
  Vector norms(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    const auto& v = vectors[static_cast<std::size_t>(k)];
    if (v.size() != dim) throw Error(Errc::DimensionMismatch, "class vectors differ in length");
    norms(k) = v.norm();
    if (!(norms(k) > 0.0)) throw Error(Errc::ZeroVector, "class vector " + std::to_string(k) + " is zero");
  }
  SimilarityMatrix sim{Matrix(c, c)};
  for (Eigen::Index k = 0; k < c; ++k) {
    sim.d(k, k) = 1.0;
    for (Eigen::Index l = k + 1; l < c; ++l) {
      const double cos = vectors[static_cast<std::size_t>(k)].dot(vectors[static_cast<std::size_t>(l)]) /
                         (norms(k) * norms(l));
      sim.d(k, l) = sim.d(l, k) = std::clamp(cos, -1.0, 1.0);
    }
  }
  return sim;
}

/// Clamp each similarity to at least kSimilarityFloor, then normalize each
/// row (self-similarity included) to sum to one.
inline SemanticDistribution build_distribution(const SimilarityMatrix& sim) {
  SemanticDistribution out{sim.d.cwiseMax(kSimilarityFloor)};
  for (Eigen::Index k = 0; k < out.p.rows(); ++k) out.p.row(k) /= out.p.row(k).sum();
  return out;
}

/// Numerically stable log-softmax of each row.
inline Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

/// Sum over the batch of KL(P[label_i] || softmax(logits_i)).
/// grad_features holds d loss / d logits = softmax(logits_i) - P[label_i].
inline LossValue semantic_loss(const SemanticDistribution& dist, const Matrix& logits, std::span<const int> labels) {
  const auto c = dist.classes();
  const auto m = logits.rows();
  if (m < 1) throw Error(Errc::EmptyDataset, "semantic_loss needs at least one sample");
  if (logits.cols() != c) throw Error(Errc::DimensionMismatch, "logit width does not match class count");
  if (static_cast<Eigen::Index>(labels.size()) != m) throw Error(Errc::DimensionMismatch, "label count mismatch");

  const Matrix logf = log_softmax_rows(logits);
  LossValue out;
  out.grad_features.resize(m, c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " out of range");
    for (Eigen::Index l = 0; l < c; ++l) {
      const double p = dist.p(y, l);
      if (p > 0.0) total += p * (std::log(p) - logf(i, l));  // 0 ln 0 := 0
      out.grad_features(i, l) = std::exp(logf(i, l)) - p;
    }
  }
  out.value = total;
  out.diagnostics["l_semantic"] = total;
  return out;
}

}  // namespace vlca
