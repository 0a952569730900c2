// SPDX-License-Identifier: Apache-2.0
//
// Seeded random instances of every loss, each checked against central
// differences. Shared by `vlca gradcheck` and the acceptance tests.
#pragma once

#include "vlca/objective.hpp"

#include <string>
#include <vector>

namespace vlca {

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool skipped = false;  // instance too close to a repeated singular value
  bool passed() const { return skipped || max_rel_error < threshold; }
};

namespace detail {

inline SemanticDistribution random_distribution(Rng& rng, Eigen::Index c) {
  SemanticDistribution d{Matrix(c, c)};
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) d.p(i, j) = rng.uniform(0.05, 1.0);
    d.p.row(i) /= d.p.row(i).sum();
  }
  return d;
}

inline std::vector<int> random_labels(Rng& rng, Eigen::Index m, int c) {
  std::vector<int> out(static_cast<std::size_t>(m));
  for (auto& y : out) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
  return out;
}

inline double min_group_gap(const FeatureBatch& batch) {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& g : group_by_label(batch))
    if (g.rows.size() >= 2) gap = std::min(gap, rank_surrogate(g.matrix).diagnostics.at("min_gap"));
  return gap;
}

}  // namespace detail

inline GradCheckReport check_semantic_gradient(std::uint64_t seed, double threshold = 1e-6) {
  Rng rng(derive_seed(seed, "gc-semantic"));
  const Eigen::Index m = 4, c = 5;
  const auto dist = detail::random_distribution(rng, c);
  const auto labels = detail::random_labels(rng, m, static_cast<int>(c));
  const Matrix logits = rng.normal_matrix(m, c, 2.0);
  auto fn = [&](const Vector& x, Vector* grad) {
    const auto lv = semantic_loss(dist, unflatten_row_major(x, m, c), labels);
    if (grad) *grad = flatten_row_major(lv.grad_features);
    return lv.value;
  };
  const auto r = grad_check(fn, flatten_row_major(logits), 1e-5, seed);
  return {"semantic_loss", r.max_rel_error, threshold};
}

inline GradCheckReport check_decouple_gradient(std::uint64_t seed, StyleMode mode, double threshold = 1e-5,
                                               double step = 1e-5) {
  Rng rng(derive_seed(seed, std::string("gc-decouple-") + std::string(to_string(mode))));
  const Eigen::Index m = 8, n = 16, k = 12;
  const int domains = 3, classes = 4;
  FeatureBatch batch{rng.normal_matrix(m, n), detail::random_labels(rng, m, classes),
                     detail::random_labels(rng, m, domains)};
  const PromptBinding prompts{rng.normal_matrix(domains, k), rng.normal_matrix(classes, k)};
  const Matrix w0 = rng.normal_matrix(k, n, 0.3);
  const Eigen::Index nf = m * n;

  Vector point(nf + k * n);
  point << flatten_row_major(batch.features), flatten_row_major(w0);
  auto fn = [&](const Vector& x, Vector* grad) {
    FeatureBatch b = batch;
    b.features = unflatten_row_major(x.head(nf), m, n);
    const ProjectionHead head{unflatten_row_major(x.tail(k * n), k, n)};
    const auto lv = decouple_loss(b, prompts, head, mode);
    if (grad) {
      grad->resize(x.size());
      *grad << flatten_row_major(lv.grad_features), lv.grad_params;
    }
    return lv.value;
  };
  const auto r = grad_check(fn, point, step, seed);
  return {"decouple_loss/" + std::string(to_string(mode)), r.max_rel_error, threshold};
}

inline GradCheckReport check_rank_gradient(std::uint64_t seed, double threshold = 1e-4) {
  Rng rng(derive_seed(seed, "gc-rank"));
  const Eigen::Index p = 4, q = 6;
  Matrix mat = rng.normal_matrix(p, q);
  // documented exclusion: gradients at (near-)repeated singular values are
  // subgradients, so such instances are resampled a few times and otherwise
  // reported as skipped
  int tries = 0;
  while (rank_surrogate(mat).diagnostics.at("min_gap") <= 1e-3 && ++tries < 8) mat = rng.normal_matrix(p, q);
  if (rank_surrogate(mat).diagnostics.at("min_gap") <= 1e-3) return {"rank_surrogate", 0.0, threshold, true};
  auto fn = [&](const Vector& x, Vector* grad) {
    const auto lv = rank_surrogate(unflatten_row_major(x, p, q));
    if (grad) *grad = flatten_row_major(lv.grad_features);
    return lv.value;
  };
  const auto r = grad_check(fn, flatten_row_major(mat), 1e-6, seed);
  return {"rank_surrogate", r.max_rel_error, threshold};
}

// The total loss is O(10) while some feature gradients are O(1e-6), so at
// step 1e-5 cancellation in f(x+h) - f(x-h) dominates; 3e-5 balances that
// against truncation error.
inline GradCheckReport check_total_gradient(std::uint64_t seed, double threshold = 1e-5, double step = 3e-5) {
  Rng rng(derive_seed(seed, "gc-total"));
  const Eigen::Index m = 8, n = 6, k = 5;
  const int classes = 4, domains = 3;
  const auto dist = detail::random_distribution(rng, classes);
  const PromptBinding prompts{rng.normal_matrix(domains, k), rng.normal_matrix(classes, k)};
  const Matrix w0 = rng.normal_matrix(k, n, 0.5);
  const LossWeights weights{0.2, 0.2};
  FeatureBatch batch;
  int tries = 0;
  do {
    batch = FeatureBatch{rng.normal_matrix(m, n), detail::random_labels(rng, m, classes),
                         detail::random_labels(rng, m, domains)};
  } while (detail::min_group_gap(batch) <= 1e-2 && ++tries < 16);
  if (detail::min_group_gap(batch) <= 1e-2) return {"total_loss", 0.0, threshold, true};
  const Matrix logits = rng.normal_matrix(m, classes, 2.0);

  const Eigen::Index nl = m * classes, nf = m * n, nw = k * n;
  Vector point(nl + nf + nw);
  point << flatten_row_major(logits), flatten_row_major(batch.features), flatten_row_major(w0);
  auto fn = [&](const Vector& x, Vector* grad) {
    FeatureBatch b = batch;
    b.features = unflatten_row_major(x.segment(nl, nf), m, n);
    const ProjectionHead head{unflatten_row_major(x.tail(nw), k, n)};
    const auto lv = total_loss(b, unflatten_row_major(x.head(nl), m, classes), prompts, head, dist, weights);
    if (grad) {
      grad->resize(x.size());
      *grad << flatten_row_major(lv.grad_logits), flatten_row_major(lv.grad_features), lv.grad_params;
    }
    return lv.value;
  };
  const auto r = grad_check(fn, point, step, seed);
  return {"total_loss", r.max_rel_error, threshold};
}

inline std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed) {
  return {check_semantic_gradient(seed), check_decouple_gradient(seed, StyleMode::SquaredCosine),
          check_decouple_gradient(seed, StyleMode::PaperRaw), check_rank_gradient(seed), check_total_gradient(seed)};
}

}  // namespace vlca
