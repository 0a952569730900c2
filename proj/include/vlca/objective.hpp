// SPDX-License-Identifier: Apache-2.0
//
// Full objective: L = L_cls + alpha (L_decouple + L_semantic) + beta L_approx,
// plus the central-difference gradient checker used throughout the tests.
#pragma once

#include "vlca/batch.hpp"
#include "vlca/core.hpp"
#include "vlca/decouple.hpp"
#include "vlca/lowrank.hpp"
#include "vlca/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace vlca {

struct LossWeights {
  double alpha = 0.2;
  double beta = 0.2;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0)
      throw Error(Errc::InvalidConfig, "loss weights must be finite and nonnegative");
  }
};

/// Mean softmax cross-entropy; grad_features is d/d logits.
inline LossValue cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  const auto m = logits.rows();
  if (m < 1) throw Error(Errc::EmptyDataset, "cross entropy needs at least one sample");
  if (static_cast<Eigen::Index>(labels.size()) != m) throw Error(Errc::DimensionMismatch, "label count mismatch");
  const Matrix logf = log_softmax_rows(logits);
  LossValue out;
  out.grad_features = logf.array().exp();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " out of range");
    sum -= logf(i, y);
    out.grad_features(i, y) -= 1.0;
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.value = sum * inv_m;
  out.grad_features *= inv_m;
  out.diagnostics["l_cls"] = out.value;
  return out;
}

/// Combined objective. grad_logits and grad_features (d/dF) and grad_params
/// (d/d head weights, row-major) are the weighted sums of the component
/// gradients. diagnostics holds each term and the total.
inline LossValue total_loss(const FeatureBatch& batch, const Matrix& logits, const PromptBinding& prompts,
                            const ProjectionHead& head, const SemanticDistribution& dist, const LossWeights& w,
                            StyleMode mode = StyleMode::SquaredCosine) {
  w.validate();
  batch.validate(static_cast<int>(dist.classes()));
  if (logits.rows() != batch.size()) throw Error(Errc::DimensionMismatch, "logits and features differ in rows");

  const auto cls = cross_entropy_loss(logits, batch.labels);
  const auto dec = decouple_loss(batch, prompts, head, mode);
  const auto sem = semantic_loss(dist, logits, batch.labels);
  const auto apx = approximate_loss(batch);

  LossValue out;
  out.value = cls.value + w.alpha * (dec.value + sem.value) + w.beta * apx.value;
  out.grad_logits = cls.grad_features + w.alpha * sem.grad_features;
  out.grad_features = w.alpha * dec.grad_features + w.beta * apx.grad_features;
  out.grad_params = w.alpha * dec.grad_params;
  out.diagnostics = dec.diagnostics;
  out.diagnostics.insert(apx.diagnostics.begin(), apx.diagnostics.end());
  out.diagnostics["l_cls"] = cls.value;
  out.diagnostics["l_decouple"] = dec.value;
  out.diagnostics["l_semantic"] = sem.value;
  out.diagnostics["l_approx"] = apx.value;
  out.diagnostics["alpha"] = w.alpha;
  out.diagnostics["beta"] = w.beta;
  out.diagnostics["total"] = out.value;
  if (!std::isfinite(out.value)) throw Error(Errc::NonFiniteLoss, "total loss is not finite");
  return out;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index checked = 0;
};

/// Compare an analytic gradient to central differences.
///
/// `fn(x, grad)` returns f(x) and, when grad is non-null, writes the analytic
/// gradient into it. Per coordinate the error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); the maximum is
/// returned. With max_coords > 0 a seeded random subset of coordinates is
/// checked instead of all of them.
template <class Fn>
GradCheckResult grad_check(Fn&& fn, const Vector& point, double step, std::uint64_t seed = 0,
                           Eigen::Index max_coords = 0) {
  if (!(step > 0.0)) throw Error(Errc::InvalidArgument, "grad_check step must be positive");
  Vector analytic(point.size());
  const double f0 = fn(point, &analytic);
  if (!std::isfinite(f0) || !analytic.allFinite()) throw Error(Errc::NonFiniteLoss, "non-finite loss at check point");

  std::vector<Eigen::Index> coords(static_cast<std::size_t>(point.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (max_coords > 0 && max_coords < point.size()) {
    Rng rng(derive_seed(seed, "grad-check"));
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(static_cast<std::size_t>(max_coords));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult res;
  Vector x = point;
  for (auto i : coords) {
    const double orig = x(i);
    x(i) = orig + step;
    const double fp = fn(x, nullptr);
    x(i) = orig - step;
    const double fm = fn(x, nullptr);
    x(i) = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw Error(Errc::NonFiniteLoss, "non-finite loss while perturbing");
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic(i) - numeric) /
                       std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
    if (err > res.max_rel_error || res.worst_index < 0) {
      res.max_rel_error = std::max(res.max_rel_error, err);
      if (err >= res.max_rel_error) res.worst_index = i;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace vlca
