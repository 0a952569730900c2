// SPDX-License-Identifier: Apache-2.0
//
// Feature decoupling: projected image features are pushed orthogonal to the
// domain-style prompt embedding and aligned with the class-semantic one.
#pragma once

#include "vlca/batch.hpp"
#include "vlca/core.hpp"
#include "vlca/embeddings.hpp"
#include "vlca/error.hpp"

#include <span>
#include <string>
#include <string_view>

namespace vlca {

/// Row-major flattening used for grad_params.
inline Vector flatten_row_major(const Matrix& m) {
  RowMatrix r = m;
  return Eigen::Map<const Vector>(r.data(), r.size());
}

inline Matrix unflatten_row_major(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw Error(Errc::DimensionMismatch, "flat size mismatch");
  return Eigen::Map<const RowMatrix>(v.data(), rows, cols);
}

/// Projection of v onto the direction of e.
inline Vector project(const Vector& v, const Vector& e) {
  if (v.size() != e.size()) throw Error(Errc::DimensionMismatch, "project: length mismatch");
  const double ee = e.squaredNorm();
  if (!(ee > 0.0)) throw Error(Errc::ZeroVector, "project: zero direction");
  return (v.dot(e) / ee) * e;
}

/// Trainable linear map from feature space (n) to prompt space (k).
struct ProjectionHead {
  Matrix w;  // k x n

  Eigen::Index feature_dim() const noexcept { return w.cols(); }
  Eigen::Index prompt_dim() const noexcept { return w.rows(); }

  /// Identity when n == k, otherwise a seeded Gaussian map scaled by 1/sqrt(n).
  static ProjectionHead make(Eigen::Index k, Eigen::Index n, std::uint64_t seed = 0) {
    if (k == n) return {Matrix::Identity(k, n)};
    Rng rng(derive_seed(seed, "projection-head"));
    return {rng.normal_matrix(k, n, 1.0 / std::sqrt(static_cast<double>(n)))};
  }
};

enum class StyleMode { PaperRaw, SquaredCosine };

inline std::string_view to_string(StyleMode m) noexcept {
  return m == StyleMode::PaperRaw ? "paper_raw" : "squared_cosine";
}

inline StyleMode parse_style_mode(std::string_view s) {
  if (s == "paper_raw") return StyleMode::PaperRaw;
  if (s == "squared_cosine") return StyleMode::SquaredCosine;
  throw Error(Errc::InvalidConfig, "unknown style mode '" + std::string(s) + "'");
}

/// Prompt rows resolved against the domain and class index spaces of a batch.
struct PromptBinding {
  Matrix style;     // num_domains x k
  Matrix semantic;  // num_classes x k
};

inline PromptBinding bind_prompts(const PromptEmbeddings& prompts, std::span<const std::string> domain_names,
                                  std::span<const std::string> class_names) {
  const auto k = static_cast<Eigen::Index>(prompts.k);
  PromptBinding b{Matrix(static_cast<Eigen::Index>(domain_names.size()), k),
                  Matrix(static_cast<Eigen::Index>(class_names.size()), k)};
  for (std::size_t d = 0; d < domain_names.size(); ++d) {
    const auto* v = prompts.find_style(domain_names[d]);
    if (!v) throw Error(Errc::NameNotFound, "no style prompt for domain '" + domain_names[d] + "'");
    b.style.row(static_cast<Eigen::Index>(d)) = v->transpose();
  }
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const auto* v = prompts.find_semantic(class_names[c]);
    if (!v) throw Error(Errc::NameNotFound, "no semantic prompt for class '" + class_names[c] + "'");
    b.semantic.row(static_cast<Eigen::Index>(c)) = v->transpose();
  }
  return b;
}

inline constexpr double kZeroNorm = 1e-12;

/// Batch mean of style_term + (1 - cos(G_i, E_sem)), G_i = W F_i.
///
/// style_term is <G_i, E_sty> (PaperRaw) or cos^2(G_i, E_sty) (SquaredCosine).
/// grad_features is d/dF (m x n); grad_params is d/dW flattened row-major.
/// Samples with |G_i| < kZeroNorm skip their cosine terms and are counted in
/// diagnostics["zero_norm_samples"].
inline LossValue decouple_loss(const FeatureBatch& batch, const PromptBinding& prompts, const ProjectionHead& head,
                               StyleMode mode = StyleMode::SquaredCosine) {
  batch.validate(static_cast<int>(prompts.semantic.rows()), static_cast<int>(prompts.style.rows()));
  if (batch.domains.empty()) throw Error(Errc::DimensionMismatch, "decouple_loss needs domain labels");
  if (head.feature_dim() != batch.features.cols() || head.prompt_dim() != prompts.style.cols() ||
      prompts.style.cols() != prompts.semantic.cols())
    throw Error(Errc::DimensionMismatch, "projection head does not match features or prompts");

  const Eigen::Index m = batch.size();
  const Matrix g_all = batch.features * head.w.transpose();  // m x k
  Matrix d_g = Matrix::Zero(m, head.prompt_dim());
  double style_sum = 0.0, align_sum = 0.0;
  int zero_norm = 0;

  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector g = g_all.row(i).transpose();
    const Vector s = prompts.style.row(batch.domains[static_cast<std::size_t>(i)]).transpose();
    const Vector c = prompts.semantic.row(batch.labels[static_cast<std::size_t>(i)]).transpose();
    const double gn = g.norm();
    const bool skip_cos = gn < kZeroNorm;
    if (skip_cos) ++zero_norm;
    Vector dg = Vector::Zero(g.size());

    if (mode == StyleMode::PaperRaw) {
      style_sum += g.dot(s);
      dg += s;
    } else if (!skip_cos) {
      const double sn = s.norm();
      const double t = g.dot(s) / (gn * sn);
      style_sum += t * t;
      dg += 2.0 * t * (s / (gn * sn) - (t / (gn * gn)) * g);
    }

    if (!skip_cos) {
      const double cn = c.norm();
      const double a = g.dot(c) / (gn * cn);
      align_sum += 1.0 - a;
      dg -= c / (gn * cn) - (a / (gn * gn)) * g;
    }
    d_g.row(i) = dg.transpose();
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  LossValue out;
  out.value = (style_sum + align_sum) * inv_m;
  d_g *= inv_m;
  out.grad_features = d_g * head.w;  // m x n
  out.grad_params = flatten_row_major(d_g.transpose() * batch.features);  // k x n
  out.diagnostics["l_decouple"] = out.value;
  out.diagnostics["decouple_style"] = style_sum * inv_m;
  out.diagnostics["decouple_align"] = align_sum * inv_m;
  out.diagnostics["zero_norm_samples"] = zero_norm;
  return out;
}

/// Name-keyed convenience overload.
inline LossValue decouple_loss(const FeatureBatch& batch, const PromptEmbeddings& prompts,
                               std::span<const std::string> domain_names, std::span<const std::string> class_names,
                               const ProjectionHead& head, StyleMode mode = StyleMode::SquaredCosine) {
  return decouple_loss(batch, bind_prompts(prompts, domain_names, class_names), head, mode);
}

}  // namespace vlca
