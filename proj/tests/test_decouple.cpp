// SPDX-License-Identifier: Apache-2.0
#include "test_util.hpp"

using namespace vlca;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

// One sample, identity head, given style and semantic rows.
LossValue single(const Vector& g, const Vector& s, const Vector& c, StyleMode mode) {
  FeatureBatch b{g.transpose(), {0}, {0}};
  const PromptBinding p{s.transpose(), c.transpose()};
  return decouple_loss(b, p, ProjectionHead{Matrix::Identity(g.size(), g.size())}, mode);
}

}  // namespace

TEST(Project, Examples) {
  EXPECT_EQ(project(v2(1, 1), v2(1, 0)), v2(1, 0));
  EXPECT_EQ(project(v2(0, 1), v2(1, 0)), v2(0, 0));
  EXPECT_TRUE(project(v2(3, 4), v2(6, 8)).isApprox(v2(3, 4), 1e-15));
  EXPECT_VLCA_ERROR(project(v2(1, 1), v2(0, 0)), Errc::ZeroVector);
  EXPECT_VLCA_ERROR(project(v2(1, 1), Vector::Ones(3)), Errc::DimensionMismatch);
}

TEST(DecoupleLoss, ZeroWhenAlignedAndOrthogonal) {
  for (auto mode : {StyleMode::PaperRaw, StyleMode::SquaredCosine})
    EXPECT_NEAR(single(v2(0, 2), v2(1, 0), v2(0, 2), mode).value, 0.0, 1e-15) << to_string(mode);
}

TEST(DecoupleLoss, StyleParallelSemanticOrthogonalGivesTwo) {
  EXPECT_NEAR(single(v2(1, 0), v2(1, 0), v2(0, 1), StyleMode::SquaredCosine).value, 2.0, 1e-15);
}

TEST(DecoupleLoss, PaperRawMatchesDirectFormula) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 5, n = 7, k = 4;
    FeatureBatch b{rng.normal_matrix(m, n), {0, 1, 2, 1, 0}, {1, 0, 1, 1, 0}};
    const PromptBinding p{rng.normal_matrix(2, k), rng.normal_matrix(3, k)};
    const ProjectionHead head{rng.normal_matrix(k, n)};
    double expect = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double dot_s = 0, dot_c = 0, gg = 0, cc = 0;
      for (Eigen::Index r = 0; r < k; ++r) {
        double g = 0;
        for (Eigen::Index j = 0; j < n; ++j) g += head.w(r, j) * b.features(i, j);
        const double s = p.style(b.domains[i], r), c = p.semantic(b.labels[i], r);
        dot_s += g * s;
        dot_c += g * c;
        gg += g * g;
        cc += c * c;
      }
      expect += dot_s + 1.0 - dot_c / std::sqrt(gg * cc);
    }
    expect /= m;
    EXPECT_NEAR(decouple_loss(b, p, head, StyleMode::PaperRaw).value, expect, 1e-12 * std::max(1.0, std::abs(expect)));
  }
}

TEST(DecoupleLoss, SquaredModeScaleInvariantAndBounded) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index m = 6, n = 5, k = 5;
    FeatureBatch b{rng.normal_matrix(m, n), {0, 1, 0, 1, 1, 0}, {0, 0, 1, 1, 2, 2}};
    const PromptBinding p{rng.normal_matrix(3, k), rng.normal_matrix(2, k)};
    const ProjectionHead head{rng.normal_matrix(k, n)};
    const double base = decouple_loss(b, p, head).value;
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 3.0);
    FeatureBatch scaled = b;
    for (Eigen::Index i = 0; i < m; ++i) scaled.features.row(i) *= rng.uniform(1e-3, 1e3);
    EXPECT_NEAR(decouple_loss(scaled, p, head).value, base, 1e-10);
  }
}

TEST(DecoupleLoss, AlignmentGradientVanishesWhenParallel) {
  // G parallel to c and orthogonal to s is a stationary point in squared mode
  const Vector c = (Vector(3) << 0, 2, 1).finished();
  const Vector s = (Vector(3) << 1, 0, 0).finished();
  const auto lv = single(3.0 * c, s, c, StyleMode::SquaredCosine);
  EXPECT_LT(lv.grad_features.cwiseAbs().maxCoeff(), 1e-15);
  // numerically, too: central differences in every coordinate
  auto fn = [&](const Vector& x, Vector* grad) {
    const auto l = single(x, s, c, StyleMode::SquaredCosine);
    if (grad) *grad = l.grad_features.row(0).transpose();
    return l.value;
  };
  Vector numeric(3);
  const Vector x0 = 3.0 * c;
  for (int i = 0; i < 3; ++i) {
    Vector xp = x0, xm = x0;
    xp(i) += 1e-5;
    xm(i) -= 1e-5;
    numeric(i) = (fn(xp, nullptr) - fn(xm, nullptr)) / 2e-5;
  }
  EXPECT_LT(numeric.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(DecoupleLoss, GradientMatchesFiniteDifferences) {
  for (auto mode : {StyleMode::SquaredCosine, StyleMode::PaperRaw}) {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      worst = std::max(worst, check_decouple_gradient(seed, mode).max_rel_error);
    EXPECT_LT(worst, 1e-5) << to_string(mode);
  }
}

TEST(DecoupleLoss, ZeroFeatureRowIsCountedNotNan) {
  FeatureBatch b{Matrix::Zero(2, 2), {0, 0}, {0, 0}};
  b.features(1, 0) = 1.0;
  const PromptBinding p{v2(0, 1).transpose(), v2(1, 0).transpose()};
  const auto lv = decouple_loss(b, p, ProjectionHead{Matrix::Identity(2, 2)});
  EXPECT_EQ(lv.diagnostics.at("zero_norm_samples"), 1.0);
  EXPECT_TRUE(std::isfinite(lv.value));
  EXPECT_TRUE(lv.grad_features.allFinite());
}

TEST(DecoupleLoss, NamedOverloadAndMissingNames) {
  PromptEmbeddings pe;
  pe.k = 2;
  pe.style.push_back({"photo", v2(1, 0)});
  pe.semantic.push_back({"dog", v2(0, 1)});
  FeatureBatch b{v2(0, 1).transpose(), {0}, {0}};
  const std::vector<std::string> doms{"photo"}, cls{"dog"}, bad{"cat"};
  EXPECT_NEAR(decouple_loss(b, pe, doms, cls, ProjectionHead{Matrix::Identity(2, 2)}).value, 0.0, 1e-15);
  EXPECT_VLCA_ERROR(decouple_loss(b, pe, doms, bad, ProjectionHead{Matrix::Identity(2, 2)}), Errc::NameNotFound);
  EXPECT_VLCA_ERROR(decouple_loss(b, pe, doms, cls, ProjectionHead{Matrix::Identity(3, 2)}), Errc::DimensionMismatch);
}

TEST(StyleMode, ParseRoundTrip) {
  EXPECT_EQ(parse_style_mode("paper_raw"), StyleMode::PaperRaw);
  EXPECT_EQ(parse_style_mode(to_string(StyleMode::SquaredCosine)), StyleMode::SquaredCosine);
  EXPECT_VLCA_ERROR(parse_style_mode("raw"), Errc::InvalidConfig);
}

TEST(ProjectionHead, IdentityWhenSquare) {
  EXPECT_EQ(ProjectionHead::make(4, 4).w, Matrix::Identity(4, 4));
  EXPECT_EQ(ProjectionHead::make(3, 5, 1).w, ProjectionHead::make(3, 5, 1).w);
  EXPECT_NE(ProjectionHead::make(3, 5, 1).w, ProjectionHead::make(3, 5, 2).w);
}
