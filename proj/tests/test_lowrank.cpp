// SPDX-License-Identifier: Apache-2.0
#include "test_util.hpp"

#include "oracles.hpp"

using namespace vlca;

TEST(GroupByLabel, Examples) {
  FeatureBatch b{Matrix(3, 2), {2, 0, 2}, {}};
  b.features << 1, 2, 3, 4, 5, 6;
  const auto g = group_by_label(b);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].label, 0);
  EXPECT_EQ(g[0].rows, (std::vector<Eigen::Index>{1}));
  EXPECT_EQ(g[1].label, 2);
  EXPECT_EQ(g[1].rows, (std::vector<Eigen::Index>{0, 2}));
  EXPECT_EQ(g[1].matrix, (Matrix(2, 2) << 1, 2, 5, 6).finished());

  EXPECT_EQ(group_by_label({Matrix::Ones(4, 2), {1, 1, 1, 1}, {}}).size(), 1u);
  EXPECT_EQ(group_by_label({Matrix::Ones(4, 2), {3, 1, 0, 2}, {}}).size(), 4u);
  EXPECT_VLCA_ERROR(group_by_label({Matrix(0, 2), {}, {}}), Errc::EmptyDataset);
}

TEST(RankSurrogate, Examples) {
  EXPECT_NEAR(rank_surrogate(Matrix::Ones(4, 4)).value, 0.0, 1e-12);
  EXPECT_NEAR(rank_surrogate(Matrix::Identity(2, 2)).value, 1.0, 1e-15);
  const auto z = rank_surrogate(Matrix::Zero(3, 3));
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.diagnostics.at("degenerate"), 1.0);
  EXPECT_EQ(z.grad_features, Matrix::Zero(3, 3));
}

TEST(RankSurrogate, ZeroOnRankOne) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = 2 + static_cast<Eigen::Index>(rng.below(7));
    const auto q = 2 + static_cast<Eigen::Index>(rng.below(7));
    const Matrix m = rng.normal_vector(p) * rng.normal_vector(q).transpose();
    const auto lv = rank_surrogate(m);
    EXPECT_NEAR(lv.value, 0.0, 1e-10);
    EXPECT_EQ(lv.diagnostics.at("numerical_rank"), 1.0);
  }
}

TEST(RankSurrogate, BoundsAndInvariances) {
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = 2 + static_cast<Eigen::Index>(rng.below(6));
    const auto q = 2 + static_cast<Eigen::Index>(rng.below(8));
    const Matrix m = rng.normal_matrix(p, q);
    const double base = rank_surrogate(m).value;
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, static_cast<double>(std::min(p, q) - 1) + 1e-12);
    const double alpha = (trial % 2 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform(-4, 4));
    EXPECT_NEAR(rank_surrogate(alpha * m).value, base, 1e-10);
    EXPECT_NEAR(rank_surrogate(vlca::test::random_orthogonal(rng, p) * m).value, base, 1e-8);
  }
}

TEST(RankSurrogate, AgreesWithOracleSingularValues) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix m = rng.normal_matrix(5, 3);
    const Vector s = vlca::test::oracle_singular_values(m);
    EXPECT_NEAR(rank_surrogate(m).value, s.sum() / s(0) - 1.0, 1e-10);
  }
}

TEST(RankSurrogate, GradientMatchesFiniteDifferencesOnGappedInstances) {
  double worst = 0;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = check_rank_gradient(seed);
    if (r.skipped) continue;
    ++checked;
    worst = std::max(worst, r.max_rel_error);
  }
  EXPECT_GT(checked, 40);
  EXPECT_LT(worst, 1e-4);
}

TEST(RankSurrogate, RepeatedSingularValueIsFlaggedForSkipping) {
  const auto lv = rank_surrogate(Matrix::Identity(3, 4));
  EXPECT_EQ(lv.diagnostics.at("min_gap"), 0.0);
}

TEST(ApproximateLoss, Examples) {
  // every class once
  EXPECT_EQ(approximate_loss({Matrix::Identity(3, 3), {0, 1, 2}, {}}).value, 0.0);
  // identical rows
  EXPECT_NEAR(approximate_loss({Matrix::Ones(4, 5), {1, 1, 1, 1}, {}}).value, 0.0, 1e-12);
  // two classes, each an identity-like pair
  FeatureBatch b{Matrix::Zero(4, 2), {0, 0, 1, 1}, {}};
  b.features << 1, 0, 0, 1, 2, 0, 0, 2;
  const auto lv = approximate_loss(b);
  EXPECT_NEAR(lv.value, 1.0, 1e-15);
  EXPECT_EQ(lv.diagnostics.at("groups_engaged"), 2.0);
  EXPECT_EQ(lv.diagnostics.at("mean_group_size"), 2.0);
}

TEST(ApproximateLoss, SingletonRowsGetNoGradient) {
  Rng rng(3);
  FeatureBatch b{rng.normal_matrix(5, 4), {0, 1, 0, 2, 0}, {}};
  const auto lv = approximate_loss(b);
  EXPECT_EQ(lv.grad_features.row(1), Eigen::RowVectorXd::Zero(4));
  EXPECT_EQ(lv.grad_features.row(3), Eigen::RowVectorXd::Zero(4));
  EXPECT_GT(lv.grad_features.row(0).norm(), 0.0);
}

TEST(ApproximateLoss, DescentReachesRankOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto b = vlca::test::descent_batch(seed);
    EXPECT_GT(approximate_loss(b).value, 1e-2);
    EXPECT_LT(vlca::test::run_descent(b), 1e-3) << "seed " << seed;
  }
}
