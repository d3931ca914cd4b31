#include <gtest/gtest.h>

#include <cmath>

#include "bkd/otsu.hpp"
#include "bkd/robust_loss.hpp"
#include "oracles.hpp"

using namespace bkd;

namespace {

double entropy(const RowVector& p) {
  double h = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    if (p(c) > 0.0) h -= p(c) * std::log(p(c));
  }
  return h;
}

}  // namespace

TEST(BetaTargets, ClosedForms) {
  RowVector ps(3);
  ps << 0.2, 0.5, 0.3;
  const RowVector beta = beta_targets(1, ps, 0.4);
  EXPECT_NEAR(beta(0), 0.08, 1e-15);
  EXPECT_NEAR(beta(1), 0.80, 1e-15);
  EXPECT_NEAR(beta(2), 0.12, 1e-15);

  const RowVector hard = beta_targets(2, ps, 0.0);
  EXPECT_EQ(hard(0), 0.0);
  EXPECT_EQ(hard(1), 0.0);
  EXPECT_EQ(hard(2), 1.0);

  const RowVector soft = beta_targets(2, ps, 1.0);
  EXPECT_TRUE((soft.array() == ps.array()).all());

  EXPECT_THROW(beta_targets(3, ps, 0.5), Error);
  EXPECT_THROW(beta_targets(0, ps, 1.5), Error);
}

TEST(BetaTargets, NormalizedForRandomInputs) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const Matrix ps = oracle::random_distributions(rng, 1, 10);
    const RowVector beta = beta_targets(static_cast<int>(rng.below(10)), ps.row(0), rng.uniform());
    ASSERT_NEAR(beta.sum(), 1.0, 1e-9);
    ASSERT_GE(beta.minCoeff(), 0.0);
  }
}

TEST(Sharpen, ClosedForms) {
  RowVector beta(2);
  beta << 0.7, 0.3;
  const RowVector s = sharpen(beta, 1.0);
  EXPECT_NEAR(s(0), 0.844828, 1e-6);
  EXPECT_NEAR(s(1), 0.155172, 1e-6);
  EXPECT_NEAR(s(0), 0.49 / 0.58, 1e-15);

  const RowVector uniform = RowVector::Constant(4, 0.25);
  const RowVector u = sharpen(uniform, 0.7);
  EXPECT_LE((u - uniform).cwiseAbs().maxCoeff(), 1e-15);

  RowVector with_zero(3);
  with_zero << 0.0, 0.6, 0.4;
  EXPECT_EQ(sharpen(with_zero, 0.5)(0), 0.0);

  try {
    sharpen(RowVector::Zero(3), 0.5);
    FAIL() << "expected a degenerate target";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_target);
  }
}

TEST(Sharpen, IdentityAtZeroAlpha) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const Matrix beta = oracle::random_distributions(rng, 1, 10);
    ASSERT_LE((sharpen(beta.row(0), 0.0) - beta.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Sharpen, NeverIncreasesEntropyAndKeepsArgmax) {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index classes = 2 + static_cast<Eigen::Index>(rng.below(9));
    const RowVector beta = oracle::random_distributions(rng, 1, classes).row(0);
    const double alpha = 2.0 * rng.uniform();
    const RowVector s = sharpen(beta, alpha);
    ASSERT_NEAR(s.sum(), 1.0, 1e-9);
    ASSERT_LE(entropy(s), entropy(beta) + 1e-12);
    Eigen::Index a = 0, b = 0;
    beta.maxCoeff(&a);
    s.maxCoeff(&b);
    ASSERT_EQ(a, b);
  }
}

TEST(RobustCe, OneHotTargetsReproduceCrossEntropy) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix logits = oracle::random_matrix(rng, 9, 10, 3.0);
    const Labels y = oracle::random_labels(rng, 9, 10);
    Matrix onehot = Matrix::Zero(9, 10);
    for (int i = 0; i < 9; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
    const auto ce = cross_entropy(logits, y);
    const auto robust = robust_ce(logits, onehot);
    ASSERT_EQ(robust.loss, ce.loss);
    ASSERT_TRUE((robust.grad.array() == ce.grad.array()).all());
  }
}

TEST(RobustCe, MatchingTargetsGiveEntropyAndZeroGradient) {
  Rng rng(5);
  const Matrix logits = oracle::random_matrix(rng, 6, 4);
  const Matrix p = softmax(logits);
  const auto out = robust_ce(logits, p);
  double mean_entropy = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) mean_entropy += entropy(p.row(r));
  EXPECT_NEAR(out.loss, mean_entropy / 6.0, 1e-12);
  EXPECT_LE(out.grad.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RobustCe, ComposedGradientMatchesFiniteDifferences) {
  Rng rng(6);
  const AlphaSchedule schedule;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index classes = trial % 2 ? 10 : 3;
    const std::size_t batch = 1 + rng.below(16);
    const Matrix logits = oracle::random_matrix(rng, static_cast<Eigen::Index>(batch), classes, 2.0);
    const Matrix student = oracle::random_distributions(rng, static_cast<Eigen::Index>(batch), classes);
    const Labels y = oracle::random_labels(rng, batch, static_cast<int>(classes));
    std::vector<double> alphas;
    for (std::size_t i = 0; i < batch; ++i) alphas.push_back(schedule.for_bucket(1 + static_cast<int>(rng.below(4))));
    const Matrix targets = sharpened_targets(y, student, alphas);
    const auto out = robust_ce(logits, targets);
    const auto numeric = oracle::numeric_gradient(
        [&](const Matrix& l) { return robust_ce(l, targets).loss; }, logits);
    ASSERT_LE(oracle::relative_error(out.grad, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(RobustCe, SharpenedTargetsRowByRow) {
  Rng rng(7);
  const Matrix student = oracle::random_distributions(rng, 5, 4);
  const Labels y{0, 1, 2, 3, 0};
  const std::vector<double> alphas{0.3, 0.45, 0.55, 0.7, 0.0};
  const Matrix targets = sharpened_targets(y, student, alphas);
  for (Eigen::Index r = 0; r < 5; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const RowVector expected = sharpen(beta_targets(y[i], student.row(r), alphas[i]), alphas[i]);
    ASSERT_TRUE((targets.row(r).array() == expected.array()).all());
  }
  EXPECT_THROW(sharpened_targets(y, student, std::vector<double>{0.3}), Error);
  EXPECT_THROW(robust_ce(Matrix::Zero(2, 3), Matrix::Zero(2, 4)), Error);
}
