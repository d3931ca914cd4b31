#include <gtest/gtest.h>

#include <cmath>

#include "bkd/nn.hpp"
#include "oracles.hpp"

using namespace bkd;

namespace {

// Scalar loss of a network's output under CE, recomputed from scratch.
double network_ce(const ModelParams& params, const Matrix& x, const Labels& y) {
  return cross_entropy(predict_logits(params, x), y).loss;
}

}  // namespace

TEST(InitParams, DeterministicForSeed) {
  const Topology topo{5, {7, 4}, 3};
  const auto a = init_params(topo, 42);
  const auto b = init_params(topo, 42);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_TRUE((a.layers[l].weight.array() == b.layers[l].weight.array()).all());
    EXPECT_TRUE((a.layers[l].bias.array() == b.layers[l].bias.array()).all());
  }
  const auto c = init_params(topo, 43);
  EXPECT_FALSE((a.layers[0].weight.array() == c.layers[0].weight.array()).all());
}

TEST(InitParams, ShapesZeroBiasesAndScale) {
  const auto params = init_params(Topology{2, {4}, 3}, 7);
  ASSERT_EQ(params.layers.size(), 2u);
  EXPECT_EQ(params.layers[0].weight.rows(), 2);
  EXPECT_EQ(params.layers[0].weight.cols(), 4);
  EXPECT_EQ(params.layers[1].weight.rows(), 4);
  EXPECT_EQ(params.layers[1].weight.cols(), 3);
  for (const auto& layer : params.layers) {
    EXPECT_TRUE((layer.bias.array() == 0.0).all());
    EXPECT_LE(layer.weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(double(layer.weight.rows())));
  }
  for (const auto& v : params.velocity) {
    EXPECT_TRUE((v.weight.array() == 0.0).all());
    EXPECT_TRUE((v.bias.array() == 0.0).all());
  }
}

TEST(Topology, RejectsDegenerateShapes) {
  EXPECT_THROW(init_params(Topology{2, {4}, 1}, 0), Error);
  EXPECT_THROW(init_params(Topology{0, {4}, 3}, 0), Error);
  EXPECT_THROW(init_params(Topology{2, {0}, 3}, 0), Error);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  auto params = init_params(Topology{3, {5}, 4}, 1);
  for (auto& layer : params.layers) layer.weight.setZero();
  Rng rng(3);
  const Matrix logits = forward(params, oracle::random_matrix(rng, 6, 3)).logits;
  EXPECT_TRUE((logits.array() == 0.0).all());
}

TEST(Forward, SingleLayerPicksWeightRow) {
  auto params = init_params(Topology{2, {}, 3}, 1);
  params.layers[0].weight << 1.5, -2.0, 0.25, 3.0, 4.0, 5.0;
  Matrix x(1, 2);
  x << 1.0, 0.0;
  const Matrix logits = forward(params, x).logits;
  EXPECT_TRUE((logits.row(0).array() == params.layers[0].weight.row(0).array()).all());
}

TEST(Forward, MatchesNaiveLoops) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto params = init_params(Topology{4, {6, 5}, 3}, 100 + trial);
    for (auto& layer : params.layers) layer.bias = oracle::random_matrix(rng, 1, layer.bias.size());
    const Matrix x = oracle::random_matrix(rng, 7, 4);
    const Matrix expected = oracle::naive_forward(params, x);
    EXPECT_LE((forward(params, x).logits - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((predict_logits(params, x) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, RejectsWrongFeatureWidth) {
  const auto params = init_params(Topology{4, {3}, 2}, 0);
  try {
    forward(params, Matrix::Zero(2, 5));
    FAIL() << "expected a rejected input";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(Softmax, ClosedForms) {
  Matrix logits(3, 3);
  logits << 0.0, 0.0, 0.0, std::log(2.0), 0.0, 0.0, 1000.0, 0.0, 0.0;
  const Matrix p = softmax(logits);
  EXPECT_NEAR(p(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(p(1, 1), 0.25, 1e-15);
  EXPECT_NEAR(p(2, 0), 1.0, 1e-12);
  EXPECT_NEAR(p(2, 1), 0.0, 1e-12);

  Matrix two(1, 2);
  two << 0.0, 0.0;
  EXPECT_EQ(softmax(two)(0, 0), 0.5);
  EXPECT_EQ(softmax(two)(0, 1), 0.5);
}

TEST(Softmax, RowsNormalizedAndPositive) {
  Rng rng(5);
  for (int batch = 0; batch < 1000; ++batch) {
    const int classes = 2 + static_cast<int>(rng.below(9));
    const Matrix logits = oracle::random_matrix(rng, 4, classes, 10.0);
    const Matrix p = softmax(logits);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      ASSERT_NEAR(p.row(r).sum(), 1.0, 1e-6);
      ASSERT_GT(p.row(r).minCoeff(), 0.0);
    }
  }
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix logits = oracle::random_matrix(rng, 3, 5, 3.0);
    const double shift = 50.0 * rng.normal();
    const Matrix shifted = (logits.array() + shift).matrix();
    ASSERT_LT((softmax(logits) - softmax(shifted)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CrossEntropy, ClosedForms) {
  Matrix uniform = Matrix::Zero(1, 2);
  EXPECT_NEAR(cross_entropy(uniform, Labels{1}).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(uniform, Labels{1}).loss, 0.693147, 1e-6);

  Matrix confident(1, 3);
  confident << 30.0, 0.0, 0.0;
  EXPECT_LE(cross_entropy(confident, Labels{0}).loss, 1e-6);
}

TEST(CrossEntropy, ClampsBeforeLog) {
  Matrix logits(1, 2);
  logits << 0.0, -1e6;
  EXPECT_NEAR(cross_entropy(logits, Labels{1}).loss, -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, RejectsBadLabels) {
  const Matrix logits = Matrix::Zero(2, 3);
  EXPECT_THROW(cross_entropy(logits, Labels{0, 3}), Error);
  EXPECT_THROW(cross_entropy(logits, Labels{-1, 0}), Error);
  EXPECT_THROW(cross_entropy(logits, Labels{0}), Error);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix logits = oracle::random_matrix(rng, 8, trial % 2 ? 10 : 3, 2.0);
    const Labels labels = oracle::random_labels(rng, 8, static_cast<int>(logits.cols()));
    const auto analytic = cross_entropy(logits, labels).grad;
    const auto numeric = oracle::numeric_gradient(
        [&](const Matrix& l) { return cross_entropy(l, labels).loss; }, logits);
    ASSERT_LE(oracle::relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto params = init_params(Topology{3, {4}, 2}, 2);
  Rng rng(1);
  const auto pass = forward(params, oracle::random_matrix(rng, 5, 3));
  const auto grads = backward(params, pass.cache, Matrix::Zero(5, 2));
  for (const auto& g : grads.layers) {
    EXPECT_TRUE((g.weight.array() == 0.0).all());
    EXPECT_TRUE((g.bias.array() == 0.0).all());
  }
}

TEST(Backward, SingleLayerClosedForm) {
  const auto params = init_params(Topology{3, {}, 4}, 9);
  Rng rng(2);
  const Matrix x = oracle::random_matrix(rng, 6, 3);
  const Labels y = oracle::random_labels(rng, 6, 4);
  const auto pass = forward(params, x);
  const auto grads = backward(params, pass.cache, cross_entropy(pass.logits, y).grad);

  Matrix onehot = Matrix::Zero(6, 4);
  for (int i = 0; i < 6; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
  const Matrix expected = x.transpose() * (softmax(pass.logits) - onehot) / 6.0;
  EXPECT_LE((grads.layers[0].weight - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, TwoHiddenLayersMatchFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = init_params(Topology{4, {5, 6}, 3}, 500 + trial);
    // Nonzero biases keep pre-activations off the ReLU kink, where central
    // differences and the one-sided mask legitimately disagree.
    for (auto& layer : params.layers) layer.bias = oracle::random_matrix(rng, 1, layer.bias.size(), 0.5);
    const Matrix x = oracle::random_matrix(rng, 6, 4);
    const Labels y = oracle::random_labels(rng, 6, 3);
    const auto pass = forward(params, x);
    const auto grads = backward(params, pass.cache, cross_entropy(pass.logits, y).grad);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const auto numeric_w = oracle::numeric_gradient(
          [&](const Matrix& w) {
            auto probe = params;
            probe.layers[l].weight = w;
            return network_ce(probe, x, y);
          },
          params.layers[l].weight);
      ASSERT_LE(oracle::relative_error(grads.layers[l].weight, numeric_w), 1e-4)
          << "layer " << l << " trial " << trial;
      const auto numeric_b = oracle::numeric_gradient(
          [&](const Matrix& b) {
            auto probe = params;
            probe.layers[l].bias = b;
            return network_ce(probe, x, y);
          },
          params.layers[l].bias);
      ASSERT_LE(oracle::relative_error(grads.layers[l].bias, numeric_b), 1e-4)
          << "layer " << l << " trial " << trial;
    }
  }
}

TEST(Backward, RejectsForeignCache) {
  const auto small = init_params(Topology{3, {4}, 2}, 0);
  const auto deep = init_params(Topology{3, {4, 4}, 2}, 0);
  Rng rng(1);
  const auto pass = forward(small, oracle::random_matrix(rng, 2, 3));
  EXPECT_THROW(backward(deep, pass.cache, Matrix::Zero(2, 2)), Error);
  EXPECT_THROW(backward(small, pass.cache, Matrix::Zero(3, 2)), Error);
}

TEST(SgdStep, PlainGradientStep) {
  auto params = init_params(Topology{2, {3}, 2}, 4);
  const auto before = params;
  Gradients g;
  Rng rng(8);
  for (const auto& layer : params.layers) {
    g.layers.push_back({oracle::random_matrix(rng, layer.weight.rows(), layer.weight.cols()),
                        oracle::random_matrix(rng, 1, layer.bias.size())});
  }
  sgd_step(params, g, {0.1, 0.0, 0.0});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    EXPECT_TRUE((params.layers[l].weight.array() ==
                 (before.layers[l].weight - 0.1 * g.layers[l].weight).array())
                    .all());
  }
}

TEST(SgdStep, ZeroGradientIsFixedPoint) {
  auto params = init_params(Topology{2, {3}, 2}, 4);
  const auto before = params;
  Gradients g;
  for (const auto& layer : params.layers) {
    g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                        RowVector::Zero(layer.bias.size())});
  }
  sgd_step(params, g, {0.1, 0.9, 0.0});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    EXPECT_TRUE((params.layers[l].weight.array() == before.layers[l].weight.array()).all());
  }
}

TEST(SgdStep, MomentumUnrollsOverTwoSteps) {
  // buffer_1 = g, buffer_2 = 0.9 g + g, so the total move is lr * g * (1 + 1.9).
  auto params = init_params(Topology{2, {}, 2}, 4);
  const auto before = params;
  Gradients g;
  g.layers.push_back({Matrix::Constant(2, 2, 0.5), RowVector::Constant(2, -0.25)});
  sgd_step(params, g, {0.1, 0.9, 0.0});
  sgd_step(params, g, {0.1, 0.9, 0.0});
  const Matrix moved = before.layers[0].weight - params.layers[0].weight;
  EXPECT_LE((moved.array() - 0.1 * 0.5 * 2.9).abs().maxCoeff(), 1e-15);
  const RowVector moved_bias = before.layers[0].bias - params.layers[0].bias;
  EXPECT_LE((moved_bias.array() + 0.1 * 0.25 * 2.9).abs().maxCoeff(), 1e-15);
}

TEST(SgdStep, WeightDecaySkipsBiases) {
  auto params = init_params(Topology{2, {}, 2}, 4);
  params.layers[0].bias << 1.0, -1.0;
  const auto before = params;
  Gradients g;
  g.layers.push_back({Matrix::Zero(2, 2), RowVector::Zero(2)});
  sgd_step(params, g, {0.1, 0.0, 0.5});
  EXPECT_TRUE((params.layers[0].bias.array() == before.layers[0].bias.array()).all());
  EXPECT_LE((params.layers[0].weight - before.layers[0].weight * (1.0 - 0.05)).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(SgdStep, NonFiniteGradientIsTrainingFault) {
  auto params = init_params(Topology{2, {}, 2}, 4);
  Gradients g;
  g.layers.push_back({Matrix::Zero(2, 2), RowVector::Zero(2)});
  g.layers[0].weight(1, 1) = std::nan("");
  try {
    sgd_step(params, g, {0.1, 0.9, 0.0});
    FAIL() << "expected a training fault";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::training_fault);
  }
  EXPECT_THROW(sgd_step(params, g, {0.0, 0.9, 0.0}), Error);
  EXPECT_THROW(sgd_step(params, g, {0.1, 1.0, 0.0}), Error);
}
