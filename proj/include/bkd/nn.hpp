#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bkd/error.hpp"

namespace bkd {

/// Batches are stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Labels = std::vector<int>;

/// Floor applied to probabilities before taking a log.
inline constexpr double kProbabilityFloor = 1e-12;

enum class Activation { relu };

struct Topology {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;
  Activation activation = Activation::relu;

  /// Throws invalid_input unless num_classes >= 2 and every width >= 1.
  void validate() const;

  /// input_dim, hidden..., num_classes.
  std::vector<int> layer_widths() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Weight is fan_in x fan_out so that a layer computes `input * weight + bias`.
struct DenseLayer {
  Matrix weight;
  RowVector bias;
};

struct ModelParams {
  Topology topology;
  std::vector<DenseLayer> layers;
  std::vector<DenseLayer> velocity;
  std::uint64_t seed = 0;

  bool all_finite() const;
};

struct Gradients {
  std::vector<DenseLayer> layers;
};

/// Inputs seen by each layer during a forward pass. inputs[0] is the raw
/// feature batch, inputs[l] for l > 0 is the post-ReLU output of layer l-1.
struct ForwardCache {
  std::vector<Matrix> inputs;
};

struct ForwardPass {
  Matrix logits;
  ForwardCache cache;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

struct SgdOptions {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases and velocity.
ModelParams init_params(const Topology& topology, std::uint64_t seed);

ForwardPass forward(const ModelParams& params, const Matrix& features);

/// forward() without keeping activations around; for evaluation passes.
Matrix predict_logits(const ModelParams& params, const Matrix& features);

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits);

/// velocity <- momentum * velocity + grad + weight_decay * weight
/// weight   <- weight - lr * velocity
/// Biases follow the same rule without the decay term.
void sgd_step(ModelParams& params, const Gradients& grads, const SgdOptions& options);

/// Row-wise softmax with max subtraction.
template <typename Derived>
Matrix softmax(const Eigen::MatrixBase<Derived>& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    probs.row(r) = (logits.row(r).array() - peak).exp().matrix();
    probs.row(r) /= probs.row(r).sum();
  }
  return probs;
}

namespace detail {

template <typename Derived>
void check_labels(const Eigen::MatrixBase<Derived>& logits, std::span<const int> labels) {
  require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), ErrorKind::invalid_input,
          "label count does not match batch size");
  for (int label : labels) {
    require(label >= 0 && label < logits.cols(), ErrorKind::invalid_input,
            "label out of range");
  }
}

}  // namespace detail

/// Mean of -log P(y = label | x) over the batch, and its gradient wrt logits.
template <typename Derived>
LossAndGrad cross_entropy(const Eigen::MatrixBase<Derived>& logits, std::span<const int> labels) {
  detail::check_labels(logits, labels);
  require(logits.rows() > 0, ErrorKind::invalid_input, "empty batch");
  const auto batch = static_cast<double>(logits.rows());
  LossAndGrad out;
  out.grad = softmax(logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < out.grad.rows(); ++r) {
    const auto label = labels[static_cast<std::size_t>(r)];
    total -= std::log(std::max(out.grad(r, label), kProbabilityFloor));
    out.grad(r, label) -= 1.0;
  }
  out.loss = total / batch;
  out.grad /= batch;
  return out;
}

}  // namespace bkd
