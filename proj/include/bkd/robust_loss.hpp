#pragma once

#include <span>

#include "bkd/nn.hpp"

namespace bkd {

/// beta_c = (1 - alpha) [c == label] + alpha * P_S(c). The student
/// probabilities are plain inputs, so nothing here reaches the student.
template <typename Derived>
RowVector beta_targets(int label, const Eigen::MatrixBase<Derived>& student_probs, double alpha) {
  require(label >= 0 && label < student_probs.size(), ErrorKind::invalid_input,
          "label out of range");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_input, "alpha must lie in [0, 1]");
  RowVector beta = alpha * student_probs.derived().template cast<double>();
  beta(label) += 1.0 - alpha;
  return beta;
}

/// S(beta)_c = beta_c^(1+alpha) / sum_i beta_i^(1+alpha), with 0^(1+alpha) = 0.
template <typename Derived>
RowVector sharpen(const Eigen::MatrixBase<Derived>& beta, double alpha) {
  require(alpha >= 0.0, ErrorKind::invalid_input, "sharpening alpha must be non-negative");
  RowVector out(beta.size());
  const double exponent = 1.0 + alpha;
  for (Eigen::Index c = 0; c < beta.size(); ++c) {
    const double b = beta(c);
    require(b >= 0.0, ErrorKind::invalid_input, "sharpen expects non-negative weights");
    out(c) = b == 0.0 ? 0.0 : (exponent == 1.0 ? b : std::pow(b, exponent));
  }
  const double norm = out.sum();
  require(norm > 0.0, ErrorKind::degenerate_target, "cannot sharpen an all-zero target");
  out /= norm;
  return out;
}

/// Builds S(beta) for a whole batch: one label, one alpha and one row of
/// student probabilities per sample.
Matrix sharpened_targets(std::span<const int> labels, const Matrix& student_probs,
                         std::span<const double> alphas);

/// Mean over samples of -sum_c target_c log P_T(c), with the same probability
/// floor as cross_entropy. Gradient wrt teacher logits is (P_T - target)/batch.
template <typename LogitDerived, typename TargetDerived>
LossAndGrad robust_ce(const Eigen::MatrixBase<LogitDerived>& teacher_logits,
                      const Eigen::MatrixBase<TargetDerived>& targets) {
  require(teacher_logits.rows() == targets.rows() && teacher_logits.cols() == targets.cols(),
          ErrorKind::invalid_input, "targets do not match the logit batch");
  require(teacher_logits.rows() > 0, ErrorKind::invalid_input, "empty batch");
  const auto batch = static_cast<double>(teacher_logits.rows());
  LossAndGrad out;
  out.grad = softmax(teacher_logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < out.grad.rows(); ++r) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < out.grad.cols(); ++c) {
      const double t = targets(r, c);
      if (t != 0.0) row += t * std::log(std::max(out.grad(r, c), kProbabilityFloor));
    }
    total -= row;
  }
  out.grad -= targets;
  out.loss = total / batch;
  out.grad /= batch;
  return out;
}

}  // namespace bkd
