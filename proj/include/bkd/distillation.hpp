#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bkd/nn.hpp"

namespace bkd {

/// Squared error between teacher and student logits over every class except
/// the annotated one, averaged over the |C|-1 complementary classes and the
/// batch. The teacher logits are constants: only the student gets a gradient,
/// and that gradient is exactly zero at each sample's label coordinate.
template <typename TeacherDerived, typename StudentDerived>
LossAndGrad student_loss(const Eigen::MatrixBase<TeacherDerived>& teacher_logits,
                         const Eigen::MatrixBase<StudentDerived>& student_logits,
                         std::span<const int> labels) {
  require(teacher_logits.rows() == student_logits.rows() &&
              teacher_logits.cols() == student_logits.cols(),
          ErrorKind::invalid_input, "teacher and student logits differ in shape");
  require(student_logits.cols() >= 2, ErrorKind::invalid_input,
          "student loss needs at least two classes");
  require(student_logits.rows() > 0, ErrorKind::invalid_input, "empty batch");
  detail::check_labels(student_logits, labels);

  const auto batch = static_cast<double>(student_logits.rows());
  const auto complementary = static_cast<double>(student_logits.cols() - 1);
  LossAndGrad out;
  out.grad = Matrix::Zero(student_logits.rows(), student_logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < student_logits.rows(); ++r) {
    const auto label = labels[static_cast<std::size_t>(r)];
    double row_sum = 0.0;
    for (Eigen::Index c = 0; c < student_logits.cols(); ++c) {
      if (c == label) continue;
      const double diff = teacher_logits(r, c) - student_logits(r, c);
      row_sum += diff * diff;
      out.grad(r, c) = -2.0 * diff / (complementary * batch);
    }
    total += row_sum / complementary;
  }
  out.loss = total / batch;
  return out;
}

/// Running mean of the per-sample maximal class probability over one epoch.
class MaxProbAccumulator {
 public:
  void add(const Matrix& probs);

  /// Mean over every sample added so far. Throws invalid_input when empty.
  double value() const;

  std::size_t count() const { return count_; }
  void reset();

 private:
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

/// (1/|X|) sum_x max_c P(c|x) for a full set of probability rows.
double mean_max_probability(const Matrix& probs);

struct TippingPoint {
  int epoch = 0;
  int detected_at = 0;

  friend bool operator==(const TippingPoint&, const TippingPoint&) = default;
};

/// Epoch-ordered p_max values plus the causal peak detector over a centered
/// window of 2k+1 epochs. After the first detection the result is latched.
class MaxProbTrace {
 public:
  explicit MaxProbTrace(int k);

  /// Appends the value for the next epoch and returns the (latched) tipping
  /// point if one is known after this epoch.
  std::optional<TippingPoint> push(double p_max);

  std::optional<TippingPoint> tipping_point() const { return tipping_; }
  const std::vector<double>& values() const { return values_; }
  int k() const { return k_; }

 private:
  int k_;
  std::vector<double> values_;
  std::optional<TippingPoint> tipping_;
};

/// Offline form of the detector: replays push() over the whole trace.
std::optional<TippingPoint> detect_tipping_point(std::span<const double> trace, int k);

/// Renormalized elementwise product of teacher and student probabilities.
/// Throws degenerate_agreement when a row's product sum is below 1e-300.
Matrix agreement(const Matrix& teacher_probs, const Matrix& student_probs);

}  // namespace bkd
