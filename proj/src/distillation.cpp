#include "bkd/distillation.hpp"

#include <string>

namespace bkd {

void MaxProbAccumulator::add(const Matrix& probs) {
  for (Eigen::Index r = 0; r < probs.rows(); ++r) sum_ += probs.row(r).maxCoeff();
  count_ += static_cast<std::size_t>(probs.rows());
}

double MaxProbAccumulator::value() const {
  require(count_ > 0, ErrorKind::invalid_input, "mean max probability of an empty epoch");
  return sum_ / static_cast<double>(count_);
}

void MaxProbAccumulator::reset() {
  sum_ = 0.0;
  count_ = 0;
}

double mean_max_probability(const Matrix& probs) {
  MaxProbAccumulator acc;
  acc.add(probs);
  return acc.value();
}

MaxProbTrace::MaxProbTrace(int k) : k_(k) {
  require(k >= 1, ErrorKind::invalid_input, "tipping window half-width k must be >= 1");
}

std::optional<TippingPoint> MaxProbTrace::push(double p_max) {
  require(p_max > 0.0 && p_max <= 1.0, ErrorKind::invalid_input,
          "p_max must lie in (0, 1], got " + std::to_string(p_max));
  values_.push_back(p_max);
  if (tipping_) return tipping_;

  const int current = static_cast<int>(values_.size()) - 1;
  if (current < 2 * k_) return std::nullopt;
  const int center = current - k_;
  const double peak = values_[static_cast<std::size_t>(center)];
  for (int j = current - 2 * k_; j <= current; ++j) {
    if (values_[static_cast<std::size_t>(j)] > peak) return std::nullopt;
  }
  tipping_ = TippingPoint{center, current};
  return tipping_;
}

std::optional<TippingPoint> detect_tipping_point(std::span<const double> trace, int k) {
  MaxProbTrace replay(k);
  for (double value : trace) replay.push(value);
  return replay.tipping_point();
}

Matrix agreement(const Matrix& teacher_probs, const Matrix& student_probs) {
  require(teacher_probs.rows() == student_probs.rows() &&
              teacher_probs.cols() == student_probs.cols(),
          ErrorKind::invalid_input, "teacher and student probabilities differ in shape");
  Matrix joint = teacher_probs.cwiseProduct(student_probs);
  for (Eigen::Index r = 0; r < joint.rows(); ++r) {
    const double norm = joint.row(r).sum();
    require(norm >= 1e-300, ErrorKind::degenerate_agreement,
            "teacher and student assign disjoint support in row " + std::to_string(r));
    joint.row(r) /= norm;
  }
  return joint;
}

}  // namespace bkd
