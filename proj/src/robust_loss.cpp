#include "bkd/robust_loss.hpp"

namespace bkd {

Matrix sharpened_targets(std::span<const int> labels, const Matrix& student_probs,
                         std::span<const double> alphas) {
  require(labels.size() == static_cast<std::size_t>(student_probs.rows()) &&
              alphas.size() == labels.size(),
          ErrorKind::invalid_input, "labels, alphas and student rows differ in count");
  Matrix targets(student_probs.rows(), student_probs.cols());
  for (Eigen::Index r = 0; r < student_probs.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    targets.row(r) = sharpen(beta_targets(labels[i], student_probs.row(r), alphas[i]), alphas[i]);
  }
  return targets;
}

}  // namespace bkd
