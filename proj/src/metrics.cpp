#include "bkd/metrics.hpp"

#include <algorithm>
#include <string>

namespace bkd {

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Matrix& probs, std::span<const int> labels) {
  require(probs.rows() > 0, ErrorKind::invalid_input, "accuracy of an empty set");
  require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorKind::invalid_input,
          "prediction and label counts differ");
  const auto predicted = argmax_rows(probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<double> prob_at_label(const Matrix& probs, std::span<const int> labels) {
  require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorKind::invalid_input,
          "probability rows and label counts differ");
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < probs.cols(), ErrorKind::invalid_input,
            "label out of range");
    out[i] = probs(static_cast<Eigen::Index>(i), labels[i]);
  }
  return out;
}

DetectionMetrics detection_metrics(std::span<const std::size_t> predicted_noisy,
                                   std::span<const std::size_t> true_noisy, std::size_t n) {
  std::vector<bool> truth(n, false);
  for (std::size_t i : true_noisy) {
    require(i < n, ErrorKind::invalid_input, "true noisy index out of range");
    truth[i] = true;
  }
  std::vector<bool> seen(n, false);
  std::size_t hits = 0;
  std::size_t predicted = 0;
  for (std::size_t i : predicted_noisy) {
    require(i < n, ErrorKind::invalid_input, "predicted noisy index out of range");
    if (seen[i]) continue;
    seen[i] = true;
    ++predicted;
    hits += truth[i];
  }
  const auto actual = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));

  DetectionMetrics m;
  m.precision = predicted == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(predicted);
  m.recall = actual == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(actual);
  // 2 / (1/Pr + 1/Re) written without the reciprocals so zeros stay finite.
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::string_view to_string(ThresholdChoice choice) {
  switch (choice) {
    case ThresholdChoice::mu1: return "mu1";
    case ThresholdChoice::s: return "s";
    case ThresholdChoice::mu2: return "mu2";
  }
  return "?";
}

ThresholdChoice parse_threshold_choice(std::string_view text) {
  if (text == "mu1") return ThresholdChoice::mu1;
  if (text == "s") return ThresholdChoice::s;
  if (text == "mu2") return ThresholdChoice::mu2;
  throw Error(ErrorKind::invalid_input, "threshold must be one of mu1, s, mu2; got '" +
                                            std::string(text) + "'");
}

double threshold_value(const OtsuSplit& split, ThresholdChoice choice) {
  switch (choice) {
    case ThresholdChoice::mu1: return split.mu1;
    case ThresholdChoice::s: return split.s;
    case ThresholdChoice::mu2: return split.mu2;
  }
  return split.s;
}

std::vector<std::size_t> classify_noisy(std::span<const double> agreement_at_label,
                                        const OtsuSplit& split, ThresholdChoice choice) {
  const double threshold = threshold_value(split, choice);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < agreement_at_label.size(); ++i) {
    if (agreement_at_label[i] < threshold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> mask_indices(const std::vector<bool>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

}  // namespace bkd
