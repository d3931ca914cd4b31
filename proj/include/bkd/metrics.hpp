#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bkd/nn.hpp"
#include "bkd/otsu.hpp"

namespace bkd {

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> argmax_rows(const Matrix& probs);

/// Fraction of rows whose argmax equals the label.
double accuracy(const Matrix& probs, std::span<const int> labels);

/// P(c = label_i | x_i) for every row.
std::vector<double> prob_at_label(const Matrix& probs, std::span<const int> labels);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 of a predicted noisy set against the true noisy set.
/// An empty prediction has precision 0, an empty truth has recall 0.
DetectionMetrics detection_metrics(std::span<const std::size_t> predicted_noisy,
                                   std::span<const std::size_t> true_noisy, std::size_t n);

enum class ThresholdChoice { mu1, s, mu2 };

std::string_view to_string(ThresholdChoice choice);
ThresholdChoice parse_threshold_choice(std::string_view text);
double threshold_value(const OtsuSplit& split, ThresholdChoice choice);

/// Indices whose value is strictly below the chosen threshold.
std::vector<std::size_t> classify_noisy(std::span<const double> agreement_at_label,
                                        const OtsuSplit& split, ThresholdChoice choice);

std::vector<std::size_t> mask_indices(const std::vector<bool>& mask);

}  // namespace bkd
