#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace bkd {

/// Added to the within-class term of the Otsu objective so perfectly
/// separated clusters (zero variance) still give a finite score.
inline constexpr double kOtsuEpsilon = 1e-12;

/// Relative tolerance under which two objective values count as a tie.
inline constexpr double kOtsuTieTolerance = 1e-9;

/// Two-class split of values in [0, 1]: class 1 holds values <= s, class 2
/// values > s. Variances are population variances.
struct OtsuSplit {
  double s = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double q = 0.0;
};

/// Q(s) = [n1 (mu1 - mu)^2 + n2 (mu2 - mu)^2] / [n1 sigma1^2 + n2 sigma2^2 + eps].
/// Throws rejected_threshold if s leaves either class empty.
double otsu_objective(std::span<const double> values, double s);

/// Number of grid intervals for a step, i.e. the grid is {i / n : 0 < i < n}.
/// Throws invalid_input unless 1/step is (numerically) an integer >= 2.
int otsu_grid_size(double step);

/// Maximizes Q over the threshold grid {step, 2 step, ..., 1 - step}, keeping
/// only thresholds that leave both classes nonempty. Grid points whose Q is
/// within kOtsuTieTolerance (relative) of the maximum are ties; the first
/// contiguous run of tied grid points is taken and its midpoint returned,
/// rounding half-way cases up to the next grid point.
///
/// Throws degenerate_distribution if no admissible threshold exists (fewer
/// than two distinct values, or the values span less than one step).
OtsuSplit otsu_split(std::span<const double> values, double step = 0.001);

/// alpha1 < alpha2 < alpha3 < alpha4, each in [0, 1]. Larger alpha means
/// less trust in the annotated label.
struct AlphaSchedule {
  double alpha1 = 0.3;
  double alpha2 = 0.45;
  double alpha3 = 0.55;
  double alpha4 = 0.7;

  void validate() const;

  /// bucket in 1..4
  double for_bucket(int bucket) const;
};

/// 1: v >= mu2, 2: mu2 > v >= s, 3: s > v >= mu1, 4: v < mu1.
int bucket_of(double agreement_at_label, const OtsuSplit& split);

struct BucketAssignment {
  std::vector<int> buckets;
  std::vector<double> alphas;

  std::array<std::size_t, 4> counts() const;
};

BucketAssignment assign_buckets(std::span<const double> agreement_at_label,
                                const OtsuSplit& split, const AlphaSchedule& schedule);

}  // namespace bkd
