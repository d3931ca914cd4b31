#include "bkd/otsu.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bkd/error.hpp"

namespace bkd {

double otsu_objective(std::span<const double> values, double s) {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double sum1 = 0.0;
  double sum2 = 0.0;
  for (double v : values) {
    if (v <= s) {
      ++n1;
      sum1 += v;
    } else {
      ++n2;
      sum2 += v;
    }
  }
  require(n1 > 0 && n2 > 0, ErrorKind::rejected_threshold,
          "threshold " + std::to_string(s) + " leaves a class empty");
  const double mu1 = sum1 / static_cast<double>(n1);
  const double mu2 = sum2 / static_cast<double>(n2);
  const double mu = (sum1 + sum2) / static_cast<double>(n1 + n2);

  double ss1 = 0.0;
  double ss2 = 0.0;
  for (double v : values) {
    if (v <= s) {
      ss1 += (v - mu1) * (v - mu1);
    } else {
      ss2 += (v - mu2) * (v - mu2);
    }
  }
  const double between = static_cast<double>(n1) * (mu1 - mu) * (mu1 - mu) +
                         static_cast<double>(n2) * (mu2 - mu) * (mu2 - mu);
  // n * sigma^2 with population variance is the sum of squared deviations.
  return between / (ss1 + ss2 + kOtsuEpsilon);
}

int otsu_grid_size(double step) {
  require(step > 0.0 && step < 1.0, ErrorKind::invalid_input, "Otsu step must be in (0, 1)");
  const double inverse = 1.0 / step;
  const auto n = static_cast<int>(std::llround(inverse));
  require(n >= 2 && std::abs(inverse - n) <= 1e-6 * inverse, ErrorKind::invalid_input,
          "Otsu step must divide 1 evenly");
  return n;
}

namespace {

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
};

// Welford prefix moments: out[m] covers the first m entries of `sorted`.
std::vector<Moments> running_moments(std::span<const double> sorted) {
  std::vector<Moments> out(sorted.size() + 1);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    Moments next = out[i];
    const double delta = sorted[i] - next.mean;
    next.mean += delta / static_cast<double>(i + 1);
    next.m2 += delta * (sorted[i] - next.mean);
    out[i + 1] = next;
  }
  return out;
}

}  // namespace

OtsuSplit otsu_split(std::span<const double> values, double step) {
  const int grid = otsu_grid_size(step);
  require(values.size() >= 2, ErrorKind::degenerate_distribution,
          "Otsu split needs at least two values");
  for (double v : values) {
    require(v >= 0.0 && v <= 1.0, ErrorKind::invalid_input, "Otsu values must lie in [0, 1]");
  }

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  require(sorted.front() < sorted.back(), ErrorKind::degenerate_distribution,
          "Otsu split needs at least two distinct values");
  require(sorted.back() - sorted.front() >= 1.0 / grid, ErrorKind::degenerate_distribution,
          "Otsu split needs values spread over at least one grid step");

  const auto prefix = running_moments(sorted);
  std::vector<double> reversed(sorted.rbegin(), sorted.rend());
  const auto suffix = running_moments(reversed);  // suffix[m]: the largest m values
  double total = 0.0;
  for (double v : sorted) total += v;
  const double mu = total / static_cast<double>(n);

  struct Candidate {
    int index;
    std::size_t n1;
    double q;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(grid));

  std::size_t n1 = 0;
  std::size_t last_n1 = 0;
  double last_q = 0.0;
  for (int i = 1; i < grid; ++i) {
    const double s = static_cast<double>(i) / grid;
    while (n1 < n && sorted[n1] <= s) ++n1;
    if (n1 == 0) continue;
    if (n1 == n) break;
    double q = last_q;
    if (n1 != last_n1) {
      const std::size_t n2 = n - n1;
      const Moments& low = prefix[n1];
      const Moments& high = suffix[n2];
      const double between = static_cast<double>(n1) * (low.mean - mu) * (low.mean - mu) +
                             static_cast<double>(n2) * (high.mean - mu) * (high.mean - mu);
      q = between / (low.m2 + high.m2 + kOtsuEpsilon);
      last_n1 = n1;
      last_q = q;
    }
    candidates.push_back({i, n1, q});
  }
  require(!candidates.empty(), ErrorKind::degenerate_distribution,
          "no grid threshold separates the values (spread below the step)");

  double q_max = candidates.front().q;
  for (const auto& c : candidates) q_max = std::max(q_max, c.q);
  const double floor = q_max - kOtsuTieTolerance * std::abs(q_max);

  std::size_t first = 0;
  while (candidates[first].q < floor) ++first;
  std::size_t last = first;
  while (last + 1 < candidates.size() && candidates[last + 1].q >= floor &&
         candidates[last + 1].index == candidates[last].index + 1) {
    ++last;
  }
  const auto& chosen = candidates[first + (last - first + 1) / 2];

  OtsuSplit split;
  split.s = static_cast<double>(chosen.index) / grid;
  split.n1 = chosen.n1;
  split.n2 = n - chosen.n1;
  split.mu1 = prefix[split.n1].mean;
  split.mu2 = suffix[split.n2].mean;
  split.sigma1 = std::sqrt(prefix[split.n1].m2 / static_cast<double>(split.n1));
  split.sigma2 = std::sqrt(suffix[split.n2].m2 / static_cast<double>(split.n2));
  split.q = chosen.q;
  return split;
}

void AlphaSchedule::validate() const {
  for (double a : {alpha1, alpha2, alpha3, alpha4}) {
    require(a >= 0.0 && a <= 1.0, ErrorKind::invalid_input, "alpha values must lie in [0, 1]");
  }
  require(alpha1 < alpha2 && alpha2 < alpha3 && alpha3 < alpha4, ErrorKind::invalid_input,
          "alpha values must be strictly increasing");
}

double AlphaSchedule::for_bucket(int bucket) const {
  switch (bucket) {
    case 1: return alpha1;
    case 2: return alpha2;
    case 3: return alpha3;
    case 4: return alpha4;
    default: break;
  }
  throw Error(ErrorKind::invalid_input, "bucket must be in 1..4");
}

int bucket_of(double agreement_at_label, const OtsuSplit& split) {
  if (agreement_at_label >= split.mu2) return 1;
  if (agreement_at_label >= split.s) return 2;
  if (agreement_at_label >= split.mu1) return 3;
  return 4;
}

std::array<std::size_t, 4> BucketAssignment::counts() const {
  std::array<std::size_t, 4> out{};
  for (int b : buckets) ++out[static_cast<std::size_t>(b - 1)];
  return out;
}

BucketAssignment assign_buckets(std::span<const double> agreement_at_label,
                                const OtsuSplit& split, const AlphaSchedule& schedule) {
  schedule.validate();
  BucketAssignment out;
  out.buckets.reserve(agreement_at_label.size());
  out.alphas.reserve(agreement_at_label.size());
  for (double v : agreement_at_label) {
    const int bucket = bucket_of(v, split);
    out.buckets.push_back(bucket);
    out.alphas.push_back(schedule.for_bucket(bucket));
  }
  return out;
}

}  // namespace bkd
