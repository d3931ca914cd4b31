#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bkd/data.hpp"
#include "bkd/distillation.hpp"
#include "bkd/metrics.hpp"
#include "bkd/nn.hpp"
#include "bkd/otsu.hpp"
#include "bkd/rng.hpp"

namespace bkd {

enum class SplitRefresh { per_epoch, frozen };

/// two_stage switches the teacher to the robust loss at the tipping point;
/// ce_only keeps plain cross-entropy for the whole budget (the baseline).
enum class Method { two_stage, ce_only };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double lr = 0.02;
  int lr_drop_epoch = 50;
  double lr_after_drop = 0.002;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int k = 5;
  double otsu_step = 0.001;
  AlphaSchedule alphas;
  SplitRefresh split_refresh = SplitRefresh::per_epoch;
  Method method = Method::two_stage;
  /// Seeds the per-epoch shuffling.
  std::uint64_t seed = 0;

  void validate() const;

  /// Epochs are 0-based; the drop applies from lr_drop_epoch onwards.
  double lr_at(int epoch) const;
};

/// Probability sets evaluated on the training data.
enum class ProbSet { teacher, student, agreement };
inline constexpr std::array<ProbSet, 3> kProbSets{ProbSet::teacher, ProbSet::student,
                                                  ProbSet::agreement};
inline constexpr std::array<ThresholdChoice, 3> kThresholds{ThresholdChoice::mu1,
                                                            ThresholdChoice::s,
                                                            ThresholdChoice::mu2};

/// [prob set][threshold] noise-detection scores; empty where Otsu was degenerate.
using DetectionGrid = std::array<std::array<std::optional<DetectionMetrics>, 3>, 3>;

struct EpochRecord {
  int epoch = 0;
  int stage = 1;
  double lr = 0.0;
  double p_max = 0.0;
  double teacher_loss = 0.0;
  double student_loss = 0.0;
  /// Split weighting this epoch's stage-2 loss, or the split computed at the
  /// end of the epoch on which the tipping point was detected.
  std::optional<OtsuSplit> split;
  std::array<std::size_t, 4> bucket_counts{};
  std::optional<std::array<double, 3>> test_accuracy;  // P_T, P_S, P_A
  std::optional<DetectionGrid> detection;
};

/// Per-sample state captured when stage 2 was entered.
struct StageSwitch {
  int epoch = 0;
  OtsuSplit split;
  std::vector<double> agreement_at_label;
  std::vector<int> buckets;
  std::optional<DetectionMetrics> detection;  // (P_A, mu1)
};

struct TrainResult {
  ModelParams teacher;
  ModelParams student;
  std::vector<EpochRecord> epochs;
  std::optional<TippingPoint> tipping;
  std::optional<StageSwitch> stage_switch;
};

/// Full-dataset probabilities for one parameter snapshot.
struct Evaluation {
  Matrix teacher;
  Matrix student;
  Matrix agreement;
};

Evaluation evaluate(const ModelParams& teacher, const ModelParams& student, const Matrix& features);

struct EpochLosses {
  double teacher = 0.0;
  double student = 0.0;
  double p_max = 0.0;
};

/// Owns the teacher/student pair and walks the two-stage schedule one epoch
/// at a time.
class TwoStageTrainer {
 public:
  TwoStageTrainer(TrainConfig config, const Dataset& train, const Dataset* test,
                  ModelParams teacher, ModelParams student);

  /// Runs the next epoch of the schedule, including evaluation and the
  /// tipping-point bookkeeping.
  EpochRecord step();

  bool done() const { return epoch_ >= config_.epochs; }

  /// One shuffled pass over the training data. With `sample_alphas` empty the
  /// teacher minimizes cross-entropy; otherwise the robust loss with the
  /// given per-sample alpha (indexed by training sample). The student always
  /// minimizes the blind distillation loss.
  EpochLosses train_epoch(double lr, std::span<const double> sample_alphas);

  TrainResult result() const;

  const ModelParams& teacher() const { return teacher_; }
  const ModelParams& student() const { return student_; }
  int stage() const { return stage_; }
  const MaxProbTrace& trace() const { return trace_; }

 private:
  void enter_stage_two(const OtsuSplit& split, const std::vector<double>& agreement_at_label);

  TrainConfig config_;
  const Dataset& train_;
  const Dataset* test_;
  ModelParams teacher_;
  ModelParams student_;
  Rng rng_;
  MaxProbTrace trace_;
  int epoch_ = 0;
  int stage_ = 1;
  bool switch_pending_ = false;
  std::optional<OtsuSplit> active_split_;
  std::vector<double> sample_alphas_;
  std::array<std::size_t, 4> bucket_counts_{};
  std::optional<StageSwitch> stage_switch_;
  std::vector<EpochRecord> epochs_;
};

/// Runs every epoch. `on_epoch` sees each record as soon as it is complete.
TrainResult train_two_stage(const TrainConfig& config, const Dataset& train, const Dataset* test,
                            ModelParams teacher, ModelParams student,
                            const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace bkd
