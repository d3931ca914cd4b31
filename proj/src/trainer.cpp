#include "bkd/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "bkd/robust_loss.hpp"

namespace bkd {

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::invalid_config, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::invalid_config, "batch_size must be >= 1");
  require(lr > 0.0 && lr_after_drop > 0.0, ErrorKind::invalid_config,
          "learning rates must be positive");
  require(lr_drop_epoch >= 0, ErrorKind::invalid_config, "lr_drop_epoch must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::invalid_config,
          "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, ErrorKind::invalid_config, "weight_decay must be >= 0");
  require(k >= 1, ErrorKind::invalid_config, "k must be >= 1");
  try {
    otsu_grid_size(otsu_step);
    alphas.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
}

double TrainConfig::lr_at(int epoch) const { return epoch < lr_drop_epoch ? lr : lr_after_drop; }

Evaluation evaluate(const ModelParams& teacher, const ModelParams& student,
                    const Matrix& features) {
  Evaluation out;
  out.teacher = softmax(predict_logits(teacher, features));
  out.student = softmax(predict_logits(student, features));
  out.agreement = agreement(out.teacher, out.student);
  return out;
}

TwoStageTrainer::TwoStageTrainer(TrainConfig config, const Dataset& train, const Dataset* test,
                                 ModelParams teacher, ModelParams student)
    : config_(std::move(config)),
      train_(train),
      test_(test),
      teacher_(std::move(teacher)),
      student_(std::move(student)),
      rng_(config_.seed),
      trace_(config_.k) {
  config_.validate();
  train_.validate();
  require(train_.size() > 0, ErrorKind::invalid_input, "training set is empty");
  require(teacher_.topology == student_.topology, ErrorKind::invalid_input,
          "teacher and student must share a topology");
  require(teacher_.topology.input_dim == train_.dim() &&
              teacher_.topology.num_classes == train_.num_classes,
          ErrorKind::invalid_input, "network topology does not match the dataset");
  if (test_ != nullptr) {
    test_->validate();
    require(test_->dim() == train_.dim() && test_->num_classes == train_.num_classes,
            ErrorKind::invalid_input, "test set does not match the training set");
  }
}

EpochLosses TwoStageTrainer::train_epoch(double lr, std::span<const double> sample_alphas) {
  const bool robust = !sample_alphas.empty();
  require(!robust || sample_alphas.size() == train_.size(), ErrorKind::invalid_input,
          "need one alpha per training sample");
  const SgdOptions options{lr, config_.momentum, config_.weight_decay};

  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(std::span<std::size_t>(order));

  MaxProbAccumulator p_max;
  double teacher_total = 0.0;
  double student_total = 0.0;
  const auto batch_size = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const auto idx =
        std::span<const std::size_t>(order).subspan(begin, std::min(batch_size, order.size() - begin));
    const Matrix features = train_.gather_features(idx);
    const Labels labels = train_.gather_labels(idx);

    const ForwardPass teacher_pass = forward(teacher_, features);
    const ForwardPass student_pass = forward(student_, features);
    const Matrix student_probs = softmax(student_pass.logits);
    p_max.add(student_probs);

    LossAndGrad teacher_loss;
    if (robust) {
      std::vector<double> alphas;
      alphas.reserve(idx.size());
      for (std::size_t i : idx) alphas.push_back(sample_alphas[i]);
      teacher_loss = robust_ce(teacher_pass.logits, sharpened_targets(labels, student_probs, alphas));
    } else {
      teacher_loss = cross_entropy(teacher_pass.logits, labels);
    }
    const LossAndGrad distill = student_loss(teacher_pass.logits, student_pass.logits, labels);

    sgd_step(teacher_, backward(teacher_, teacher_pass.cache, teacher_loss.grad), options);
    sgd_step(student_, backward(student_, student_pass.cache, distill.grad), options);

    const auto weight = static_cast<double>(idx.size());
    teacher_total += teacher_loss.loss * weight;
    student_total += distill.loss * weight;
  }
  const auto n = static_cast<double>(order.size());
  return {teacher_total / n, student_total / n, p_max.value()};
}

namespace {

std::optional<OtsuSplit> try_split(std::span<const double> values, double step) {
  try {
    return otsu_split(values, step);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_distribution) throw;
    return std::nullopt;
  }
}

const Matrix& pick(const Evaluation& eval, ProbSet set) {
  switch (set) {
    case ProbSet::teacher: return eval.teacher;
    case ProbSet::student: return eval.student;
    case ProbSet::agreement: return eval.agreement;
  }
  return eval.agreement;
}

}  // namespace

void TwoStageTrainer::enter_stage_two(const OtsuSplit& split,
                                      const std::vector<double>& agreement_at_label) {
  const auto buckets = assign_buckets(agreement_at_label, split, config_.alphas);
  active_split_ = split;
  sample_alphas_ = buckets.alphas;
  bucket_counts_ = buckets.counts();
}

EpochRecord TwoStageTrainer::step() {
  require(!done(), ErrorKind::invalid_input, "training budget exhausted");
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.stage = stage_;
  rec.lr = config_.lr_at(epoch_);
  if (stage_ == 2) {
    rec.split = active_split_;
    rec.bucket_counts = bucket_counts_;
  }

  const EpochLosses losses =
      train_epoch(rec.lr, stage_ == 2 ? std::span<const double>(sample_alphas_)
                                      : std::span<const double>());
  rec.p_max = losses.p_max;
  rec.teacher_loss = losses.teacher;
  rec.student_loss = losses.student;

  const Evaluation eval = evaluate(teacher_, student_, train_.features);
  const auto agreement_at_label = prob_at_label(eval.agreement, train_.noisy_labels);

  if (test_ != nullptr && test_->size() > 0) {
    const Evaluation test_eval = evaluate(teacher_, student_, test_->features);
    const Labels& truth = test_->clean_labels ? *test_->clean_labels : test_->noisy_labels;
    rec.test_accuracy = std::array<double, 3>{accuracy(test_eval.teacher, truth),
                                              accuracy(test_eval.student, truth),
                                              accuracy(test_eval.agreement, truth)};
  }

  std::vector<std::size_t> true_noisy;
  if (train_.clean_labels) {
    true_noisy = mask_indices(train_.noise_mask());
    DetectionGrid grid;
    for (std::size_t p = 0; p < kProbSets.size(); ++p) {
      const auto values = prob_at_label(pick(eval, kProbSets[p]), train_.noisy_labels);
      const auto split = try_split(values, config_.otsu_step);
      if (!split) continue;
      for (std::size_t t = 0; t < kThresholds.size(); ++t) {
        grid[p][t] = detection_metrics(classify_noisy(values, *split, kThresholds[t]),
                                       true_noisy, train_.size());
      }
    }
    rec.detection = grid;
  }

  const bool detected = trace_.push(losses.p_max).has_value();
  if (config_.method == Method::two_stage && stage_ == 1 && (detected || switch_pending_)) {
    if (const auto split = try_split(agreement_at_label, config_.otsu_step)) {
      enter_stage_two(*split, agreement_at_label);
      stage_ = 2;
      switch_pending_ = false;
      rec.split = split;
      rec.bucket_counts = bucket_counts_;
      StageSwitch sw{epoch_, *split, agreement_at_label,
                     assign_buckets(agreement_at_label, *split, config_.alphas).buckets,
                     std::nullopt};
      if (train_.clean_labels) {
        sw.detection = detection_metrics(
            classify_noisy(agreement_at_label, *split, ThresholdChoice::mu1), true_noisy,
            train_.size());
      }
      stage_switch_ = std::move(sw);
    } else {
      // Degenerate agreement distribution: retry after the next epoch.
      switch_pending_ = true;
    }
  } else if (stage_ == 2 && config_.split_refresh == SplitRefresh::per_epoch) {
    // A degenerate refresh keeps the previous split.
    if (const auto split = try_split(agreement_at_label, config_.otsu_step)) {
      enter_stage_two(*split, agreement_at_label);
    }
  }

  ++epoch_;
  epochs_.push_back(rec);
  return rec;
}

TrainResult TwoStageTrainer::result() const {
  return {teacher_, student_, epochs_, trace_.tipping_point(), stage_switch_};
}

TrainResult train_two_stage(const TrainConfig& config, const Dataset& train, const Dataset* test,
                            ModelParams teacher, ModelParams student,
                            const std::function<void(const EpochRecord&)>& on_epoch) {
  TwoStageTrainer trainer(config, train, test, std::move(teacher), std::move(student));
  while (!trainer.done()) {
    const EpochRecord rec = trainer.step();
    if (on_epoch) on_epoch(rec);
  }
  return trainer.result();
}

}  // namespace bkd
