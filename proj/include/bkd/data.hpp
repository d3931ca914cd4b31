#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bkd/nn.hpp"

namespace bkd {

enum class SplitTag { train, test };

/// Labeled samples. `noisy_labels` are the annotations training sees;
/// `clean_labels`, when known, are the true classes.
struct Dataset {
  Matrix features;
  Labels noisy_labels;
  std::optional<Labels> clean_labels;
  int num_classes = 0;
  SplitTag split = SplitTag::train;

  std::size_t size() const { return noisy_labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }

  /// Throws invalid_input if labels and features disagree.
  void validate() const;

  /// mask[i] = noisy_labels[i] != clean_labels[i]; empty without clean labels.
  std::vector<bool> noise_mask() const;

  /// Rows `indices` of features and noisy labels, in that order.
  Matrix gather_features(std::span<const std::size_t> indices) const;
  Labels gather_labels(std::span<const std::size_t> indices) const;
};

/// Gaussian class clusters around centers drawn uniformly from
/// [-center_spread, center_spread]^dim. Samples are grouped by class.
struct BlobSpec {
  int num_classes = 10;
  int samples_per_class = 500;
  int test_samples_per_class = 200;
  int dim = 32;
  double center_spread = 1.0;
  double cluster_std = 1.0;

  void validate() const;
};

Dataset gen_blobs(int num_classes, int samples_per_class, int dim, double center_spread,
                  double cluster_std, std::uint64_t seed);

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Train split identical to gen_blobs(spec..., seed); the test split shares
/// the class centers but draws its samples from an independent stream.
TrainTest gen_blob_split(const BlobSpec& spec, std::uint64_t seed);

enum class NoiseKind { symmetric, confusion };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::symmetric;
  double rate = 0.0;
  /// Row-stochastic |C| x |C| transition matrix, used by NoiseKind::confusion.
  Eigen::MatrixXd confusion;
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

struct NoisyLabels {
  Labels labels;
  std::vector<bool> mask;
};

/// Symmetric: exactly round(rate * n) distinct samples are flipped, each to a
/// uniformly chosen different class. Confusion: every label is resampled from
/// its matrix row.
NoisyLabels inject_noise(std::span<const int> clean_labels, int num_classes,
                         const NoiseSpec& spec);

inline constexpr std::size_t kCifarImageBytes = 3072;
inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Parses 3073-byte records: label byte (0-9), then red, green and blue
/// 32x32 planes. Pixels are scaled by 1/255.
Dataset parse_cifar10_records(std::span<const std::uint8_t> bytes);

/// Concatenates the records of every file, in order.
Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths);

/// Writes clean (or, without them, noisy) labels and pixels quantized by
/// round(255 * v). Features must have 3072 columns with values in [0, 1].
void write_cifar10_binary(const Dataset& dataset, const std::filesystem::path& path);

/// One base-10 integer per line, LF or CRLF. Throws length_mismatch or
/// malformed_label.
Labels load_label_file(const std::filesystem::path& path, std::size_t expected_len,
                       int num_classes);

/// Replaces the training annotations: the dataset's current labels become the
/// clean labels (unless clean labels already exist) and `labels` the noisy ones.
void attach_noisy_labels(Dataset& dataset, Labels labels);

}  // namespace bkd
