#include "bkd/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "bkd/rng.hpp"

namespace bkd {

void Dataset::validate() const {
  require(num_classes >= 2, ErrorKind::invalid_input, "dataset needs at least two classes");
  require(static_cast<std::size_t>(features.rows()) == noisy_labels.size(),
          ErrorKind::invalid_input, "feature rows and labels differ in count");
  for (int label : noisy_labels) {
    require(label >= 0 && label < num_classes, ErrorKind::invalid_input, "label out of range");
  }
  if (clean_labels) {
    require(clean_labels->size() == noisy_labels.size(), ErrorKind::invalid_input,
            "clean and noisy labels differ in length");
    for (int label : *clean_labels) {
      require(label >= 0 && label < num_classes, ErrorKind::invalid_input,
              "clean label out of range");
    }
  }
}

std::vector<bool> Dataset::noise_mask() const {
  if (!clean_labels) return {};
  std::vector<bool> mask(size());
  for (std::size_t i = 0; i < size(); ++i) mask[i] = noisy_labels[i] != (*clean_labels)[i];
  return mask;
}

Matrix Dataset::gather_features(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

Labels Dataset::gather_labels(std::span<const std::size_t> indices) const {
  Labels out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(noisy_labels[i]);
  return out;
}

void BlobSpec::validate() const {
  require(num_classes >= 2, ErrorKind::invalid_input, "blobs need at least two classes");
  require(samples_per_class >= 1 && test_samples_per_class >= 0 && dim >= 1,
          ErrorKind::invalid_input, "blob counts must be positive");
  require(center_spread > 0.0 && cluster_std > 0.0, ErrorKind::invalid_input,
          "blob spread and std must be positive");
}

namespace {

Dataset sample_blobs(const Eigen::MatrixXd& centers, int samples_per_class, double cluster_std,
                     SplitTag split, Rng& rng) {
  const auto num_classes = static_cast<int>(centers.rows());
  const auto dim = centers.cols();
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(num_classes) * samples_per_class, dim);
  out.noisy_labels.reserve(static_cast<std::size_t>(out.features.rows()));
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < samples_per_class; ++i, ++row) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        out.features(row, d) = centers(c, d) + cluster_std * rng.normal();
      }
      out.noisy_labels.push_back(c);
    }
  }
  out.clean_labels = out.noisy_labels;
  return out;
}

Eigen::MatrixXd draw_centers(int num_classes, int dim, double spread, Rng& rng) {
  Eigen::MatrixXd centers(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    for (int d = 0; d < dim; ++d) centers(c, d) = rng.uniform(-spread, spread);
  }
  return centers;
}

}  // namespace

Dataset gen_blobs(int num_classes, int samples_per_class, int dim, double center_spread,
                  double cluster_std, std::uint64_t seed) {
  BlobSpec spec{num_classes, samples_per_class, 0, dim, center_spread, cluster_std};
  spec.validate();
  Rng rng(seed);
  const auto centers = draw_centers(num_classes, dim, center_spread, rng);
  return sample_blobs(centers, samples_per_class, cluster_std, SplitTag::train, rng);
}

TrainTest gen_blob_split(const BlobSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const auto centers = draw_centers(spec.num_classes, spec.dim, spec.center_spread, rng);
  TrainTest out;
  out.train = sample_blobs(centers, spec.samples_per_class, spec.cluster_std, SplitTag::train, rng);
  Rng test_rng(derive_seed(seed, 0));
  out.test = sample_blobs(centers, spec.test_samples_per_class, spec.cluster_std, SplitTag::test,
                          test_rng);
  return out;
}

void NoiseSpec::validate(int num_classes) const {
  if (kind == NoiseKind::symmetric) {
    require(rate >= 0.0 && rate < 1.0, ErrorKind::invalid_input,
            "symmetric noise rate must lie in [0, 1)");
    return;
  }
  require(confusion.rows() == num_classes && confusion.cols() == num_classes,
          ErrorKind::invalid_input, "confusion matrix must be |C| x |C|");
  for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
    require((confusion.row(r).array() >= 0.0).all(), ErrorKind::invalid_input,
            "confusion matrix entries must be non-negative");
    require(std::abs(confusion.row(r).sum() - 1.0) <= 1e-9, ErrorKind::invalid_input,
            "confusion matrix rows must sum to 1");
  }
}

NoisyLabels inject_noise(std::span<const int> clean_labels, int num_classes,
                         const NoiseSpec& spec) {
  require(num_classes >= 2, ErrorKind::invalid_input, "noise needs at least two classes");
  spec.validate(num_classes);
  for (int label : clean_labels) {
    require(label >= 0 && label < num_classes, ErrorKind::invalid_input, "label out of range");
  }
  const std::size_t n = clean_labels.size();
  NoisyLabels out{Labels(clean_labels.begin(), clean_labels.end()), std::vector<bool>(n, false)};
  Rng rng(spec.seed);

  if (spec.kind == NoiseKind::symmetric) {
    const auto flips = static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(n)));
    require(flips <= n, ErrorKind::invalid_input, "noise rate flips more labels than exist");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `flips` slots are a uniform sample.
    for (std::size_t i = 0; i < flips; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(order[i], order[j]);
      const std::size_t idx = order[i];
      const auto offset = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
      out.labels[idx] = (clean_labels[idx] + offset) % num_classes;
      out.mask[idx] = true;
    }
    return out;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = spec.confusion.row(clean_labels[i]);
    const double u = rng.uniform();
    double cumulative = 0.0;
    int drawn = num_classes - 1;
    for (int c = 0; c < num_classes; ++c) {
      cumulative += row(c);
      if (u < cumulative) {
        drawn = c;
        break;
      }
    }
    // Rounding can leave u above the final cumulative sum; fall back to the
    // last class with nonzero mass.
    if (u >= cumulative) {
      while (drawn > 0 && row(drawn) == 0.0) --drawn;
    }
    out.labels[i] = drawn;
    out.mask[i] = drawn != clean_labels[i];
  }
  return out;
}

Dataset parse_cifar10_records(std::span<const std::uint8_t> bytes) {
  require(bytes.size() % kCifarRecordBytes == 0, ErrorKind::malformed_file,
          "CIFAR-10 file length " + std::to_string(bytes.size()) +
              " is not a multiple of 3073");
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  Dataset out;
  out.num_classes = 10;
  out.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(kCifarImageBytes));
  out.noisy_labels.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    const auto record = bytes.subspan(r * kCifarRecordBytes, kCifarRecordBytes);
    require(record[0] <= 9, ErrorKind::malformed_record,
            "record " + std::to_string(r) + " has label byte " + std::to_string(record[0]));
    out.noisy_labels.push_back(record[0]);
    for (std::size_t p = 0; p < kCifarImageBytes; ++p) {
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
          static_cast<double>(record[1 + p]) / 255.0;
    }
  }
  out.clean_labels = out.noisy_labels;
  return out;
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths) {
  std::vector<std::uint8_t> all;
  for (const auto& path : paths) {
    auto bytes = read_bytes(path);
    require(bytes.size() % kCifarRecordBytes == 0, ErrorKind::malformed_file,
            path.string() + ": length " + std::to_string(bytes.size()) +
                " is not a multiple of 3073");
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return parse_cifar10_records(all);
}

void write_cifar10_binary(const Dataset& dataset, const std::filesystem::path& path) {
  require(dataset.features.cols() == static_cast<Eigen::Index>(kCifarImageBytes),
          ErrorKind::invalid_input, "CIFAR-10 records need 3072 features");
  const Labels& labels = dataset.clean_labels ? *dataset.clean_labels : dataset.noisy_labels;
  std::vector<std::uint8_t> bytes;
  bytes.reserve(dataset.size() * kCifarRecordBytes);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    require(labels[r] >= 0 && labels[r] <= 9, ErrorKind::invalid_input,
            "CIFAR-10 labels must be 0-9");
    bytes.push_back(static_cast<std::uint8_t>(labels[r]));
    for (std::size_t p = 0; p < kCifarImageBytes; ++p) {
      const double v = dataset.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p));
      require(v >= 0.0 && v <= 1.0, ErrorKind::invalid_input, "pixel values must lie in [0, 1]");
      bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Labels load_label_file(const std::filesystem::path& path, std::size_t expected_len,
                       int num_classes) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t consumed = 0;
    long value = -1;
    try {
      value = std::stol(line, &consumed, 10);
    } catch (const std::exception&) {
      consumed = 0;
    }
    require(consumed == line.size() && !line.empty(), ErrorKind::malformed_label,
            path.string() + ":" + std::to_string(line_no) + ": not an integer");
    require(value >= 0 && value < num_classes, ErrorKind::malformed_label,
            path.string() + ":" + std::to_string(line_no) + ": label " + std::to_string(value) +
                " outside [0, " + std::to_string(num_classes) + ")");
    labels.push_back(static_cast<int>(value));
  }
  require(labels.size() == expected_len, ErrorKind::length_mismatch,
          path.string() + ": expected " + std::to_string(expected_len) + " labels, found " +
              std::to_string(labels.size()));
  return labels;
}

void attach_noisy_labels(Dataset& dataset, Labels labels) {
  require(labels.size() == dataset.size(), ErrorKind::length_mismatch,
          "label set length does not match the dataset");
  if (!dataset.clean_labels) dataset.clean_labels = dataset.noisy_labels;
  dataset.noisy_labels = std::move(labels);
  dataset.validate();
}

}  // namespace bkd
