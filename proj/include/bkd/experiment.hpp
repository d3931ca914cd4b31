#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bkd/data.hpp"
#include "bkd/trainer.hpp"

namespace bkd {

struct SyntheticSource {
  BlobSpec blobs;
  NoiseSpec noise;  // seed is derived from the run seed
};

struct CifarSource {
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> test_files;
  /// Optional human-noise label set for the training files.
  std::optional<std::filesystem::path> label_file;
};

struct RunConfig {
  std::vector<int> hidden_dims{64, 64};
  TrainConfig train;
  std::variant<SyntheticSource, CifarSource> source = SyntheticSource{};
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
};

/// Parses the JSON config document. Every level rejects unknown keys; any
/// problem throws invalid_config.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Normalized form of the config, with every default filled in.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Seeds for the independent random streams of a run.
struct RunSeeds {
  std::uint64_t data;
  std::uint64_t noise;
  std::uint64_t teacher_init;
  std::uint64_t student_init;
  std::uint64_t shuffle;
};
RunSeeds run_seeds(std::uint64_t seed);

/// Builds the train/test pair the config describes (noise already injected).
TrainTest build_datasets(const RunConfig& config);

Topology run_topology(const RunConfig& config, const Dataset& train);

struct RunReport {
  bool completed = false;
  std::string error;
  TrainResult result;
  nlohmann::ordered_json json;
};

/// Builds the data, trains, and writes epochs.csv, report.json, pa_dump.csv,
/// config.json and the two weight dumps into config.output_dir. A fault
/// during training leaves the rows written so far and marks the report failed.
RunReport run_experiment(const RunConfig& config);

/// Version line written ahead of the epochs.csv header row.
inline constexpr const char* kEpochsCsvVersion = "# bkd epochs.csv v1";

std::string epochs_csv_header();
std::string epochs_csv_row(const EpochRecord& rec);

/// pa_dump.csv: P_A at the annotated label for every training sample, the
/// bucket (blank without a split) and the true noise flag (blank without
/// clean labels). The first line records the split thresholds.
struct PaDump {
  int epoch = 0;
  std::optional<OtsuSplit> split;
  std::vector<double> agreement_at_label;
  std::vector<int> buckets;
  std::vector<bool> noise_mask;
};

void write_pa_dump(const std::filesystem::path& path, const PaDump& dump);
PaDump read_pa_dump(const std::filesystem::path& path);

/// Little-endian weight dump: "BKDW", u32 version, topology header, seed, then
/// every layer's weight (row-major) and bias followed by the momentum buffers,
/// all as IEEE-754 binary64.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace bkd
