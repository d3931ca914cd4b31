// bkd: train teacher/student pairs on noisy labels, inspect noise verdicts,
// generate synthetic data, and re-evaluate stored runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bkd/experiment.hpp"

namespace {

using bkd::Error;
using bkd::ErrorKind;
using ordered_json = nlohmann::ordered_json;

int fail(ErrorKind kind, const std::string& message) {
  ordered_json line{{"error", std::string(bkd::to_string(kind))}, {"message", message}};
  std::cerr << line.dump() << '\n';
  return kind == ErrorKind::invalid_config || kind == ErrorKind::invalid_input ? 2 : 1;
}

bkd::RunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed,
                              const std::string& out) {
  bkd::RunConfig config = bkd::load_run_config(path);
  if (seed) config.seed = *seed;
  if (!out.empty()) config.output_dir = out;
  return config;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out) {
  const bkd::RunConfig config = resolve_config(config_path, seed, out);
  const bkd::RunReport report = bkd::run_experiment(config);
  if (!report.completed) return fail(ErrorKind::training_fault, report.error);
  const auto& doc = report.json;
  ordered_json summary{{"status", "completed"},
                       {"output_dir", config.output_dir.string()},
                       {"tipping_point", doc["tipping_point"]},
                       {"final_test_accuracy", doc["final"]["test_accuracy"]}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_detect(const std::string& run_dir, const std::string& threshold_text,
               const std::string& out) {
  const auto choice = bkd::parse_threshold_choice(threshold_text);
  const std::filesystem::path dir(run_dir);
  const bkd::PaDump dump = bkd::read_pa_dump(dir / "pa_dump.csv");
  if (!dump.split) {
    return fail(ErrorKind::missing_artifact, "pa_dump.csv carries no Otsu split");
  }
  const auto noisy = bkd::classify_noisy(dump.agreement_at_label, *dump.split, choice);
  std::vector<bool> verdict(dump.agreement_at_label.size(), false);
  for (std::size_t i : noisy) verdict[i] = true;

  const std::filesystem::path verdict_path =
      out.empty() ? dir / ("verdicts_" + threshold_text + ".csv") : std::filesystem::path(out);
  std::ofstream csv(verdict_path);
  if (!csv) return fail(ErrorKind::io, "cannot write " + verdict_path.string());
  csv << "sample_id,pa_label,noisy\n";
  char value[32];
  for (std::size_t i = 0; i < verdict.size(); ++i) {
    std::snprintf(value, sizeof value, "%.17g", dump.agreement_at_label[i]);
    csv << i << ',' << value << ',' << (verdict[i] ? 1 : 0) << '\n';
  }

  ordered_json summary{{"threshold", threshold_text},
                       {"threshold_value", bkd::threshold_value(*dump.split, choice)},
                       {"samples", verdict.size()},
                       {"flagged_noisy", noisy.size()},
                       {"verdicts", verdict_path.string()}};
  if (!dump.noise_mask.empty()) {
    const auto m = bkd::detection_metrics(noisy, bkd::mask_indices(dump.noise_mask),
                                          dump.noise_mask.size());
    summary["metrics"] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

void write_dataset_csv(const bkd::Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  bkd::require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out << "# bkd dataset.csv v1\nclean_label,noisy_label";
  for (int d = 0; d < data.dim(); ++d) out << ",x" << d;
  out << '\n';
  char value[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.clean_labels) out << (*data.clean_labels)[i];
    out << ',' << data.noisy_labels[i];
    for (int d = 0; d < data.dim(); ++d) {
      std::snprintf(value, sizeof value, "%.17g", data.features(static_cast<Eigen::Index>(i), d));
      out << ',' << value;
    }
    out << '\n';
  }
}

int cmd_gen_data(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  const bkd::RunConfig config = resolve_config(config_path, seed, out);
  const bkd::TrainTest data = bkd::build_datasets(config);
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  write_dataset_csv(data.train, dir / "train.csv");
  if (data.test.size() > 0) write_dataset_csv(data.test, dir / "test.csv");
  {
    std::ofstream labels(dir / "noisy_labels.txt");
    for (int label : data.train.noisy_labels) labels << label << '\n';
  }
  const auto mask = data.train.noise_mask();
  ordered_json summary{{"output_dir", dir.string()},
                       {"train_samples", data.train.size()},
                       {"test_samples", data.test.size()},
                       {"noisy_samples", bkd::mask_indices(mask).size()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const std::string& run_dir) {
  const std::filesystem::path dir(run_dir);
  const bkd::RunConfig config = bkd::load_run_config(dir / "config.json");
  const bkd::TrainTest data = bkd::build_datasets(config);
  const bkd::ModelParams teacher = bkd::load_params(dir / "teacher.bin");
  const bkd::ModelParams student = bkd::load_params(dir / "student.bin");

  auto accuracies = [&](const bkd::Dataset& set, const bkd::Labels& truth) {
    const bkd::Evaluation eval = bkd::evaluate(teacher, student, set.features);
    return ordered_json{{"teacher", bkd::accuracy(eval.teacher, truth)},
                        {"student", bkd::accuracy(eval.student, truth)},
                        {"agreement", bkd::accuracy(eval.agreement, truth)}};
  };
  ordered_json summary;
  summary["train_accuracy_vs_annotations"] = accuracies(data.train, data.train.noisy_labels);
  if (data.test.size() > 0) {
    summary["test_accuracy"] = accuracies(
        data.test, data.test.clean_labels ? *data.test.clean_labels : data.test.noisy_labels);
  } else {
    summary["test_accuracy"] = nullptr;
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind knowledge distillation for learning with noisy labels"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::string out;
  std::string threshold = "mu1";
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "Train a teacher/student pair from a JSON config");
  train->add_option("--config", config_path, "Run configuration (JSON)")->required();
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out, "Override the output directory");

  auto* detect = app.add_subcommand("detect-noise", "Classify training labels as noisy/clean");
  detect->add_option("--run-dir", run_dir, "Directory written by `bkd train`")->required();
  detect->add_option("--threshold", threshold, "Otsu threshold to compare against")
      ->check(CLI::IsMember({"mu1", "s", "mu2"}));
  detect->add_option("--out", out, "Verdict CSV path (default: <run-dir>/verdicts_<thr>.csv)");

  auto* gen = app.add_subcommand("gen-data", "Write the dataset a config describes as CSV");
  gen->add_option("--config", config_path, "Run configuration (JSON)")->required();
  gen->add_option("--seed", seed, "Override the config seed");
  gen->add_option("--out", out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Re-evaluate the stored weights of a run");
  eval->add_option("--run-dir", run_dir, "Directory written by `bkd train`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(config_path, seed, out);
    if (*detect) return cmd_detect(run_dir, threshold, out);
    if (*gen) return cmd_gen_data(config_path, seed, out);
    if (*eval) return cmd_eval(run_dir);
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorKind::io, e.what());
  }
  return 0;
}
