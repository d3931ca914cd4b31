#include "bkd/experiment.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "bkd/rng.hpp"

namespace bkd {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::invalid_config, what);
}

void reject_unknown_keys(const json& object, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!object.is_object()) config_error(where + " must be a JSON object");
  for (const auto& [key, value] : object.items()) {
    if (!allowed.contains(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& object, const char* key, T& out, const std::string& where) {
  if (!object.contains(key)) return;
  try {
    out = object.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

SyntheticSource parse_synthetic(const json& doc) {
  reject_unknown_keys(doc,
                      {"source", "num_classes", "samples_per_class", "test_samples_per_class",
                       "dim", "center_spread", "cluster_std", "noise"},
                      "data");
  SyntheticSource src;
  auto& b = src.blobs;
  read_field(doc, "num_classes", b.num_classes, "data");
  read_field(doc, "samples_per_class", b.samples_per_class, "data");
  read_field(doc, "test_samples_per_class", b.test_samples_per_class, "data");
  read_field(doc, "dim", b.dim, "data");
  read_field(doc, "center_spread", b.center_spread, "data");
  read_field(doc, "cluster_std", b.cluster_std, "data");
  if (doc.contains("noise")) {
    const json& noise = doc.at("noise");
    reject_unknown_keys(noise, {"kind", "rate", "matrix"}, "data.noise");
    std::string kind = "symmetric";
    read_field(noise, "kind", kind, "data.noise");
    if (kind == "symmetric") {
      src.noise.kind = NoiseKind::symmetric;
      read_field(noise, "rate", src.noise.rate, "data.noise");
    } else if (kind == "confusion") {
      src.noise.kind = NoiseKind::confusion;
      std::vector<std::vector<double>> rows;
      read_field(noise, "matrix", rows, "data.noise");
      src.noise.confusion.resize(static_cast<Eigen::Index>(rows.size()),
                                 static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) config_error("data.noise.matrix must be square");
        for (std::size_t c = 0; c < rows.size(); ++c) {
          src.noise.confusion(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              rows[r][c];
        }
      }
    } else {
      config_error("data.noise.kind must be 'symmetric' or 'confusion'");
    }
  }
  try {
    b.validate();
    src.noise.validate(b.num_classes);
  } catch (const Error& e) {
    config_error(std::string("data: ") + e.what());
  }
  return src;
}

CifarSource parse_cifar(const json& doc) {
  reject_unknown_keys(doc, {"source", "train_files", "test_files", "label_file"}, "data");
  CifarSource src;
  std::vector<std::string> train;
  std::vector<std::string> test;
  read_field(doc, "train_files", train, "data");
  read_field(doc, "test_files", test, "data");
  if (train.empty()) config_error("data.train_files must list at least one file");
  src.train_files.assign(train.begin(), train.end());
  src.test_files.assign(test.begin(), test.end());
  if (doc.contains("label_file")) {
    std::string label_file;
    read_field(doc, "label_file", label_file, "data");
    src.label_file = label_file;
  }
  return src;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  reject_unknown_keys(doc,
                      {"topology", "epochs", "batch_size", "lr", "lr_drop_epoch",
                       "lr_after_drop", "momentum", "weight_decay", "k", "otsu_step", "alphas",
                       "split_refresh", "method", "data", "seed", "output_dir"},
                      "config");
  RunConfig config;
  auto& t = config.train;
  if (doc.contains("topology")) {
    const json& topo = doc.at("topology");
    reject_unknown_keys(topo, {"hidden_dims", "activation"}, "topology");
    read_field(topo, "hidden_dims", config.hidden_dims, "topology");
    std::string activation = "relu";
    read_field(topo, "activation", activation, "topology");
    if (activation != "relu") config_error("topology.activation must be 'relu'");
  }
  read_field(doc, "epochs", t.epochs, "config");
  read_field(doc, "batch_size", t.batch_size, "config");
  read_field(doc, "lr", t.lr, "config");
  read_field(doc, "lr_drop_epoch", t.lr_drop_epoch, "config");
  read_field(doc, "lr_after_drop", t.lr_after_drop, "config");
  read_field(doc, "momentum", t.momentum, "config");
  read_field(doc, "weight_decay", t.weight_decay, "config");
  read_field(doc, "k", t.k, "config");
  read_field(doc, "otsu_step", t.otsu_step, "config");
  if (doc.contains("alphas")) {
    std::vector<double> alphas;
    read_field(doc, "alphas", alphas, "config");
    if (alphas.size() != 4) config_error("alphas must list exactly four values");
    t.alphas = {alphas[0], alphas[1], alphas[2], alphas[3]};
  }
  std::string refresh = "per_epoch";
  read_field(doc, "split_refresh", refresh, "config");
  if (refresh == "per_epoch") {
    t.split_refresh = SplitRefresh::per_epoch;
  } else if (refresh == "frozen") {
    t.split_refresh = SplitRefresh::frozen;
  } else {
    config_error("split_refresh must be 'per_epoch' or 'frozen'");
  }
  std::string method = "two_stage";
  read_field(doc, "method", method, "config");
  if (method == "two_stage") {
    t.method = Method::two_stage;
  } else if (method == "ce_only") {
    t.method = Method::ce_only;
  } else {
    config_error("method must be 'two_stage' or 'ce_only'");
  }
  read_field(doc, "seed", config.seed, "config");
  std::string out = config.output_dir.string();
  read_field(doc, "output_dir", out, "config");
  config.output_dir = out;

  if (doc.contains("data")) {
    const json& data = doc.at("data");
    if (!data.is_object()) config_error("data must be a JSON object");
    std::string source = "synthetic";
    read_field(data, "source", source, "data");
    if (source == "synthetic") {
      config.source = parse_synthetic(data);
    } else if (source == "cifar10") {
      config.source = parse_cifar(data);
    } else {
      config_error("data.source must be 'synthetic' or 'cifar10'");
    }
  }

  for (int width : config.hidden_dims) {
    if (width < 1) config_error("topology.hidden_dims entries must be >= 1");
  }
  t.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::invalid_config, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

ordered_json to_json(const RunConfig& config) {
  const auto& t = config.train;
  ordered_json doc;
  doc["topology"] = {{"hidden_dims", config.hidden_dims}, {"activation", "relu"}};
  doc["epochs"] = t.epochs;
  doc["batch_size"] = t.batch_size;
  doc["lr"] = t.lr;
  doc["lr_drop_epoch"] = t.lr_drop_epoch;
  doc["lr_after_drop"] = t.lr_after_drop;
  doc["momentum"] = t.momentum;
  doc["weight_decay"] = t.weight_decay;
  doc["k"] = t.k;
  doc["otsu_step"] = t.otsu_step;
  doc["alphas"] = {t.alphas.alpha1, t.alphas.alpha2, t.alphas.alpha3, t.alphas.alpha4};
  doc["split_refresh"] = t.split_refresh == SplitRefresh::per_epoch ? "per_epoch" : "frozen";
  doc["method"] = t.method == Method::two_stage ? "two_stage" : "ce_only";
  if (const auto* syn = std::get_if<SyntheticSource>(&config.source)) {
    const auto& b = syn->blobs;
    ordered_json data;
    data["source"] = "synthetic";
    data["num_classes"] = b.num_classes;
    data["samples_per_class"] = b.samples_per_class;
    data["test_samples_per_class"] = b.test_samples_per_class;
    data["dim"] = b.dim;
    data["center_spread"] = b.center_spread;
    data["cluster_std"] = b.cluster_std;
    if (syn->noise.kind == NoiseKind::symmetric) {
      data["noise"] = {{"kind", "symmetric"}, {"rate", syn->noise.rate}};
    } else {
      ordered_json rows = ordered_json::array();
      for (Eigen::Index r = 0; r < syn->noise.confusion.rows(); ++r) {
        std::vector<double> row(syn->noise.confusion.row(r).begin(),
                                syn->noise.confusion.row(r).end());
        rows.push_back(row);
      }
      data["noise"] = {{"kind", "confusion"}, {"matrix", rows}};
    }
    doc["data"] = data;
  } else {
    const auto& cifar = std::get<CifarSource>(config.source);
    ordered_json data;
    data["source"] = "cifar10";
    std::vector<std::string> train;
    std::vector<std::string> test;
    for (const auto& p : cifar.train_files) train.push_back(p.string());
    for (const auto& p : cifar.test_files) test.push_back(p.string());
    data["train_files"] = train;
    data["test_files"] = test;
    if (cifar.label_file) data["label_file"] = cifar.label_file->string();
    doc["data"] = data;
  }
  doc["seed"] = config.seed;
  doc["output_dir"] = config.output_dir.string();
  return doc;
}

RunSeeds run_seeds(std::uint64_t seed) {
  return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3), derive_seed(seed, 4),
          derive_seed(seed, 5)};
}

TrainTest build_datasets(const RunConfig& config) {
  const RunSeeds seeds = run_seeds(config.seed);
  if (const auto* syn = std::get_if<SyntheticSource>(&config.source)) {
    TrainTest data = gen_blob_split(syn->blobs, seeds.data);
    NoiseSpec noise = syn->noise;
    noise.seed = seeds.noise;
    NoisyLabels noisy = inject_noise(*data.train.clean_labels, data.train.num_classes, noise);
    data.train.noisy_labels = std::move(noisy.labels);
    return data;
  }
  const auto& cifar = std::get<CifarSource>(config.source);
  TrainTest data;
  data.train = load_cifar10_binary(cifar.train_files);
  data.train.split = SplitTag::train;
  if (cifar.label_file) {
    attach_noisy_labels(data.train,
                        load_label_file(*cifar.label_file, data.train.size(), data.train.num_classes));
  }
  if (!cifar.test_files.empty()) {
    data.test = load_cifar10_binary(cifar.test_files);
  } else {
    data.test.num_classes = data.train.num_classes;
    data.test.features.resize(0, data.train.features.cols());
  }
  data.test.split = SplitTag::test;
  return data;
}

Topology run_topology(const RunConfig& config, const Dataset& train) {
  Topology topology{train.dim(), config.hidden_dims, train.num_classes, Activation::relu};
  topology.validate();
  return topology;
}

namespace {

std::string number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

constexpr std::array<const char*, 3> kProbSetTags{"t", "s", "a"};
constexpr std::array<const char*, 3> kProbSetNames{"teacher", "student", "agreement"};

ordered_json metrics_json(const DetectionMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

ordered_json split_json(const OtsuSplit& split) {
  return {{"s", split.s},           {"mu1", split.mu1},       {"mu2", split.mu2},
          {"sigma1", split.sigma1}, {"sigma2", split.sigma2}, {"n1", split.n1},
          {"n2", split.n2},         {"q", split.q}};
}

ordered_json detection_grid_json(const DetectionGrid& grid) {
  ordered_json out;
  for (std::size_t p = 0; p < kProbSets.size(); ++p) {
    ordered_json per_set;
    for (std::size_t t = 0; t < kThresholds.size(); ++t) {
      const auto name = std::string(to_string(kThresholds[t]));
      per_set[name] = grid[p][t] ? metrics_json(*grid[p][t]) : ordered_json(nullptr);
    }
    out[kProbSetNames[p]] = per_set;
  }
  return out;
}

}  // namespace

std::string epochs_csv_header() {
  std::string header =
      "epoch,stage,lr,p_max,teacher_loss,student_loss,s,mu1,mu2,bucket1,bucket2,bucket3,bucket4,"
      "test_acc_t,test_acc_s,test_acc_a";
  for (const char* set : kProbSetTags) {
    for (ThresholdChoice choice : kThresholds) {
      for (const char* metric : {"pr", "re", "f1"}) {
        header += ",";
        header += metric;
        header += "_";
        header += set;
        header += "_";
        header += to_string(choice);
      }
    }
  }
  return header;
}

std::string epochs_csv_row(const EpochRecord& rec) {
  std::ostringstream row;
  row << rec.epoch << ',' << rec.stage << ',' << number(rec.lr) << ',' << number(rec.p_max) << ','
      << number(rec.teacher_loss) << ',' << number(rec.student_loss);
  if (rec.split) {
    row << ',' << number(rec.split->s) << ',' << number(rec.split->mu1) << ','
        << number(rec.split->mu2);
    for (std::size_t count : rec.bucket_counts) row << ',' << count;
  } else {
    row << ",,,,,,,";
  }
  for (std::size_t i = 0; i < 3; ++i) {
    row << ',';
    if (rec.test_accuracy) row << number((*rec.test_accuracy)[i]);
  }
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t t = 0; t < 3; ++t) {
      std::optional<DetectionMetrics> m;
      if (rec.detection) m = (*rec.detection)[p][t];
      row << ',' << (m ? number(m->precision) : "") << ',' << (m ? number(m->recall) : "") << ','
          << (m ? number(m->f1) : "");
    }
  }
  return row.str();
}

void write_pa_dump(const std::filesystem::path& path, const PaDump& dump) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  char line[256];
  if (dump.split) {
    std::snprintf(line, sizeof line, "# bkd pa_dump.csv v1 epoch=%d s=%.17g mu1=%.17g mu2=%.17g",
                  dump.epoch, dump.split->s, dump.split->mu1, dump.split->mu2);
  } else {
    std::snprintf(line, sizeof line, "# bkd pa_dump.csv v1 epoch=%d split=none", dump.epoch);
  }
  out << line << '\n' << "sample_id,pa_label,bucket,noisy\n";
  for (std::size_t i = 0; i < dump.agreement_at_label.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g", dump.agreement_at_label[i]);
    out << i << ',' << line << ',';
    if (!dump.buckets.empty()) out << dump.buckets[i];
    out << ',';
    if (!dump.noise_mask.empty()) out << (dump.noise_mask[i] ? 1 : 0);
    out << '\n';
  }
}

PaDump read_pa_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::missing_artifact, "cannot open " + path.string());
  PaDump dump;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.starts_with("# bkd pa_dump.csv v1"),
          ErrorKind::malformed_file, path.string() + ": missing pa_dump version line");
  OtsuSplit split;
  if (std::sscanf(line.c_str(), "# bkd pa_dump.csv v1 epoch=%d s=%lf mu1=%lf mu2=%lf",
                  &dump.epoch, &split.s, &split.mu1, &split.mu2) == 4) {
    dump.split = split;
  } else {
    require(std::sscanf(line.c_str(), "# bkd pa_dump.csv v1 epoch=%d", &dump.epoch) == 1,
            ErrorKind::malformed_file, path.string() + ": unreadable version line");
  }
  require(static_cast<bool>(std::getline(in, line)) && line == "sample_id,pa_label,bucket,noisy",
          ErrorKind::malformed_file, path.string() + ": unexpected header");
  bool any_mask = false;
  std::vector<int> mask_values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string id, value, bucket, noisy;
    std::getline(fields, id, ',');
    std::getline(fields, value, ',');
    std::getline(fields, bucket, ',');
    std::getline(fields, noisy, ',');
    require(std::stoul(id) == dump.agreement_at_label.size(), ErrorKind::malformed_file,
            path.string() + ": sample ids must be consecutive");
    dump.agreement_at_label.push_back(std::stod(value));
    if (!bucket.empty()) dump.buckets.push_back(std::stoi(bucket));
    mask_values.push_back(noisy.empty() ? -1 : std::stoi(noisy));
    any_mask = any_mask || !noisy.empty();
  }
  if (any_mask) {
    for (int v : mask_values) {
      require(v == 0 || v == 1, ErrorKind::malformed_file,
              path.string() + ": noise flags must be present on every row");
      dump.noise_mask.push_back(v == 1);
    }
  }
  return dump;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_bytes(std::istream& in, int count, const std::filesystem::path& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) {
    const int c = in.get();
    require(c != std::char_traits<char>::eof(), ErrorKind::malformed_file,
            path.string() + ": truncated weight dump");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

constexpr std::uint32_t kWeightDumpVersion = 1;

void put_layers(std::ostream& out, const std::vector<DenseLayer>& layers) {
  for (const auto& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) put_f64(out, layer.weight(i, j));
    }
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) put_f64(out, layer.bias(j));
  }
}

void get_layers(std::istream& in, std::vector<DenseLayer>& layers,
                const std::filesystem::path& path) {
  for (auto& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
        layer.weight(i, j) = std::bit_cast<double>(get_bytes(in, 8, path));
      }
    }
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) {
      layer.bias(j) = std::bit_cast<double>(get_bytes(in, 8, path));
    }
  }
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out.write("BKDW", 4);
  put_u32(out, kWeightDumpVersion);
  const auto& topo = params.topology;
  put_u32(out, static_cast<std::uint32_t>(topo.input_dim));
  put_u32(out, static_cast<std::uint32_t>(topo.num_classes));
  put_u32(out, static_cast<std::uint32_t>(topo.hidden_dims.size()));
  for (int width : topo.hidden_dims) put_u32(out, static_cast<std::uint32_t>(width));
  put_u64(out, params.seed);
  put_layers(out, params.layers);
  put_layers(out, params.velocity);
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::missing_artifact, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, "BKDW", 4) == 0, ErrorKind::malformed_file,
          path.string() + ": not a weight dump");
  require(get_bytes(in, 4, path) == kWeightDumpVersion, ErrorKind::malformed_file,
          path.string() + ": unsupported weight dump version");
  Topology topo;
  topo.input_dim = static_cast<int>(get_bytes(in, 4, path));
  topo.num_classes = static_cast<int>(get_bytes(in, 4, path));
  const auto hidden = get_bytes(in, 4, path);
  require(hidden < 1024, ErrorKind::malformed_file, path.string() + ": implausible depth");
  for (std::uint64_t i = 0; i < hidden; ++i) {
    topo.hidden_dims.push_back(static_cast<int>(get_bytes(in, 4, path)));
  }
  const std::uint64_t seed = get_bytes(in, 8, path);
  ModelParams params = init_params(topo, seed);
  get_layers(in, params.layers, path);
  get_layers(in, params.velocity, path);
  require(in.peek() == std::char_traits<char>::eof(), ErrorKind::malformed_file,
          path.string() + ": trailing bytes after weight dump");
  return params;
}

RunReport run_experiment(const RunConfig& config) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const ordered_json config_doc = to_json(config);
  {
    std::ofstream out(dir / "config.json");
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + (dir / "config.json").string());
    out << config_doc.dump(2) << '\n';
  }
  std::ofstream csv(dir / "epochs.csv");
  require(static_cast<bool>(csv), ErrorKind::io, "cannot write " + (dir / "epochs.csv").string());
  csv << kEpochsCsvVersion << '\n' << epochs_csv_header() << '\n' << std::flush;

  RunReport report;
  TrainTest data;
  std::optional<TwoStageTrainer> trainer;
  try {
    data = build_datasets(config);
    const Topology topology = run_topology(config, data.train);
    const RunSeeds seeds = run_seeds(config.seed);
    TrainConfig train_config = config.train;
    train_config.seed = seeds.shuffle;
    trainer.emplace(train_config, data.train, data.test.size() > 0 ? &data.test : nullptr,
                    init_params(topology, seeds.teacher_init),
                    init_params(topology, seeds.student_init));
    while (!trainer->done()) {
      csv << epochs_csv_row(trainer->step()) << '\n' << std::flush;
    }
    report.completed = true;
  } catch (const std::exception& e) {
    report.completed = false;
    report.error = e.what();
  }

  ordered_json doc;
  doc["status"] = report.completed ? "completed" : "failed";
  doc["error"] = report.completed ? ordered_json(nullptr) : ordered_json(report.error);
  if (trainer) report.result = trainer->result();
  const TrainResult& result = report.result;
  doc["epochs_completed"] = result.epochs.size();
  if (result.tipping) {
    doc["tipping_point"] = {{"epoch", result.tipping->epoch},
                            {"detected_at", result.tipping->detected_at}};
  } else {
    doc["tipping_point"] = nullptr;
  }
  doc["no_tipping_point"] = !result.tipping.has_value();
  if (result.stage_switch) {
    const auto& sw = *result.stage_switch;
    const auto counts = BucketAssignment{sw.buckets, {}}.counts();
    doc["stage_switch"] = {{"epoch", sw.epoch},
                           {"split", split_json(sw.split)},
                           {"bucket_counts", counts},
                           {"detection_pa_mu1", sw.detection ? metrics_json(*sw.detection)
                                                             : ordered_json(nullptr)}};
  } else {
    doc["stage_switch"] = nullptr;
  }
  ordered_json final_doc;
  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    if (last.test_accuracy) {
      final_doc["test_accuracy"] = {{"teacher", (*last.test_accuracy)[0]},
                                    {"student", (*last.test_accuracy)[1]},
                                    {"agreement", (*last.test_accuracy)[2]}};
    } else {
      final_doc["test_accuracy"] = nullptr;
    }
    final_doc["detection"] =
        last.detection ? detection_grid_json(*last.detection) : ordered_json(nullptr);
  }
  doc["final"] = final_doc;
  doc["config"] = config_doc;
  report.json = doc;

  if (trainer && report.completed) {
    save_params(result.teacher, dir / "teacher.bin");
    save_params(result.student, dir / "student.bin");

    PaDump dump;
    if (result.stage_switch) {
      const auto& sw = *result.stage_switch;
      dump = {sw.epoch, sw.split, sw.agreement_at_label, sw.buckets, data.train.noise_mask()};
    } else {
      const Evaluation eval = evaluate(result.teacher, result.student, data.train.features);
      dump.epoch = static_cast<int>(result.epochs.size()) - 1;
      dump.agreement_at_label = prob_at_label(eval.agreement, data.train.noisy_labels);
      dump.noise_mask = data.train.noise_mask();
      try {
        dump.split = otsu_split(dump.agreement_at_label, config.train.otsu_step);
        dump.buckets =
            assign_buckets(dump.agreement_at_label, *dump.split, config.train.alphas).buckets;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::degenerate_distribution) throw;
      }
    }
    write_pa_dump(dir / "pa_dump.csv", dump);
  }

  std::ofstream out(dir / "report.json");
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + (dir / "report.json").string());
  out << doc.dump(2) << '\n';
  return report;
}

}  // namespace bkd
