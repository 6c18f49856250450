// Copyright 2026 The ccr-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: every stage of the two-stage pipeline as a separate
// subcommand operating on plain files in an output directory.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccr/core.hpp"
#include "ccr/datagen.hpp"
#include "ccr/eval.hpp"
#include "ccr/fvec.hpp"
#include "ccr/ipw.hpp"
#include "ccr/model.hpp"
#include "ccr/pipeline.hpp"
#include "ccr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "ccr_out";
  std::string data;
  std::optional<std::string> estimator;
  std::optional<double> lambda;
  std::optional<double> beta;
  std::optional<std::string> variant;
  std::optional<bool> warm_start;
  bool ablation = false;
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ccr::Fail(ccr::ErrorKind::kIo, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json ReadJson(const std::string& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::parse_error& e) {
    ccr::Fail(ccr::ErrorKind::kFormat, path + ": " + e.what());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) ccr::Fail(ccr::ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) ccr::Fail(ccr::ErrorKind::kIo, "write failed: " + path.string());
}

void WriteJson(const fs::path& path, const json& j) {
  WriteText(path, j.dump(2) + "\n");
}

// FNV-1a, 64-bit.
std::uint64_t Fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

class Workspace {
 public:
  Workspace(const Options& opt, const std::string& command)
      : opt_(opt), command_(command), out_(opt.out) {
    fs::create_directories(out_);
    data_dir_ = opt.data.empty() ? out_ : fs::path(opt.data);
    spec_ = LoadSpec();
  }

  const fs::path& out() const { return out_; }
  const fs::path& data_dir() const { return data_dir_; }
  const ccr::ExperimentSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return spec_.seeds.front(); }

  void Log(const std::string& message) const {
    std::ofstream log(out_ / "ccr_lab.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ",
                  std::gmtime(&now));
    log << stamp << " " << command_ << ": " << message << "\n";
  }

  void Record(const fs::path& artifact) { artifacts_.push_back(artifact); }

  // Merges this command's entry into manifest.json.
  void WriteManifest() const {
    const fs::path path = out_ / "manifest.json";
    json manifest = json::object();
    if (fs::exists(path)) {
      try {
        manifest = json::parse(ReadText(path.string()));
      } catch (const json::parse_error&) {
        manifest = json::object();
      }
    }
    json files = json::object();
    for (const auto& a : artifacts_) {
      files[fs::relative(a, out_).generic_string()] =
          Hex(Fnv1a(ReadText(a.string())));
    }
    manifest["hash"] = "fnv1a64";
    manifest["commands"][command_] = {
        {"config_hash", Hex(Fnv1a(ccr::ToJson(spec_).dump()))},
        {"seed", seed()},
        {"artifacts", files}};
    WriteJson(path, manifest);
    Log("wrote " + std::to_string(artifacts_.size()) + " artifacts");
  }

 private:
  ccr::ExperimentSpec LoadSpec() const {
    ccr::ExperimentSpec spec = ccr::DefaultBenchSpec();
    if (!opt_.config.empty()) {
      if (!fs::exists(opt_.config)) {
        ccr::Fail(ccr::ErrorKind::kInvalidArgument,
                  "config file not found: " + opt_.config);
      }
      const json j = ReadJson(opt_.config);
      if (j.contains("class_count")) {
        // A bare synthetic-data config.
        spec.synthetic = ccr::SyntheticConfigFromJson(j);
      } else {
        spec = ccr::ExperimentSpecFromJson(j);
      }
    }
    if (opt_.seed) spec.seeds = {*opt_.seed};
    spec.stage1.seed = spec.seeds.front();
    spec.stage2.seed = spec.seeds.front();
    if (opt_.beta) spec.stage1.beta = *opt_.beta;
    if (opt_.lambda) spec.stage2.lambda = *opt_.lambda;
    if (opt_.estimator) {
      spec.stage2.ipw_estimator = ccr::ParseWeightEstimator(*opt_.estimator);
    }
    if (opt_.variant) {
      spec.stage2.pns_variant = ccr::ParsePnsVariant(*opt_.variant);
    }
    if (opt_.warm_start) spec.stage2.warm_start_head = *opt_.warm_start;
    spec.Validate();
    return spec;
  }

  Options opt_;
  std::string command_;
  fs::path out_;
  fs::path data_dir_;
  ccr::ExperimentSpec spec_;
  std::vector<fs::path> artifacts_;
};

// dataset.json carries what FVEC1 cannot: block widths, K and the
// observation probabilities used for oracle weights.
struct DataFiles {
  ccr::LabeledDataset train;
  ccr::LabeledDataset test;
  std::optional<ccr::Matrix> observation_probs;
};

ccr::LabeledDataset LoadSplit(const std::string& path, const json* meta) {
  if (!fs::exists(path)) {
    ccr::Fail(ccr::ErrorKind::kInvalidArgument, "missing input: " + path);
  }
  ccr::LabeledDataset d = ccr::DatasetFromFvec(ccr::ReadFvec(path));
  if (meta) {
    d.causal_dim = meta->at("causal_dim").get<int>();
    d.spurious_dim = meta->at("spurious_dim").get<int>();
    d.spurious_value_count = meta->at("spurious_value_count").get<int>();
    d.Validate();
  }
  return d;
}

DataFiles LoadData(const Workspace& ws) {
  DataFiles files;
  const auto& spec = ws.spec();
  if (!spec.synthetic) {
    files.train = LoadSplit(spec.train_fvec, nullptr);
    files.test = LoadSplit(spec.test_fvec, nullptr);
    return files;
  }
  const fs::path meta_path = ws.data_dir() / "dataset.json";
  if (!fs::exists(meta_path)) {
    ccr::Fail(ccr::ErrorKind::kInvalidArgument,
              "missing input: " + meta_path.string() + " (run gen first)");
  }
  const json meta = ReadJson(meta_path.string());
  files.train = LoadSplit((ws.data_dir() / "observed.fvec").string(), &meta);
  files.test = LoadSplit((ws.data_dir() / "test.fvec").string(), &meta);
  if (meta.contains("observation_probs")) {
    files.observation_probs =
        ccr::MatrixFromJson(meta.at("observation_probs"));
  }
  return files;
}

void LoadModel(const fs::path& path, ccr::Encoder& encoder,
               ccr::ClassifierHead& head) {
  if (!fs::exists(path)) {
    ccr::Fail(ccr::ErrorKind::kInvalidArgument,
              "missing input: " + path.string());
  }
  ccr::ModelFromJson(ReadJson(path.string()), encoder, head);
}

std::string FormatLambda(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lambda);
  return buf;
}

void Gen(Workspace& ws) {
  const auto& spec = ws.spec();
  if (!spec.synthetic) {
    ccr::Fail(ccr::ErrorKind::kInvalidArgument,
              "gen needs a synthetic data config");
  }
  const ccr::SyntheticConfig& cfg = *spec.synthetic;
  const ccr::SyntheticSplit split = ccr::MakeSyntheticSplit(
      cfg, ccr::RngSeed{ws.seed()}, spec.test_samples_per_class);

  const fs::path& out = ws.out();
  const std::pair<const char*, const ccr::LabeledDataset*> files[] = {
      {"ideal.fvec", &split.ideal},
      {"observed.fvec", &split.train},
      {"test.fvec", &split.test},
      {"validation.fvec", &split.validation}};
  for (const auto& [name, dataset] : files) {
    ccr::WriteFvec(ccr::ToFvec(*dataset), (out / name).string());
    ws.Record(out / name);
  }

  json counts = json::object();
  const std::vector<int> observed = ccr::GroupCounts(split.train);
  const std::vector<int> ideal = ccr::GroupCounts(split.ideal);
  for (std::size_t g = 0; g < observed.size(); ++g) {
    counts[std::to_string(g)] = observed[g];
  }
  json ideal_counts = json::object();
  for (std::size_t g = 0; g < ideal.size(); ++g) {
    ideal_counts[std::to_string(g)] = ideal[g];
  }
  WriteJson(out / "groups.json", {{"observed_n", split.train.size()},
                                  {"group_counts", counts},
                                  {"ideal_group_counts", ideal_counts}});
  ws.Record(out / "groups.json");

  WriteJson(out / "dataset.json",
            {{"seed", ws.seed()},
             {"causal_dim", cfg.causal_dim},
             {"spurious_dim", cfg.spurious_dim},
             {"class_count", cfg.class_count},
             {"spurious_value_count", cfg.spurious_value_count},
             {"observation_probs", ccr::MatrixToJson(cfg.observation_probs)},
             {"synthetic", ccr::ToJson(cfg)}});
  ws.Record(out / "dataset.json");
  std::cout << "observed n = " << split.train.size() << " of "
            << split.ideal.size() << "\n";
}

void Train1(Workspace& ws) {
  const DataFiles data = LoadData(ws);
  const auto& cfg = ws.spec().stage1;
  const ccr::Stage1Result r =
      ccr::TrainStage1(data.train, cfg.feature_dim, cfg);
  WriteJson(ws.out() / "stage1_model.json",
            ccr::ModelToJson(r.encoder, r.head));
  WriteJson(ws.out() / "stage1_history.json", ccr::ToJson(r.history));
  WriteJson(ws.out() / "stage1_config.json", ccr::ToJson(cfg));
  ws.Record(ws.out() / "stage1_model.json");
  ws.Record(ws.out() / "stage1_history.json");
  ws.Record(ws.out() / "stage1_config.json");
  const auto& last = r.history.epochs.back();
  std::printf("stage 1: %d epochs, loss %.6f, train accuracy %.4f\n",
              last.epoch, last.loss.total, last.train_accuracy);
}

void Weights(Workspace& ws) {
  const DataFiles data = LoadData(ws);
  ccr::Encoder encoder;
  ccr::ClassifierHead head;
  LoadModel(ws.out() / "stage1_model.json", encoder, head);
  const ccr::Stage1Evaluation eval =
      ccr::EvaluateStage1(encoder, head, data.train);
  const ccr::ComputedWeights w = ccr::ComputeWeights(
      ws.spec().stage2, eval, data.train, data.observation_probs);
  ccr::WriteWeightsCsv((ws.out() / "weights.csv").string(), w.weights,
                       w.pseudo_groups);
  ws.Record(ws.out() / "weights.csv");
  json summary = {
      {"estimator", ccr::ToString(ws.spec().stage2.ipw_estimator)},
      {"n", data.train.size()},
      {"correct_per_class", eval.correct_per_class},
      {"incorrect_per_class", eval.incorrect_per_class}};
  if (w.propensity) summary["propensity"] = ccr::ToJson(*w.propensity);
  WriteJson(ws.out() / "weights.json", summary);
  ws.Record(ws.out() / "weights.json");
  std::printf("weights: %s, n = %d, min %.6g, max %.6g\n",
              ccr::ToString(ws.spec().stage2.ipw_estimator).c_str(),
              data.train.size(), w.weights.weights.minCoeff(),
              w.weights.weights.maxCoeff());
}

// Stage 2 into dir; returns the fitted head.
ccr::ClassifierHead Train2Into(Workspace& ws, const DataFiles& data,
                               const ccr::Encoder& encoder,
                               const ccr::ClassifierHead& head1,
                               const ccr::TrainConfig& cfg,
                               const fs::path& dir) {
  const fs::path weights_path = ws.out() / "weights.csv";
  if (!fs::exists(weights_path)) {
    ccr::Fail(ccr::ErrorKind::kInvalidArgument,
              "missing input: " + weights_path.string() + " (run weights first)");
  }
  const ccr::WeightVector weights =
      ccr::ReadWeightsCsv(weights_path.string());
  const ccr::Stage2Output r =
      ccr::TrainStage2(encoder, head1, data.train, weights, cfg);
  fs::create_directories(dir);
  WriteJson(dir / "model.json", ccr::ModelToJson(encoder, r.head));
  WriteJson(dir / "stage2_history.json", ccr::ToJson(r.history));
  WriteJson(dir / "stage2_config.json", ccr::ToJson(cfg));
  ws.Record(dir / "model.json");
  ws.Record(dir / "stage2_history.json");
  ws.Record(dir / "stage2_config.json");
  return r.head;
}

void Train2(Workspace& ws) {
  const DataFiles data = LoadData(ws);
  ccr::Encoder encoder;
  ccr::ClassifierHead head;
  LoadModel(ws.out() / "stage1_model.json", encoder, head);
  Train2Into(ws, data, encoder, head, ws.spec().stage2, ws.out());
  std::printf("stage 2: lambda %g, estimator %s\n", ws.spec().stage2.lambda,
              ccr::ToString(ws.spec().stage2.ipw_estimator).c_str());
}

void Eval(Workspace& ws) {
  const DataFiles data = LoadData(ws);
  ccr::Encoder encoder;
  ccr::ClassifierHead head;
  LoadModel(ws.out() / "model.json", encoder, head);
  const ccr::MetricsReport m = ccr::EvaluateModel(encoder, head, data.test);
  WriteJson(ws.out() / "metrics.json", ccr::ToJson(m));
  ws.Record(ws.out() / "metrics.json");
  std::cout << ccr::RenderMetricsTable(m);
}

void Attribute(Workspace& ws) {
  const DataFiles data = LoadData(ws);
  ccr::Encoder encoder;
  ccr::ClassifierHead head;
  LoadModel(ws.out() / "model.json", encoder, head);
  const ccr::AttributionReport r = ccr::OcclusionAttribution(
      encoder, head, data.test, ccr::DefaultBlocks(data.test),
      ccr::AttributionSeed(ws.seed()));
  WriteJson(ws.out() / "attribution.json", ccr::ToJson(r));
  ws.Record(ws.out() / "attribution.json");
  std::cout << ccr::RenderAttributionTable(r);
}

void Run(Workspace& ws) {
  if (ws.spec().synthetic) Gen(ws);
  Train1(ws);
  Weights(ws);
  Train2(ws);
  Eval(ws);
  Attribute(ws);
}

void Sweep(Workspace& ws) {
  if (ws.spec().synthetic) Gen(ws);
  Train1(ws);
  Weights(ws);
  const DataFiles data = LoadData(ws);
  ccr::Encoder encoder;
  ccr::ClassifierHead head1;
  LoadModel(ws.out() / "stage1_model.json", encoder, head1);
  json rows = json::array();
  for (double lambda : ws.spec().lambda_grid) {
    ccr::TrainConfig cfg = ws.spec().stage2;
    cfg.lambda = lambda;
    const fs::path dir = ws.out() / "sweep" / ("lambda_" + FormatLambda(lambda));
    const ccr::ClassifierHead head =
        Train2Into(ws, data, encoder, head1, cfg, dir);
    const ccr::MetricsReport m = ccr::EvaluateModel(encoder, head, data.test);
    WriteJson(dir / "metrics.json", ccr::ToJson(m));
    ws.Record(dir / "metrics.json");
    rows.push_back({{"lambda", lambda},
                    {"mean_accuracy", m.mean_accuracy},
                    {"worst_group_accuracy", m.worst_group_accuracy}});
    std::printf("lambda %-8g mean %.4f  worst-group %.4f\n", lambda,
                m.mean_accuracy, m.worst_group_accuracy);
  }
  WriteJson(ws.out() / "sweep.json", rows);
  ws.Record(ws.out() / "sweep.json");
}

void Compare(Workspace& ws, bool ablation) {
  const auto& spec = ws.spec();
  const auto methods = ablation ? ccr::AblationMethods(spec)
                                : ccr::ComparisonMethods(spec);
  const auto summaries = ccr::RunComparison(spec, methods);
  const std::string name = ablation ? "ablation" : "comparison";
  WriteJson(ws.out() / (name + ".json"), ccr::ToJson(summaries));
  ws.Record(ws.out() / (name + ".json"));
  std::cout << ccr::RenderComparisonTable(summaries);
}

int Dispatch(const std::string& command, const Options& opt) {
  Workspace ws(opt, command);
  ws.Log("start");
  if (command == "gen") {
    Gen(ws);
  } else if (command == "train1") {
    Train1(ws);
  } else if (command == "weights") {
    Weights(ws);
  } else if (command == "train2") {
    Train2(ws);
  } else if (command == "eval") {
    Eval(ws);
  } else if (command == "attribute") {
    Attribute(ws);
  } else if (command == "run") {
    Run(ws);
  } else if (command == "sweep") {
    Sweep(ws);
  } else if (command == "compare") {
    Compare(ws, opt.ablation);
  }
  ws.WriteManifest();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccr_lab: causally calibrated robust classifier experiments"};
  app.require_subcommand(1, 1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "generate ideal/observed/test datasets"},
      {"train1", "stage 1: encoder + head with DeCov"},
      {"weights", "per-sample IPW weights from the stage-1 model"},
      {"train2", "stage 2: weighted head retraining with the PNS penalty"},
      {"eval", "group metrics on the test split"},
      {"attribute", "block-occlusion attribution on the test split"},
      {"run", "gen, train1, weights, train2, eval and attribute"},
      {"sweep", "stage 2 over the lambda grid, one metrics.json per lambda"},
      {"compare", "ERM / JTT / AFR / CCR over the seed list"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "experiment or data config JSON");
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("--out", opt.out, "output directory")
        ->capture_default_str();
    sub->add_option("--data", opt.data,
                    "directory holding gen outputs (default: --out)");
    sub->add_option("--estimator", opt.estimator, "ccr|jtt|afr|oracle|none");
    sub->add_option("--lambda", opt.lambda, "causality coefficient");
    sub->add_option("--beta", opt.beta, "disentanglement coefficient");
    sub->add_option("--variant", opt.variant, "PNS bound: paper|pearl");
    sub->add_option("--warm-start", opt.warm_start,
                    "start stage 2 from the stage-1 head (true|false)");
    if (name == "compare") {
      sub->add_flag("--ablation", opt.ablation,
                    "run the component ablation grid instead");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return Dispatch(command, opt);
  } catch (const ccr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ccr::ErrorKind::kNumerical ? kExitNumerical
                                                  : kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
