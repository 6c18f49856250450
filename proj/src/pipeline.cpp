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

#include "ccr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <sstream>
#include <thread>

namespace ccr {
namespace {

constexpr std::uint64_t kTestStream = 100;
constexpr std::uint64_t kValidationStream = 101;
constexpr std::uint64_t kAttributionSeedStream = 102;

Stage2Output RunStage2(const Stage1Result& s1, const LabeledDataset& train,
                       const ComputedWeights& w, const TrainConfig& cfg) {
  return TrainStage2(s1.encoder, s1.head, train, w.weights, cfg);
}

std::vector<std::uint64_t> SeedsFromJson(const nlohmann::json& j) {
  return j.get<std::vector<std::uint64_t>>();
}

}  // namespace

ComputedWeights ComputeWeights(const TrainConfig& config,
                               const Stage1Evaluation& stage1,
                               const LabeledDataset& train,
                               const std::optional<Matrix>& observation_probs) {
  ComputedWeights out;
  PropensityTable table =
      EstimatePropensityCcr(stage1.preds, train.labels, train.class_count);
  out.pseudo_groups = table.pseudo_group_of;
  switch (config.ipw_estimator) {
    case WeightEstimator::kCcr:
      out.weights = WeightsFromPropensity(table);
      out.propensity = std::move(table);
      break;
    case WeightEstimator::kJtt:
      out.weights = WeightsJtt(stage1.preds, train.labels, config.jtt_upweight);
      break;
    case WeightEstimator::kAfr:
      out.weights = WeightsAfr(stage1.probs, train.labels, config.afr_gamma);
      break;
    case WeightEstimator::kOracle:
      if (!train.group_ids || !observation_probs) {
        Fail(ErrorKind::kInvalidArgument,
             "oracle weights need true groups and observation probabilities");
      }
      out.weights = WeightsOracle(*train.group_ids, *observation_probs,
                                  train.spurious_value_count);
      break;
    case WeightEstimator::kNone:
      out.weights = WeightVector::Uniform(train.size());
      break;
  }
  return out;
}

MetricsReport EvaluateModel(const Encoder& encoder, const ClassifierHead& head,
                            const LabeledDataset& data) {
  const auto preds =
      ArgmaxRows(HeadProbs(head, Encode(encoder, data.features_raw)));
  return GroupMetrics(preds, data.labels, data.group_ids);
}

RngSeed AttributionSeed(std::uint64_t seed) {
  return RngSeed{DeriveSeed(RngSeed{seed}, kAttributionSeedStream)};
}

nlohmann::json ToJson(const PropensityTable& t) {
  return {{"k_effective", t.k_effective},
          {"group_sizes", t.group_sizes},
          {"p_hat", t.p_hat}};
}

RunResult RunPipeline(const LabeledDataset& train, const LabeledDataset& test,
                      const TrainConfig& stage1_config,
                      const TrainConfig& stage2_config,
                      const std::optional<Matrix>& observation_probs) {
  RunResult r;
  r.stage1 = TrainStage1(train, stage1_config.feature_dim, stage1_config);
  r.stage1_eval = EvaluateStage1(r.stage1.encoder, r.stage1.head, train);
  r.weights =
      ComputeWeights(stage2_config, r.stage1_eval, train, observation_probs);
  r.stage2 = RunStage2(r.stage1, train, r.weights, stage2_config);
  r.test_metrics = EvaluateModel(r.stage1.encoder, r.stage2.head, test);
  r.attribution = OcclusionAttribution(
      r.stage1.encoder, r.stage2.head, test, DefaultBlocks(test),
      AttributionSeed(stage2_config.seed));
  return r;
}

SyntheticSplit MakeSyntheticSplit(const SyntheticConfig& config, RngSeed seed,
                                  int test_samples_per_class) {
  Require(test_samples_per_class >= 1, "test_samples_per_class must be >= 1");
  SyntheticSplit s;
  s.ideal = GenerateIdeal(config, seed);
  s.train = SubsampleObserve(s.ideal, config, seed).observed;
  SyntheticConfig held_out = config;
  held_out.samples_per_class.assign(config.class_count, test_samples_per_class);
  s.test = GenerateIdeal(held_out, RngSeed{DeriveSeed(seed, kTestStream)});
  s.validation =
      GenerateIdeal(held_out, RngSeed{DeriveSeed(seed, kValidationStream)});
  return s;
}

void ExperimentSpec::Validate() const {
  Require(!seeds.empty(), "seed list must be non-empty");
  if (!synthetic) {
    Require(!train_fvec.empty() && !test_fvec.empty(),
            "experiment needs a synthetic config or train/test FVEC paths");
  }
  if (select_lambda) {
    Require(!lambda_grid.empty(), "lambda grid must be non-empty");
    Require(synthetic.has_value(),
            "lambda selection needs a validation split (synthetic data)");
  }
  stage1.Validate();
  stage2.Validate();
}

TrainConfig DefaultStage1Config() {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.weight_decay = 1e-4;
  c.momentum = 0.9;
  c.batch_size = 32;
  c.epochs = 8;
  c.beta = 0.5;
  c.feature_dim = 16;
  c.encoder_init_scale = 0.1;
  return c;
}

TrainConfig DefaultStage2Config() {
  TrainConfig c = DefaultStage1Config();
  c.epochs = 8;
  c.lambda = 3.0;
  c.ipw_estimator = WeightEstimator::kCcr;
  return c;
}

ExperimentSpec DefaultBenchSpec() {
  ExperimentSpec s;
  s.synthetic = SyntheticConfig::BenchV1();
  s.stage1 = DefaultStage1Config();
  s.stage2 = DefaultStage2Config();
  s.seeds = {42, 43, 44, 45, 46};
  s.select_lambda = true;
  return s;
}

ExperimentSpec ExperimentSpecFromJson(const nlohmann::json& j) {
  ExperimentSpec s = DefaultBenchSpec();
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        s.synthetic = SyntheticConfigFromJson(d.at("synthetic"));
      } else {
        s.synthetic.reset();
        s.train_fvec = d.at("train_fvec").get<std::string>();
        s.test_fvec = d.at("test_fvec").get<std::string>();
      }
      s.test_samples_per_class =
          d.value("test_samples_per_class", s.test_samples_per_class);
    }
    if (j.contains("stage1")) {
      s.stage1 = TrainConfigFromJson(j.at("stage1"), s.stage1);
    }
    if (j.contains("stage2")) {
      s.stage2 = TrainConfigFromJson(j.at("stage2"), s.stage2);
    }
    if (j.contains("seeds")) s.seeds = SeedsFromJson(j.at("seeds"));
    if (j.contains("lambda_grid")) {
      s.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    }
    s.select_lambda = j.value("select_lambda", s.select_lambda);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument,
         std::string("bad experiment spec: ") + e.what());
  }
  // Stage 2 always reuses the stage-1 feature width.
  s.stage2.feature_dim = s.stage1.feature_dim;
  s.stage2.nonlinearity = s.stage1.nonlinearity;
  s.Validate();
  return s;
}

nlohmann::json ToJson(const ExperimentSpec& s) {
  nlohmann::json data;
  if (s.synthetic) {
    data["synthetic"] = ToJson(*s.synthetic);
  } else {
    data["train_fvec"] = s.train_fvec;
    data["test_fvec"] = s.test_fvec;
  }
  data["test_samples_per_class"] = s.test_samples_per_class;
  return {{"data", data},
          {"stage1", ToJson(s.stage1)},
          {"stage2", ToJson(s.stage2)},
          {"seeds", s.seeds},
          {"lambda_grid", s.lambda_grid},
          {"select_lambda", s.select_lambda}};
}

LabeledDataset DatasetFromFvec(const FvecData& data) {
  LabeledDataset d;
  d.features_raw = data.values;
  d.labels = data.labels;
  d.class_count = std::max(2, data.class_count);
  d.causal_dim = static_cast<int>(data.values.cols());
  d.spurious_dim = 0;
  if (data.groups) {
    int max_group = 0;
    for (int g : *data.groups) {
      Require(g >= 0, "negative group id in FVEC data");
      max_group = std::max(max_group, g);
    }
    d.spurious_value_count =
        std::max(2, (max_group + d.class_count) / d.class_count);
    d.group_ids = data.groups;
  }
  d.Validate();
  return d;
}

SeedData LoadSeedData(const ExperimentSpec& spec, std::uint64_t seed) {
  SeedData out;
  if (spec.synthetic) {
    SyntheticSplit split = MakeSyntheticSplit(*spec.synthetic, RngSeed{seed},
                                              spec.test_samples_per_class);
    out.train = std::move(split.train);
    out.test = std::move(split.test);
    out.validation = std::move(split.validation);
    out.observation_probs = spec.synthetic->observation_probs;
  } else {
    out.train = DatasetFromFvec(ReadFvec(spec.train_fvec));
    out.test = DatasetFromFvec(ReadFvec(spec.test_fvec));
  }
  return out;
}

std::vector<MethodSpec> ComparisonMethods(const ExperimentSpec& spec) {
  const double beta = spec.stage1.beta;
  const double lambda = spec.stage2.lambda;
  return {
      {"ERM", 0.0, 0.0, WeightEstimator::kNone, false},
      {"JTT", 0.0, 0.0, WeightEstimator::kJtt, false},
      {"AFR", 0.0, 0.0, WeightEstimator::kAfr, false},
      {"CCR", beta, lambda, WeightEstimator::kCcr, spec.select_lambda},
  };
}

std::vector<MethodSpec> AblationMethods(const ExperimentSpec& spec) {
  const double beta = spec.stage1.beta;
  const double lambda = spec.stage2.lambda;
  const bool sel = spec.select_lambda;
  std::vector<MethodSpec> rows;
  for (int mask = 0; mask < 8; ++mask) {
    const bool dis = mask & 1;
    const bool cfs = mask & 2;
    const bool ipw = mask & 4;
    std::string name;
    auto add = [&name](const char* part) {
      name += name.empty() ? part : std::string(" + ") + part;
    };
    if (dis) add("disentangle");
    if (cfs) add("CFS");
    if (ipw) add("IPW");
    if (name.empty()) name = "ERM";
    rows.push_back({name, dis ? beta : 0.0, cfs ? lambda : 0.0,
                    ipw ? WeightEstimator::kCcr : WeightEstimator::kNone,
                    cfs && sel});
  }
  rows.push_back({"disentangle + CFS + IPW (AFR)", beta, lambda,
                  WeightEstimator::kAfr, sel});
  rows.push_back({"disentangle + CFS + IPW (JTT)", beta, lambda,
                  WeightEstimator::kJtt, sel});
  return rows;
}

CellResult RunMethodCell(const ExperimentSpec& spec, const MethodSpec& method,
                         std::uint64_t seed, const SeedData& data) {
  TrainConfig s1 = spec.stage1;
  s1.beta = method.beta;
  s1.seed = seed;
  TrainConfig s2 = spec.stage2;
  s2.seed = seed;
  s2.lambda = method.lambda;
  s2.ipw_estimator = method.estimator;
  s2.feature_dim = s1.feature_dim;

  const Stage1Result stage1 = TrainStage1(data.train, s1.feature_dim, s1);
  const Stage1Evaluation eval =
      EvaluateStage1(stage1.encoder, stage1.head, data.train);
  const ComputedWeights weights =
      ComputeWeights(s2, eval, data.train, data.observation_probs);

  std::vector<double> grid{method.lambda};
  if (method.select_lambda && method.lambda > 0.0) {
    Require(data.validation.has_value(), "lambda selection needs validation");
    grid = spec.lambda_grid;
  }
  double best_lambda = grid.front();
  double best_wga = -1.0;
  ClassifierHead best_head;
  for (double lambda : grid) {
    s2.lambda = lambda;
    const Stage2Output out = RunStage2(stage1, data.train, weights, s2);
    double score = 0.0;
    if (grid.size() > 1) {
      score = EvaluateModel(stage1.encoder, out.head, *data.validation)
                  .worst_group_accuracy;
    }
    if (score > best_wga) {
      best_wga = score;
      best_lambda = lambda;
      best_head = out.head;
    }
  }

  CellResult cell;
  cell.method = method.name;
  cell.seed = seed;
  cell.lambda = best_lambda;
  cell.metrics = EvaluateModel(stage1.encoder, best_head, data.test);
  if (data.test.spurious_dim > 0) {
    const AttributionReport attr = OcclusionAttribution(
        stage1.encoder, best_head, data.test, DefaultBlocks(data.test),
        AttributionSeed(seed));
    cell.spurious_attribution = attr.BlockMean("spurious");
  }
  return cell;
}

double Median(std::vector<double> values) {
  Require(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

int ThreadBudget() {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CCR_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) budget = budget > 0 ? std::min(budget, cap) : cap;
  }
  return std::max(1, budget);
}

std::vector<MethodSummary> RunComparison(
    const ExperimentSpec& spec, const std::vector<MethodSpec>& methods) {
  spec.Validate();
  std::vector<SeedData> data;
  data.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) data.push_back(LoadSeedData(spec, seed));

  struct Job {
    std::size_t method;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({m, s});
  }
  std::vector<CellResult> results(jobs.size());

  // Cells are independent and individually deterministic; results land in
  // fixed slots so the output does not depend on scheduling.
  const std::size_t workers =
      std::min<std::size_t>(ThreadBudget(), jobs.size());
  std::vector<std::future<void>> pending;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pending.push_back(std::async(std::launch::async, [&] {
      for (std::size_t k = next++; k < jobs.size(); k = next++) {
        const Job& job = jobs[k];
        results[k] = RunMethodCell(spec, methods[job.method],
                                   spec.seeds[job.seed], data[job.seed]);
      }
    }));
  }
  for (auto& f : pending) f.get();

  std::vector<MethodSummary> summaries;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary s;
    s.method = methods[m].name;
    std::vector<double> mean_acc, wga, attr;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].method != m) continue;
      s.cells.push_back(results[k]);
      mean_acc.push_back(results[k].metrics.mean_accuracy);
      wga.push_back(results[k].metrics.worst_group_accuracy);
      attr.push_back(results[k].spurious_attribution);
    }
    s.median_mean_accuracy = Median(mean_acc);
    s.median_wga = Median(wga);
    s.median_spurious_attribution = Median(attr);
    s.min_wga = *std::min_element(wga.begin(), wga.end());
    s.max_wga = *std::max_element(wga.begin(), wga.end());
    s.min_mean_accuracy = *std::min_element(mean_acc.begin(), mean_acc.end());
    s.max_mean_accuracy = *std::max_element(mean_acc.begin(), mean_acc.end());
    summaries.push_back(std::move(s));
  }
  return summaries;
}

nlohmann::json ToJson(const std::vector<MethodSummary>& summaries) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.cells) {
      cells.push_back({{"seed", c.seed},
                       {"lambda", c.lambda},
                       {"mean_accuracy", c.metrics.mean_accuracy},
                       {"worst_group_accuracy", c.metrics.worst_group_accuracy},
                       {"spurious_attribution", c.spurious_attribution}});
    }
    rows.push_back({{"method", s.method},
                    {"median_mean_accuracy", s.median_mean_accuracy},
                    {"mean_accuracy_range",
                     {s.min_mean_accuracy, s.max_mean_accuracy}},
                    {"median_worst_group_accuracy", s.median_wga},
                    {"worst_group_accuracy_range", {s.min_wga, s.max_wga}},
                    {"median_spurious_attribution",
                     s.median_spurious_attribution},
                    {"runs", cells}});
  }
  return rows;
}

std::string RenderComparisonTable(
    const std::vector<MethodSummary>& summaries) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-34s %8s %17s %8s %17s %10s\n",
                "method", "mean", "[min, max]", "WGA", "[min, max]",
                "spur.attr");
  out << line;
  for (const auto& s : summaries) {
    std::snprintf(line, sizeof(line),
                  "%-34s %8.4f [%6.4f, %6.4f] %8.4f [%6.4f, %6.4f] %10.3e\n",
                  s.method.c_str(), s.median_mean_accuracy,
                  s.min_mean_accuracy, s.max_mean_accuracy, s.median_wga,
                  s.min_wga, s.max_wga, s.median_spurious_attribution);
    out << line;
  }
  return out.str();
}

}  // namespace ccr
