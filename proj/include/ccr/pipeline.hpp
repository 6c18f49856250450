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

#pragma once

// End-to-end experiment orchestration shared by the CLI and the acceptance
// suite: data → stage 1 → weights → stage 2 → metrics / attribution.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"
#include "ccr/datagen.hpp"
#include "ccr/eval.hpp"
#include "ccr/fvec.hpp"
#include "ccr/ipw.hpp"
#include "ccr/train.hpp"

namespace ccr {

struct ComputedWeights {
  WeightVector weights;
  std::vector<int> pseudo_groups;
  std::optional<PropensityTable> propensity;
};

// Dispatches on config.ipw_estimator. The oracle estimator needs the
// dataset's true groups and the generating observation probabilities.
ComputedWeights ComputeWeights(const TrainConfig& config,
                               const Stage1Evaluation& stage1,
                               const LabeledDataset& train,
                               const std::optional<Matrix>& observation_probs);

nlohmann::json ToJson(const PropensityTable& table);

// Test-split group metrics of encoder + head.
MetricsReport EvaluateModel(const Encoder& encoder, const ClassifierHead& head,
                            const LabeledDataset& data);

// Seed for the attribution row sample of a run seeded with seed.
RngSeed AttributionSeed(std::uint64_t seed);

struct RunResult {
  Stage1Result stage1;
  Stage1Evaluation stage1_eval;
  ComputedWeights weights;
  Stage2Output stage2;
  MetricsReport test_metrics;
  AttributionReport attribution;
};

RunResult RunPipeline(const LabeledDataset& train, const LabeledDataset& test,
                      const TrainConfig& stage1_config,
                      const TrainConfig& stage2_config,
                      const std::optional<Matrix>& observation_probs = {});

// Train/test split for a synthetic run: the training set is an observed
// subsample of an ideal draw; the test set is a separate balanced draw with
// test_samples_per_class rows per class.
struct SyntheticSplit {
  LabeledDataset ideal;
  LabeledDataset train;
  LabeledDataset test;
  LabeledDataset validation;
};

SyntheticSplit MakeSyntheticSplit(const SyntheticConfig& config, RngSeed seed,
                                  int test_samples_per_class);

struct ExperimentSpec {
  std::optional<SyntheticConfig> synthetic;
  std::string train_fvec;
  std::string test_fvec;
  int test_samples_per_class = 2500;
  TrainConfig stage1;
  TrainConfig stage2;
  std::vector<std::uint64_t> seeds{42};
  std::vector<double> lambda_grid{0.001, 0.5, 1.0, 2.0, 3.0, 5.0};
  // When true, λ is chosen per seed by worst-group accuracy on a balanced
  // validation draw over lambda_grid.
  bool select_lambda = false;

  void Validate() const;
};

// Defaults tuned for the bench-v1 synthetic benchmark.
TrainConfig DefaultStage1Config();
TrainConfig DefaultStage2Config();
ExperimentSpec DefaultBenchSpec();

ExperimentSpec ExperimentSpecFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ExperimentSpec& spec);

// FVEC1 data as a dataset. The whole width is treated as the causal block;
// K is inferred from the largest group id.
LabeledDataset DatasetFromFvec(const FvecData& data);

struct SeedData {
  LabeledDataset train;
  LabeledDataset test;
  std::optional<LabeledDataset> validation;
  std::optional<Matrix> observation_probs;
};

SeedData LoadSeedData(const ExperimentSpec& spec, std::uint64_t seed);

struct MethodSpec {
  std::string name;
  double beta = 0.0;
  double lambda = 0.0;
  WeightEstimator estimator = WeightEstimator::kNone;
  bool select_lambda = false;
};

// ERM, JTT, AFR, CCR.
std::vector<MethodSpec> ComparisonMethods(const ExperimentSpec& spec);
// All 2^3 disentangle/CFS/IPW toggles plus AFR- and JTT-weighted variants of
// the full method.
std::vector<MethodSpec> AblationMethods(const ExperimentSpec& spec);

struct CellResult {
  std::string method;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  MetricsReport metrics;
  double spurious_attribution = 0.0;
};

CellResult RunMethodCell(const ExperimentSpec& spec, const MethodSpec& method,
                         std::uint64_t seed, const SeedData& data);

struct MethodSummary {
  std::string method;
  std::vector<CellResult> cells;
  double median_mean_accuracy = 0.0;
  double median_wga = 0.0;
  double min_wga = 0.0;
  double max_wga = 0.0;
  double min_mean_accuracy = 0.0;
  double max_mean_accuracy = 0.0;
  double median_spurious_attribution = 0.0;
};

// Runs every (method, seed) cell. Parallelism is capped by CCR_THREADS.
std::vector<MethodSummary> RunComparison(const ExperimentSpec& spec,
                                         const std::vector<MethodSpec>& methods);

nlohmann::json ToJson(const std::vector<MethodSummary>& summaries);
std::string RenderComparisonTable(const std::vector<MethodSummary>& summaries);

double Median(std::vector<double> values);

// Worker count from CCR_THREADS (default: hardware concurrency, at least 1).
int ThreadBudget();

}  // namespace ccr
