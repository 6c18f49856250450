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

// Synthetic spurious-correlation benchmark: a balanced "ideal" dataset and a
// group-dependent subsample of it.
//
// Class j has causal-block mean μ_c·s_j and spurious value k has
// spurious-block mean μ_s·s_k, where for two levels s_0 = −1, s_1 = +1 on
// every dimension, and for more levels s_j[t] = +1 iff t mod levels == j
// (−1 otherwise).

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"

namespace ccr {

struct SyntheticConfig {
  int class_count = 2;
  int spurious_value_count = 2;
  std::vector<int> samples_per_class{5000, 5000};
  int causal_dim = 20;
  int spurious_dim = 2;
  double causal_mean_scale = 0.25;
  double causal_noise = 1.0;
  double spurious_mean_scale = 1.5;
  double spurious_noise = 0.5;
  Matrix observation_probs;  // C×K

  void Validate() const;

  // The default benchmark ("bench-v1").
  static SyntheticConfig BenchV1();
};

// Keys match the field names. samples_per_class accepts a number (same count
// for every class) or an array of length C.
SyntheticConfig SyntheticConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const SyntheticConfig& config);

// Sign pattern s_level[t] used for class and spurious means.
Vector LevelMeanPattern(int level, int level_count, int dim);

LabeledDataset GenerateIdeal(const SyntheticConfig& config, RngSeed seed);

struct ObservedSample {
  LabeledDataset observed;
  ObservationMask mask;  // aligned with the ideal dataset
};

ObservedSample SubsampleObserve(const LabeledDataset& ideal,
                                const SyntheticConfig& config, RngSeed seed);

// Per-group sample counts, indexed by group id (size C·K).
std::vector<int> GroupCounts(const LabeledDataset& dataset);

}  // namespace ccr
