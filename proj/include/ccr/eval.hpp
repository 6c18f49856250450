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

// Group-aware accuracy metrics and block-occlusion attribution.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"
#include "ccr/model.hpp"

namespace ccr {

struct MetricsReport {
  double mean_accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  std::map<int, double> per_group_accuracy;
  std::map<int, int> group_sizes;
};

// expected_group_count > 0 requires every id in [0, expected_group_count) to
// be populated.
MetricsReport GroupMetrics(const std::vector<int>& preds,
                           const std::vector<int>& labels,
                           const std::optional<std::vector<int>>& group_ids,
                           int expected_group_count = 0);

nlohmann::json ToJson(const MetricsReport& report);
std::string RenderMetricsTable(const MetricsReport& report);

struct InputBlock {
  std::string name;
  int begin = 0;  // [begin, end) over raw input columns
  int end = 0;
};

// Causal block [0, causal_dim) and spurious block [causal_dim, d).
std::vector<InputBlock> DefaultBlocks(const LabeledDataset& dataset);

struct BlockAttribution {
  InputBlock block;
  std::vector<double> mean_abs_change;  // per class
};

struct AttributionReport {
  int instances = 0;
  std::vector<BlockAttribution> blocks;

  // Mean over classes for the named block.
  double BlockMean(const std::string& name) const;
};

inline constexpr int kAttributionInstances = 200;

// For each of up to max_instances seeded-sampled rows and each block: zero
// the block in the raw input, re-encode, re-predict and record
// |p_c(original) − p_c(occluded)|, averaged over rows.
AttributionReport OcclusionAttribution(const Encoder& encoder,
                                       const ClassifierHead& head,
                                       const LabeledDataset& dataset,
                                       const std::vector<InputBlock>& blocks,
                                       RngSeed seed,
                                       int max_instances = kAttributionInstances);

nlohmann::json ToJson(const AttributionReport& report);
std::string RenderAttributionTable(const AttributionReport& report);

}  // namespace ccr
