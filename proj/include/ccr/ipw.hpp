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

// Propensity estimation and inverse-propensity sample weights.
//
// The CCR estimator splits every class into the samples the stage-1 model
// got right (pseudo-group 2j) and wrong (2j + 1), takes each pseudo-group's
// share of the whole dataset as p̂ and weights a sample by 1/(2·p̂). Before
// normalization every occupied pseudo-group then carries total weight n/2.

#include <iosfwd>
#include <string>
#include <vector>

#include "ccr/core.hpp"

namespace ccr {

enum class WeightEstimator { kCcr, kJtt, kAfr, kOracle, kNone };

std::string ToString(WeightEstimator e);
WeightEstimator ParseWeightEstimator(const std::string& name);

struct PropensityTable {
  std::vector<int> pseudo_group_of;  // 2·label + (correct ? 0 : 1)
  std::vector<int> group_sizes;      // size 2C; 0 for empty groups
  std::vector<double> p_hat;         // size 2C; 0 for empty groups
  int k_effective = 2;

  int sample_count() const { return static_cast<int>(pseudo_group_of.size()); }
};

enum class WeightNormalization { kMeanOne, kNone };

struct WeightVector {
  Vector weights;
  WeightNormalization normalization = WeightNormalization::kMeanOne;

  int size() const { return static_cast<int>(weights.size()); }
  static WeightVector Uniform(int n);
};

// min_propensity <= 0 selects the default floor 1/n.
PropensityTable EstimatePropensityCcr(const std::vector<int>& stage1_preds,
                                      const std::vector<int>& labels,
                                      int class_count,
                                      double min_propensity = 0.0);

// Raw weights 1/(K·p̂), before normalization.
Vector RawWeightsFromPropensity(const PropensityTable& table);
WeightVector WeightsFromPropensity(const PropensityTable& table);

WeightVector WeightsJtt(const std::vector<int>& stage1_preds,
                        const std::vector<int>& labels, double upweight);

WeightVector WeightsAfr(const Matrix& stage1_probs,
                        const std::vector<int>& labels, double gamma);

// 1/p_{j,k}(o=1) per sample; deliberately not normalized.
WeightVector WeightsOracle(const std::vector<int>& group_ids,
                           const Matrix& observation_probs, int spurious_count);

// Scales to mean one.
Vector NormalizeMeanOne(const Vector& raw);

// header "index,weight,pseudo_group"; weights with 17 significant digits.
void WriteWeightsCsv(std::ostream& out, const WeightVector& weights,
                     const std::vector<int>& pseudo_groups);
void WriteWeightsCsv(const std::string& path, const WeightVector& weights,
                     const std::vector<int>& pseudo_groups);
WeightVector ReadWeightsCsv(const std::string& path);

}  // namespace ccr
