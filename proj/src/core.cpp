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

#include "ccr/core.hpp"

#include <cmath>
#include <string>

namespace ccr {

std::uint64_t DeriveSeed(RngSeed seed, std::uint64_t stream) {
  std::uint64_t z = seed.value + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void LabeledDataset::Validate() const {
  const int n = size();
  Require(n >= 1, "dataset must contain at least one sample");
  Require(features_raw.rows() == n,
          "feature rows (" + std::to_string(features_raw.rows()) +
              ") do not match label count (" + std::to_string(n) + ")");
  Require(features_raw.cols() >= 1, "input dimension must be >= 1");
  Require(class_count >= 2, "class_count must be >= 2");
  Require(causal_dim >= 0 && spurious_dim >= 0 &&
              causal_dim + spurious_dim == features_raw.cols(),
          "causal_dim + spurious_dim must equal the input dimension");
  for (int i = 0; i < n; ++i) {
    Require(labels[i] >= 0 && labels[i] < class_count,
            "label " + std::to_string(labels[i]) + " at row " +
                std::to_string(i) + " outside [0, C)");
  }
  Require(AllFinite(features_raw), "input features must be finite");
  if (group_ids) {
    Require(static_cast<int>(group_ids->size()) == n,
            "group id vector length does not match sample count");
    Require(spurious_value_count >= 2,
            "group ids require spurious_value_count >= 2");
    for (int i = 0; i < n; ++i) {
      const int g = (*group_ids)[i];
      Require(g >= 0 && g < group_count(),
              "group id " + std::to_string(g) + " outside [0, C*K)");
      Require(g / spurious_value_count == labels[i],
              "group id " + std::to_string(g) + " inconsistent with label " +
                  std::to_string(labels[i]) + " at row " + std::to_string(i));
    }
  }
}

LabeledDataset LabeledDataset::Subset(const std::vector<int>& rows) const {
  LabeledDataset out;
  out.class_count = class_count;
  out.spurious_value_count = spurious_value_count;
  out.causal_dim = causal_dim;
  out.spurious_dim = spurious_dim;
  out.features_raw.resize(static_cast<Eigen::Index>(rows.size()),
                          features_raw.cols());
  out.labels.reserve(rows.size());
  if (group_ids) out.group_ids.emplace().reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    out.features_raw.row(static_cast<Eigen::Index>(r)) = features_raw.row(i);
    out.labels.push_back(labels[i]);
    if (group_ids) out.group_ids->push_back((*group_ids)[i]);
  }
  return out;
}

Vector CounterfactualMask::Apply(const Vector& features) const {
  Require(dropped_feature >= 0 && dropped_feature < features.size(),
          "mask index outside feature range");
  Vector out = features;
  out[dropped_feature] = 0.0;
  return out;
}

int ObservationMask::kept() const {
  int count = 0;
  for (bool b : observed) count += b ? 1 : 0;
  return count;
}

bool AllFinite(const Matrix& m) { return m.allFinite(); }

}  // namespace ccr
