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

// Per-feature lower bounds on the probability of necessity and sufficiency
// (PNS) of each last-layer feature, and the causal-constraint penalty built
// from them.

#include <string>
#include <vector>

#include "ccr/core.hpp"
#include "ccr/model.hpp"

namespace ccr {

// kPaper:  lb = max(0, p(y) − (1 − p_cf(y)))   i.e. P(Y=y) − P(Y_cf≠y)
// kPearl:  lb = max(0, p(y) − p_cf(y))          i.e. P(Y=y) − P(Y_cf=y)
enum class PnsVariant { kPaper, kPearl };

std::string ToString(PnsVariant variant);
PnsVariant ParsePnsVariant(const std::string& name);

inline constexpr double kDefaultPnsEpsilon = 1e-6;

struct PnsBounds {
  Matrix lb;  // n×h, every entry in [epsilon, 1]
  PnsVariant variant = PnsVariant::kPaper;
  double epsilon = kDefaultPnsEpsilon;
};

// Bound before the max(0, ·) and the ε clamp.
inline double RawPnsBound(double p_orig, double p_cf, PnsVariant variant) {
  return variant == PnsVariant::kPaper ? p_orig - (1.0 - p_cf)
                                       : p_orig - p_cf;
}

inline double ClampPnsBound(double raw, double epsilon) {
  return raw > epsilon ? raw : epsilon;
}

PnsBounds PnsLowerBound(const Matrix& probs_orig,
                        const CounterfactualProbs& probs_cf,
                        const std::vector<int>& labels, PnsVariant variant,
                        double epsilon = kDefaultPnsEpsilon);

struct PnsPenalty {
  Vector per_sample;  // −(1/h)·Σ_j log lb(i, j)
  double total = 0.0;  // mean of per_sample
};

PnsPenalty ComputePnsPenalty(const PnsBounds& bounds);

// Column means of lb, one per feature.
Vector MeanBoundPerFeature(const PnsBounds& bounds);

}  // namespace ccr
