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

// Loss terms with exact analytic gradients.

#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"
#include "ccr/pns.hpp"

namespace ccr {

struct LossBreakdown {
  double total = 0.0;
  double cross_entropy = 0.0;
  double decov = 0.0;
  double pns_penalty = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
};

nlohmann::json ToJson(const LossBreakdown& b);

struct CeResult {
  double loss = 0.0;
  Matrix grad_weights;   // h×C
  Vector grad_bias;      // C
  Matrix grad_features;  // n×h
};

// loss = (1/n)·Σ_i w_i·(−log p_i(y_i)).
CeResult CrossEntropyLossGrad(const ClassifierHead& head,
                              const FeatureMatrix& features,
                              const std::vector<int>& labels,
                              const Vector& sample_weights);

struct DecovResult {
  double penalty = 0.0;
  Matrix grad_features;  // n×h
};

// With F̄ the column-centered batch and Cov = F̄ᵀF̄ / n,
// penalty = ½(‖Cov‖²_F − ‖diag Cov‖²).
DecovResult DecovPenaltyGrad(const FeatureMatrix& features);

struct Stage2LossResult {
  LossBreakdown breakdown;
  Matrix grad_weights;
  Vector grad_bias;
};

// (1/n)·Σ_i w_i·(CE_i − λ·(1/h)·Σ_j log lb(i, j)). Clamped bounds carry zero
// gradient. With λ = 0 this is exactly CrossEntropyLossGrad.
Stage2LossResult Stage2LossGrad(const ClassifierHead& head,
                            const FeatureMatrix& features,
                            const std::vector<int>& labels,
                            const Vector& sample_weights, double lambda,
                            PnsVariant variant,
                            double epsilon = kDefaultPnsEpsilon);

// Total stage-2 objective from per-sample CE values and precomputed bounds.
double Stage2Objective(const Vector& per_sample_ce, const PnsBounds& bounds,
                       const Vector& sample_weights, double lambda);

}  // namespace ccr
