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

#include "ccr/pns.hpp"

#include <cmath>

namespace ccr {

std::string ToString(PnsVariant variant) {
  return variant == PnsVariant::kPaper ? "paper" : "pearl";
}

PnsVariant ParsePnsVariant(const std::string& name) {
  if (name == "paper") return PnsVariant::kPaper;
  if (name == "pearl") return PnsVariant::kPearl;
  Fail(ErrorKind::kInvalidArgument, "unknown PNS variant '" + name + "'");
}

PnsBounds PnsLowerBound(const Matrix& probs_orig,
                        const CounterfactualProbs& probs_cf,
                        const std::vector<int>& labels, PnsVariant variant,
                        double epsilon) {
  const int n = static_cast<int>(probs_orig.rows());
  const int C = static_cast<int>(probs_orig.cols());
  Require(epsilon > 0.0 && epsilon <= 0.1, "epsilon must lie in (0, 0.1]");
  Require(probs_cf.samples() == n && probs_cf.classes() == C,
          "counterfactual tensor shape does not match original probabilities");
  Require(static_cast<int>(labels.size()) == n,
          "label count does not match probability rows");
  const int h = probs_cf.features();

  PnsBounds out;
  out.variant = variant;
  out.epsilon = epsilon;
  out.lb.resize(n, h);
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    Require(y >= 0 && y < C, "label outside [0, C)");
    const double p = probs_orig(i, y);
    for (int j = 0; j < h; ++j) {
      out.lb(i, j) =
          ClampPnsBound(RawPnsBound(p, probs_cf(i, j, y), variant), epsilon);
    }
  }
  return out;
}

PnsPenalty ComputePnsPenalty(const PnsBounds& bounds) {
  const auto n = bounds.lb.rows();
  const auto h = bounds.lb.cols();
  PnsPenalty out;
  out.per_sample.resize(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < h; ++j) s += std::log(bounds.lb(i, j));
    out.per_sample[i] = -s / static_cast<double>(h);
    sum += out.per_sample[i];
  }
  out.total = n > 0 ? sum / static_cast<double>(n) : 0.0;
  return out;
}

Vector MeanBoundPerFeature(const PnsBounds& bounds) {
  return bounds.lb.colwise().mean().transpose();
}

}  // namespace ccr
