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

#include "ccr/ipw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ccr {

std::string ToString(WeightEstimator e) {
  switch (e) {
    case WeightEstimator::kCcr:
      return "ccr";
    case WeightEstimator::kJtt:
      return "jtt";
    case WeightEstimator::kAfr:
      return "afr";
    case WeightEstimator::kOracle:
      return "oracle";
    case WeightEstimator::kNone:
      return "none";
  }
  return "none";
}

WeightEstimator ParseWeightEstimator(const std::string& name) {
  if (name == "ccr") return WeightEstimator::kCcr;
  if (name == "jtt") return WeightEstimator::kJtt;
  if (name == "afr") return WeightEstimator::kAfr;
  if (name == "oracle") return WeightEstimator::kOracle;
  if (name == "none") return WeightEstimator::kNone;
  Fail(ErrorKind::kInvalidArgument, "unknown weight estimator '" + name + "'");
}

WeightVector WeightVector::Uniform(int n) {
  return {Vector::Ones(n), WeightNormalization::kMeanOne};
}

Vector NormalizeMeanOne(const Vector& raw) {
  Require(raw.size() >= 1, "cannot normalize an empty weight vector");
  const double mean = raw.mean();
  Require(mean > 0.0 && std::isfinite(mean),
          "weights must have a positive finite mean");
  return raw / mean;
}

PropensityTable EstimatePropensityCcr(const std::vector<int>& stage1_preds,
                                      const std::vector<int>& labels,
                                      int class_count, double min_propensity) {
  Require(stage1_preds.size() == labels.size(),
          "prediction and label vectors differ in length");
  Require(!labels.empty(), "no samples");
  Require(class_count >= 1, "class_count must be positive");
  const int n = static_cast<int>(labels.size());

  PropensityTable t;
  t.k_effective = 2;
  t.pseudo_group_of.resize(n);
  t.group_sizes.assign(2 * class_count, 0);
  t.p_hat.assign(2 * class_count, 0.0);
  for (int i = 0; i < n; ++i) {
    Require(labels[i] >= 0 && labels[i] < class_count, "label outside [0, C)");
    const int g = 2 * labels[i] + (stage1_preds[i] == labels[i] ? 0 : 1);
    t.pseudo_group_of[i] = g;
    ++t.group_sizes[g];
  }
  const double floor = min_propensity > 0.0 ? min_propensity : 1.0 / n;
  for (std::size_t g = 0; g < t.group_sizes.size(); ++g) {
    if (t.group_sizes[g] == 0) continue;
    t.p_hat[g] = std::max(static_cast<double>(t.group_sizes[g]) / n, floor);
  }
  return t;
}

Vector RawWeightsFromPropensity(const PropensityTable& table) {
  const int n = table.sample_count();
  Vector raw(n);
  for (int i = 0; i < n; ++i) {
    const double p = table.p_hat.at(table.pseudo_group_of[i]);
    if (!(p > 0.0)) {
      Fail(ErrorKind::kInvalidArgument,
           "zero propensity for occupied pseudo-group " +
               std::to_string(table.pseudo_group_of[i]));
    }
    raw[i] = 1.0 / (table.k_effective * p);
  }
  return raw;
}

WeightVector WeightsFromPropensity(const PropensityTable& table) {
  return {NormalizeMeanOne(RawWeightsFromPropensity(table)),
          WeightNormalization::kMeanOne};
}

WeightVector WeightsJtt(const std::vector<int>& stage1_preds,
                        const std::vector<int>& labels, double upweight) {
  Require(upweight >= 1.0, "JTT upweight must be >= 1");
  Require(stage1_preds.size() == labels.size() && !labels.empty(),
          "prediction and label vectors must be non-empty and aligned");
  Vector raw(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    raw[i] = stage1_preds[i] == labels[i] ? 1.0 : upweight;
  }
  return {NormalizeMeanOne(raw), WeightNormalization::kMeanOne};
}

WeightVector WeightsAfr(const Matrix& stage1_probs,
                        const std::vector<int>& labels, double gamma) {
  Require(gamma >= 0.0, "AFR gamma must be >= 0");
  const int n = static_cast<int>(labels.size());
  Require(n >= 1 && stage1_probs.rows() == n,
          "probability rows must match labels");
  const int C = static_cast<int>(stage1_probs.cols());
  Vector raw(n);
  std::vector<double> class_mass(C, 0.0);
  std::vector<int> class_count(C, 0);
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    Require(y >= 0 && y < C, "label outside [0, C)");
    raw[i] = std::exp(-gamma * stage1_probs(i, y));
    class_mass[y] += raw[i];
    ++class_count[y];
  }
  // Each class's total mass becomes proportional to its sample count.
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    raw[i] *= class_count[y] / class_mass[y];
  }
  return {NormalizeMeanOne(raw), WeightNormalization::kMeanOne};
}

WeightVector WeightsOracle(const std::vector<int>& group_ids,
                           const Matrix& observation_probs,
                           int spurious_count) {
  Require(spurious_count >= 1 && observation_probs.cols() == spurious_count,
          "observation_probs must have K columns");
  Vector w(static_cast<Eigen::Index>(group_ids.size()));
  for (std::size_t i = 0; i < group_ids.size(); ++i) {
    const int g = group_ids[i];
    const int j = g / spurious_count;
    const int k = g % spurious_count;
    Require(g >= 0 && j < observation_probs.rows(), "group id out of range");
    const double p = observation_probs(j, k);
    if (!(p > 0.0)) {
      Fail(ErrorKind::kInvalidArgument,
           "zero observation probability for occupied group " +
               std::to_string(g));
    }
    // 1/(K·p̂) with p̂ = p/K.
    w[i] = 1.0 / p;
  }
  return {w, WeightNormalization::kNone};
}

void WriteWeightsCsv(std::ostream& out, const WeightVector& weights,
                     const std::vector<int>& pseudo_groups) {
  Require(static_cast<int>(pseudo_groups.size()) == weights.size(),
          "pseudo-group vector length does not match weights");
  out << "index,weight,pseudo_group\n";
  char buf[64];
  for (int i = 0; i < weights.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", weights.weights[i]);
    out << i << ',' << buf << ',' << pseudo_groups[i] << '\n';
  }
}

void WriteWeightsCsv(const std::string& path, const WeightVector& weights,
                     const std::vector<int>& pseudo_groups) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path);
  WriteWeightsCsv(out, weights, pseudo_groups);
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

WeightVector ReadWeightsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "index,weight,pseudo_group") {
    Fail(ErrorKind::kFormat, "unexpected weights CSV header in " + path);
  }
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, weight;
    if (!std::getline(row, idx, ',') || !std::getline(row, weight, ',')) {
      Fail(ErrorKind::kFormat, "malformed weights row: " + line);
    }
    if (std::stoul(idx) != values.size()) {
      Fail(ErrorKind::kFormat, "weights CSV rows out of order at " + idx);
    }
    const double w = std::stod(weight);
    if (!(w > 0.0) || !std::isfinite(w)) {
      Fail(ErrorKind::kFormat, "weights must be positive and finite");
    }
    values.push_back(w);
  }
  if (values.empty()) Fail(ErrorKind::kFormat, "weights CSV has no rows");
  return {Eigen::Map<const Vector>(values.data(),
                                   static_cast<Eigen::Index>(values.size())),
          WeightNormalization::kNone};
}

}  // namespace ccr
