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

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"

#include "ccr/ipw.hpp"

namespace ccr {
namespace {

// Class 0: 90 right / 10 wrong; class 1: 70 right / 30 wrong.
void WorkedExample(std::vector<int>& preds, std::vector<int>& labels) {
  preds.clear();
  labels.clear();
  auto add = [&](int label, int count, bool correct) {
    for (int i = 0; i < count; ++i) {
      labels.push_back(label);
      preds.push_back(correct ? label : 1 - label);
    }
  };
  add(0, 90, true);
  add(0, 10, false);
  add(1, 70, true);
  add(1, 30, false);
}

TEST_CASE("pseudo-group propensities of the worked example") {
  std::vector<int> preds, labels;
  WorkedExample(preds, labels);
  const PropensityTable t = EstimatePropensityCcr(preds, labels, 2);
  CHECK(t.k_effective == 2);
  CHECK(t.group_sizes == std::vector<int>{90, 10, 70, 30});
  CHECK(t.p_hat[0] == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(t.p_hat[1] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(t.p_hat[2] == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(t.p_hat[3] == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(t.pseudo_group_of[0] == 0);
  CHECK(t.pseudo_group_of[95] == 1);
  CHECK(t.pseudo_group_of[199] == 3);
}

TEST_CASE("worked example raw and normalized weights") {
  std::vector<int> preds, labels;
  WorkedExample(preds, labels);
  const PropensityTable t = EstimatePropensityCcr(preds, labels, 2);
  const Vector raw = RawWeightsFromPropensity(t);
  CHECK(raw(0) == doctest::Approx(10.0 / 9.0).epsilon(1e-14));
  CHECK(raw(90) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(raw(100) == doctest::Approx(10.0 / 7.0).epsilon(1e-14));
  CHECK(raw(170) == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
  const WeightVector w = WeightsFromPropensity(t);
  CHECK(std::abs(w.weights(0) - 0.5556) < 5e-5);
  CHECK(std::abs(w.weights(90) - 5.0) < 5e-5);
  CHECK(std::abs(w.weights(100) - 0.7143) < 5e-5);
  CHECK(std::abs(w.weights(170) - 1.6667) < 5e-5);
  CHECK(std::abs(w.weights.mean() - 1.0) < 1e-12);
}

TEST_CASE("every pseudo-group carries raw weight n/2") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 500);
    const int c = 2 + static_cast<int>(rng() % 4);
    std::vector<int> preds(n), labels(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng() % c);
      preds[i] = rng() % 3 == 0 ? static_cast<int>(rng() % c) : labels[i];
    }
    const PropensityTable t = EstimatePropensityCcr(preds, labels, c);
    const Vector raw = RawWeightsFromPropensity(t);
    std::vector<double> sums(2 * c, 0.0);
    for (int i = 0; i < n; ++i) sums[t.pseudo_group_of[i]] += raw(i);
    for (int g = 0; g < 2 * c; ++g) {
      if (t.group_sizes[g] == 0) continue;
      CHECK(std::abs(sums[g] - n / 2.0) <= 1e-12 * n);
    }
  }
}

TEST_CASE("all-correct predictions give class-fraction propensities") {
  const std::vector<int> labels{0, 0, 0, 1};
  const PropensityTable t = EstimatePropensityCcr(labels, labels, 2);
  CHECK(t.p_hat == std::vector<double>{0.75, 0.0, 0.25, 0.0});
  CHECK(t.group_sizes[1] == 0);
  CHECK(t.group_sizes[3] == 0);
  const WeightVector w = WeightsFromPropensity(t);
  // Each surviving group carries half the total weight.
  CHECK(w.weights.head(3).sum() == doctest::Approx(2.0));
  CHECK(w.weights(3) == doctest::Approx(2.0));
}

TEST_CASE("single and equal-size pseudo-groups give unit weights") {
  const std::vector<int> same{1, 1, 1};
  CHECK(WeightsFromPropensity(EstimatePropensityCcr(same, same, 2))
            .weights.isApproxToConstant(1.0, 1e-15));
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<int> preds{0, 1, 1, 0};
  CHECK(WeightsFromPropensity(EstimatePropensityCcr(preds, labels, 2))
            .weights.isApproxToConstant(1.0, 1e-15));
}

TEST_CASE("propensity estimation checks its inputs") {
  CHECK_THROWS_AS(EstimatePropensityCcr({0, 1}, {0}, 2), Error);
  CHECK_THROWS_AS(EstimatePropensityCcr({0}, {3}, 2), Error);
  PropensityTable broken;
  broken.pseudo_group_of = {0};
  broken.group_sizes = {1, 0};
  broken.p_hat = {0.0, 0.0};
  CHECK_THROWS_AS(RawWeightsFromPropensity(broken), Error);
}

TEST_CASE("propensity floor bounds extreme weights") {
  std::vector<int> labels(1000, 0), preds(1000, 0);
  preds[0] = 1;
  const PropensityTable t = EstimatePropensityCcr(preds, labels, 2, 0.01);
  CHECK(t.p_hat[1] == 0.01);
}

TEST_CASE("jtt upweights errors") {
  const WeightVector w = WeightsJtt({0, 0, 1, 0}, {0, 0, 1, 1}, 2.0);
  CHECK(w.weights(0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w.weights(1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w.weights(2) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w.weights(3) == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(WeightsJtt({0, 1}, {1, 0}, 5.0).weights.isApproxToConstant(1.0));
  CHECK(WeightsJtt({0, 1}, {0, 0}, 1.0).weights.isApproxToConstant(1.0));
  CHECK_THROWS_AS(WeightsJtt({0}, {0}, 0.5), Error);
}

TEST_CASE("afr weights of the two-sample example") {
  Matrix p(2, 1);
  p << 0.9, 0.1;
  const WeightVector w = WeightsAfr(p, {0, 0}, 1.0);
  CHECK(w.weights(0) == doctest::Approx(0.6200510377447751).epsilon(1e-12));
  CHECK(w.weights(1) == doctest::Approx(1.3799489622552249).epsilon(1e-12));
}

TEST_CASE("afr is uniform at gamma zero and monotone in confidence") {
  Matrix p(4, 2);
  p << 0.9, 0.1, 0.6, 0.4, 0.2, 0.8, 0.5, 0.5;
  CHECK(WeightsAfr(p, {0, 0, 0, 1}, 0.0).weights.isApproxToConstant(1.0));
  const WeightVector w = WeightsAfr(p, {0, 0, 0, 0}, 3.0);
  CHECK(w.weights(0) <= w.weights(1));
  CHECK(w.weights(1) <= w.weights(2));
  CHECK_THROWS_AS(WeightsAfr(p, {0, 0, 0, 0}, -1.0), Error);
}

TEST_CASE("afr balances class mass to class size") {
  Matrix p(3, 2);
  p << 0.9, 0.1, 0.1, 0.9, 0.5, 0.5;
  const WeightVector w = WeightsAfr(p, {0, 0, 1}, 2.0);
  CHECK(w.weights.head(2).sum() == doctest::Approx(2.0));
  CHECK(w.weights(2) == doctest::Approx(1.0));
}

TEST_CASE("oracle weights invert observation probabilities") {
  Matrix obs(2, 2);
  obs << 0.9, 0.1, 0.1, 0.9;
  const WeightVector w = WeightsOracle({0, 1, 2, 3}, obs, 2);
  CHECK(w.normalization == WeightNormalization::kNone);
  CHECK(w.weights(0) == doctest::Approx(1.0 / 0.9).epsilon(1e-15));
  CHECK(w.weights(1) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(w.weights(2) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(w.weights(3) == doctest::Approx(1.0 / 0.9).epsilon(1e-15));
  CHECK(WeightsOracle({0, 3}, Matrix::Ones(2, 2), 2).weights.isOnes());
  Matrix half = Matrix::Constant(2, 2, 0.5);
  CHECK(WeightsOracle({2}, half, 2).weights(0) == 2.0);
  obs(1, 0) = 0.0;
  CHECK_THROWS_AS(WeightsOracle({2}, obs, 2), Error);
}

TEST_CASE("weights CSV roundtrips at full precision") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  Vector v(25);
  std::vector<int> groups(25);
  for (int i = 0; i < 25; ++i) {
    v(i) = u(rng);
    groups[i] = i % 4;
  }
  const WeightVector w{v, WeightNormalization::kNone};
  std::ostringstream text;
  WriteWeightsCsv(text, w, groups);
  CHECK(text.str().rfind("index,weight,pseudo_group\n0,", 0) == 0);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ccr_weights.csv").string();
  WriteWeightsCsv(path, w, groups);
  CHECK(ReadWeightsCsv(path).weights == v);
}

TEST_CASE("estimator names") {
  for (auto e : {WeightEstimator::kCcr, WeightEstimator::kJtt,
                 WeightEstimator::kAfr, WeightEstimator::kOracle,
                 WeightEstimator::kNone}) {
    CHECK(ParseWeightEstimator(ToString(e)) == e);
  }
  CHECK_THROWS_AS(ParseWeightEstimator("dro"), Error);
}

}  // namespace
}  // namespace ccr
