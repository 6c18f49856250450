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
#include <random>

#include "doctest.h"

#include "ccr/losses.hpp"
#include "ccr/model.hpp"
#include "ccr/pns.hpp"
#include "test_helpers.hpp"

namespace ccr {
namespace {

using testing::NumericGradient;
using testing::RandomMatrix;
using testing::RandomVector;
using testing::RelativeError;

std::vector<int> RandomLabels(int n, int c, std::mt19937_64& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng() % c);
  return y;
}

Vector PositiveWeights(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = u(rng);
  return w;
}

// Smallest distance of any raw bound to the clamp threshold.
double ClampMargin(const ClassifierHead& head, const FeatureMatrix& f,
                   const std::vector<int>& y, PnsVariant variant) {
  const Matrix p = HeadProbs(head, f);
  const CounterfactualProbs cf = ComputeCounterfactualProbs(head, f);
  double margin = 1.0;
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      const double raw = RawPnsBound(p(i, y[i]), cf(i, j, y[i]), variant);
      margin = std::min(margin, std::abs(raw - kDefaultPnsEpsilon));
    }
  }
  return margin;
}

TEST_CASE("cross-entropy of a zero head is log C") {
  ClassifierHead head{Matrix::Zero(3, 4), Vector::Zero(4)};
  const CeResult r = CrossEntropyLossGrad(head, Matrix::Ones(5, 3),
                                          {0, 1, 2, 3, 0}, Vector::Ones(5));
  CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("cross-entropy is linear in sample weights") {
  std::mt19937_64 rng(1);
  ClassifierHead head{RandomMatrix(3, 2, rng), RandomVector(2, rng)};
  const Matrix f = RandomMatrix(4, 3, rng);
  const std::vector<int> y{0, 1, 1, 0};
  Vector w = Vector::Ones(4);
  const double base = CrossEntropyLossGrad(head, f, y, w).loss;
  w(2) = 2.0;
  const double doubled = CrossEntropyLossGrad(head, f, y, w).loss;
  const double nll = -std::log(HeadProbs(head, f)(2, y[2]));
  CHECK(doubled - base == doctest::Approx(nll / 4.0).epsilon(1e-12));
}

TEST_CASE("cross-entropy rejects bad weights") {
  ClassifierHead head{Matrix::Zero(2, 2), Vector::Zero(2)};
  CHECK_THROWS_AS(
      CrossEntropyLossGrad(head, Matrix::Ones(2, 2), {0, 1}, Vector::Ones(3)),
      Error);
  Vector neg = Vector::Ones(2);
  neg(0) = -1.0;
  CHECK_THROWS_AS(CrossEntropyLossGrad(head, Matrix::Ones(2, 2), {0, 1}, neg),
                  Error);
}

TEST_CASE("cross-entropy gradients match finite differences") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int h = 1 + static_cast<int>(rng() % 6);
    const int c = 2 + static_cast<int>(rng() % 3);
    ClassifierHead head{RandomMatrix(h, c, rng), RandomVector(c, rng)};
    Matrix f = RandomMatrix(n, h, rng);
    const auto y = RandomLabels(n, c, rng);
    const Vector w = PositiveWeights(n, rng);
    const CeResult r = CrossEntropyLossGrad(head, f, y, w);
    auto loss = [&] { return CrossEntropyLossGrad(head, f, y, w).loss; };
    CHECK(RelativeError(r.grad_weights, NumericGradient(head.weights, loss)) < 1e-4);
    CHECK(RelativeError(r.grad_bias, NumericGradient(head.bias, loss)) < 1e-4);
    CHECK(RelativeError(r.grad_features, NumericGradient(f, loss)) < 1e-4);
  }
}

TEST_CASE("decov of two identical columns is one") {
  Matrix f(2, 2);
  f << 1, 1, -1, -1;
  CHECK(std::abs(DecovPenaltyGrad(f).penalty - 1.0) < 1e-12);
}

TEST_CASE("decov vanishes for orthogonal centered columns") {
  Matrix f(4, 2);
  f << 1, 1, 1, -1, -1, 1, -1, -1;
  CHECK(DecovPenaltyGrad(f).penalty < 1e-12);
  CHECK(DecovPenaltyGrad(f).grad_features.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decov of a single column is zero and needs two rows") {
  std::mt19937_64 rng(3);
  CHECK(DecovPenaltyGrad(RandomMatrix(6, 1, rng)).penalty == 0.0);
  CHECK_THROWS_AS(DecovPenaltyGrad(Matrix::Ones(1, 3)), Error);
}

TEST_CASE("decov is non-negative and its gradient matches finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int h = 1 + static_cast<int>(rng() % 6);
    Matrix f = RandomMatrix(n, h, rng);
    const DecovResult r = DecovPenaltyGrad(f);
    CHECK(r.penalty >= 0.0);
    auto loss = [&] { return DecovPenaltyGrad(f).penalty; };
    CHECK(RelativeError(r.grad_features, NumericGradient(f, loss)) < 1e-4);
  }
}

TEST_CASE("stage-2 loss with zero lambda is exactly cross-entropy") {
  std::mt19937_64 rng(5);
  ClassifierHead head{RandomMatrix(4, 3, rng), RandomVector(3, rng)};
  const Matrix f = RandomMatrix(6, 4, rng).cwiseAbs();
  const auto y = RandomLabels(6, 3, rng);
  const Vector w = Vector::Ones(6);
  const CeResult ce = CrossEntropyLossGrad(head, f, y, w);
  const Stage2LossResult s2 =
      Stage2LossGrad(head, f, y, w, 0.0, PnsVariant::kPaper);
  CHECK(s2.breakdown.total == ce.loss);
  CHECK(s2.breakdown.cross_entropy == ce.loss);
  CHECK(s2.grad_weights == ce.grad_weights);
  CHECK(s2.grad_bias == ce.grad_bias);
}

TEST_CASE("stage-2 penalty vanishes when every bound is one") {
  // A feature so strong that the prediction is certain with or without any
  // single feature: lb = p + p_cf − 1 rounds to 1.
  ClassifierHead head{Matrix(2, 2), Vector::Zero(2)};
  head.weights << 400, -400, 400, -400;
  Matrix f(1, 2);
  f << 1, 1;
  const Stage2LossResult r =
      Stage2LossGrad(head, f, {0}, Vector::Ones(1), 1.0, PnsVariant::kPaper);
  CHECK(r.breakdown.pns_penalty == 0.0);
}

TEST_CASE("stage-2 gradients match finite differences away from the clamp") {
  std::mt19937_64 rng(6);
  for (PnsVariant variant : {PnsVariant::kPaper, PnsVariant::kPearl}) {
    int checked = 0;
    while (checked < 20) {
      const int n = 2 + static_cast<int>(rng() % 7);
      const int h = 1 + static_cast<int>(rng() % 6);
      const int c = 2 + static_cast<int>(rng() % 3);
      ClassifierHead head{RandomMatrix(h, c, rng, 1.5), RandomVector(c, rng)};
      const Matrix f = RandomMatrix(n, h, rng).cwiseAbs();
      // Labels at the model's argmax keep paper-variant bounds positive.
      std::vector<int> y = ArgmaxRows(HeadProbs(head, f));
      if (variant == PnsVariant::kPearl) y = RandomLabels(n, c, rng);
      if (ClampMargin(head, f, y, variant) < 1e-3) continue;
      const Vector w = PositiveWeights(n, rng);
      const double lambda = 0.7;
      const Stage2LossResult r = Stage2LossGrad(head, f, y, w, lambda, variant);
      auto loss = [&] {
        return Stage2LossGrad(head, f, y, w, lambda, variant).breakdown.total;
      };
      CHECK(RelativeError(r.grad_weights, NumericGradient(head.weights, loss)) < 1e-4);
      CHECK(RelativeError(r.grad_bias, NumericGradient(head.bias, loss)) < 1e-4);
      ++checked;
    }
  }
}

TEST_CASE("stage-2 objective agrees with the breakdown total") {
  std::mt19937_64 rng(7);
  ClassifierHead head{RandomMatrix(3, 2, rng), RandomVector(2, rng)};
  const Matrix f = RandomMatrix(5, 3, rng).cwiseAbs();
  const auto y = RandomLabels(5, 2, rng);
  const Vector w = PositiveWeights(5, rng);
  const Stage2LossResult r = Stage2LossGrad(head, f, y, w, 2.0, PnsVariant::kPaper);
  const Matrix p = HeadProbs(head, f);
  Vector ce(5);
  for (int i = 0; i < 5; ++i) ce(i) = -std::log(p(i, y[i]));
  const PnsBounds b = PnsLowerBound(p, ComputeCounterfactualProbs(head, f), y,
                                    PnsVariant::kPaper);
  CHECK(Stage2Objective(ce, b, w, 2.0) ==
        doctest::Approx(r.breakdown.total).epsilon(1e-12));
}

TEST_CASE("stage-2 objective does not increase when a bound grows") {
  Vector ce = Vector::Constant(2, 0.3);
  PnsBounds b;
  b.lb = Matrix::Constant(2, 3, 0.4);
  const Vector w = Vector::Ones(2);
  double previous = Stage2Objective(ce, b, w, 1.5);
  for (double v : {0.5, 0.7, 0.9, 1.0}) {
    b.lb(1, 2) = v;
    const double now = Stage2Objective(ce, b, w, 1.5);
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("stage-2 rejects negative lambda") {
  ClassifierHead head{Matrix::Zero(2, 2), Vector::Zero(2)};
  CHECK_THROWS_AS(Stage2LossGrad(head, Matrix::Ones(2, 2), {0, 1},
                                 Vector::Ones(2), -1.0, PnsVariant::kPaper),
                  Error);
}

}  // namespace
}  // namespace ccr
