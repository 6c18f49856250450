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

// Affine encoder (frozen in stage 2) and the linear-softmax head, plus the
// single-feature occlusion counterfactuals that feed PNS estimation.

#include <string>
#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"

namespace ccr {

enum class Nonlinearity { kRelu, kIdentity };

std::string ToString(Nonlinearity nl);
Nonlinearity ParseNonlinearity(const std::string& name);

struct Encoder {
  Matrix weights;  // d×h
  Vector bias;     // h
  Nonlinearity nonlinearity = Nonlinearity::kRelu;

  int input_dim() const { return static_cast<int>(weights.rows()); }
  int feature_dim() const { return static_cast<int>(weights.cols()); }
};

// Pre-activations inputs·W + b.
Matrix EncodePreActivation(const Encoder& encoder, const Matrix& inputs);
FeatureMatrix Encode(const Encoder& encoder, const Matrix& inputs);

Matrix HeadLogits(const ClassifierHead& head, const FeatureMatrix& features);

// Row-wise softmax with max subtraction.
Matrix SoftmaxRows(const Matrix& logits);

// n×C class probabilities.
Matrix HeadProbs(const ClassifierHead& head, const FeatureMatrix& features);

// n×h×C probabilities where slice (i, j, ·) is the head's prediction for row
// i with feature j zeroed.
class CounterfactualProbs {
 public:
  CounterfactualProbs(int n, int h, int c)
      : n_(n), h_(h), c_(c), data_(static_cast<std::size_t>(n) * h * c) {}

  int samples() const { return n_; }
  int features() const { return h_; }
  int classes() const { return c_; }

  double& operator()(int i, int j, int c) { return data_[Index(i, j, c)]; }
  double operator()(int i, int j, int c) const { return data_[Index(i, j, c)]; }

 private:
  std::size_t Index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * h_ + j) * c_ + c;
  }

  int n_, h_, c_;
  std::vector<double> data_;
};

// Uses logits_cf = logits − f_ij·W_j,· rather than materializing h masked
// copies of every row.
CounterfactualProbs ComputeCounterfactualProbs(const ClassifierHead& head,
                                               const FeatureMatrix& features);

// Index of the largest entry per row; ties go to the lowest class id.
std::vector<int> ArgmaxRows(const Matrix& probs);

// {"encoder": {"w", "b", "nonlinearity"}, "head": {"w", "b"}}. Doubles
// round-trip exactly.
nlohmann::json ModelToJson(const Encoder& encoder, const ClassifierHead& head);
void ModelFromJson(const nlohmann::json& j, Encoder& encoder,
                   ClassifierHead& head);

nlohmann::json MatrixToJson(const Matrix& m);
Matrix MatrixFromJson(const nlohmann::json& j);
nlohmann::json VectorToJson(const Vector& v);
Vector VectorFromJson(const nlohmann::json& j);

}  // namespace ccr
