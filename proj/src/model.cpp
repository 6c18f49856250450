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

#include "ccr/model.hpp"

#include <algorithm>
#include <cmath>

namespace ccr {
namespace {

void CheckHeadWidth(const ClassifierHead& head, const FeatureMatrix& f) {
  Require(head.weights.rows() == f.cols(),
          "feature width " + std::to_string(f.cols()) +
              " does not match head input width " +
              std::to_string(head.weights.rows()));
  Require(head.bias.size() == head.weights.cols(),
          "head bias length does not match class count");
}

}  // namespace

std::string ToString(Nonlinearity nl) {
  return nl == Nonlinearity::kRelu ? "relu" : "identity";
}

Nonlinearity ParseNonlinearity(const std::string& name) {
  if (name == "relu") return Nonlinearity::kRelu;
  if (name == "identity") return Nonlinearity::kIdentity;
  Fail(ErrorKind::kInvalidArgument, "unknown nonlinearity '" + name + "'");
}

Matrix EncodePreActivation(const Encoder& encoder, const Matrix& inputs) {
  Require(inputs.cols() == encoder.weights.rows(),
          "input width " + std::to_string(inputs.cols()) +
              " does not match encoder input width " +
              std::to_string(encoder.weights.rows()));
  Require(encoder.bias.size() == encoder.weights.cols(),
          "encoder bias length does not match feature width");
  Matrix pre = inputs * encoder.weights;
  pre.rowwise() += encoder.bias.transpose();
  return pre;
}

FeatureMatrix Encode(const Encoder& encoder, const Matrix& inputs) {
  Matrix pre = EncodePreActivation(encoder, inputs);
  if (encoder.nonlinearity == Nonlinearity::kRelu) {
    pre = pre.cwiseMax(0.0);
  }
  return pre;
}

Matrix HeadLogits(const ClassifierHead& head, const FeatureMatrix& features) {
  CheckHeadWidth(head, features);
  Matrix logits = features * head.weights;
  logits.rowwise() += head.bias.transpose();
  return logits;
}

Matrix SoftmaxRows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(i, c) = std::exp(logits(i, c) - m);
      z += out(i, c);
    }
    out.row(i) /= z;
  }
  return out;
}

Matrix HeadProbs(const ClassifierHead& head, const FeatureMatrix& features) {
  return SoftmaxRows(HeadLogits(head, features));
}

CounterfactualProbs ComputeCounterfactualProbs(const ClassifierHead& head,
                                               const FeatureMatrix& features) {
  const Matrix logits = HeadLogits(head, features);
  const int n = static_cast<int>(features.rows());
  const int h = static_cast<int>(features.cols());
  const int C = head.class_count();
  CounterfactualProbs out(n, h, C);
  std::vector<double> z(C);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < h; ++j) {
      const double f = features(i, j);
      double m = -INFINITY;
      for (int c = 0; c < C; ++c) {
        z[c] = logits(i, c) - f * head.weights(j, c);
        m = std::max(m, z[c]);
      }
      double total = 0.0;
      for (int c = 0; c < C; ++c) {
        z[c] = std::exp(z[c] - m);
        total += z[c];
      }
      for (int c = 0; c < C; ++c) out(i, j, c) = z[c] / total;
    }
  }
  return out;
}

std::vector<int> ArgmaxRows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = static_cast<int>(c);
    }
    out[i] = best;
  }
  return out;
}

nlohmann::json MatrixToJson(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix MatrixFromJson(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const std::size_t cols = rows.empty() ? 0 : rows[0].size();
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Require(rows[r].size() == cols, "ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

nlohmann::json VectorToJson(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector VectorFromJson(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(),
                                  static_cast<Eigen::Index>(values.size()));
}

nlohmann::json ModelToJson(const Encoder& encoder, const ClassifierHead& head) {
  return {
      {"encoder",
       {{"w", MatrixToJson(encoder.weights)},
        {"b", VectorToJson(encoder.bias)},
        {"nonlinearity", ToString(encoder.nonlinearity)}}},
      {"head",
       {{"w", MatrixToJson(head.weights)}, {"b", VectorToJson(head.bias)}}},
  };
}

void ModelFromJson(const nlohmann::json& j, Encoder& encoder,
                   ClassifierHead& head) {
  try {
    const auto& e = j.at("encoder");
    encoder.weights = MatrixFromJson(e.at("w"));
    encoder.bias = VectorFromJson(e.at("b"));
    encoder.nonlinearity =
        ParseNonlinearity(e.value("nonlinearity", std::string("relu")));
    const auto& hd = j.at("head");
    head.weights = MatrixFromJson(hd.at("w"));
    head.bias = VectorFromJson(hd.at("b"));
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorKind::kInvalidArgument,
         std::string("bad model JSON: ") + ex.what());
  }
  Require(encoder.bias.size() == encoder.weights.cols(),
          "encoder bias length does not match feature width");
  Require(head.weights.rows() == encoder.weights.cols(),
          "head input width does not match encoder feature width");
  Require(head.bias.size() == head.weights.cols(),
          "head bias length does not match class count");
  Require(encoder.weights.allFinite() && encoder.bias.allFinite() &&
              head.weights.allFinite() && head.bias.allFinite(),
          "model parameters must be finite");
}

}  // namespace ccr
