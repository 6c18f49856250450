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

#include "ccr/losses.hpp"

#include <cmath>

#include "ccr/model.hpp"

namespace ccr {
namespace {

void CheckWeights(const Vector& w, Eigen::Index n) {
  Require(w.size() == n, "sample weight length " + std::to_string(w.size()) +
                             " does not match batch size " +
                             std::to_string(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Require(w[i] >= 0.0, "sample weights must be non-negative");
  }
}

void CheckLabels(const std::vector<int>& labels, Eigen::Index n, int C) {
  Require(static_cast<Eigen::Index>(labels.size()) == n,
          "label count does not match feature rows");
  for (int y : labels) Require(y >= 0 && y < C, "label outside [0, C)");
}

// −log softmax(z)_y via log-sum-exp.
double NegLogProb(const Matrix& logits, Eigen::Index i, int y) {
  const double m = logits.row(i).maxCoeff();
  double s = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    s += std::exp(logits(i, c) - m);
  }
  return m + std::log(s) - logits(i, y);
}

}  // namespace

nlohmann::json ToJson(const LossBreakdown& b) {
  return {{"total", b.total},       {"ce", b.cross_entropy},
          {"decov", b.decov},       {"pns_penalty", b.pns_penalty},
          {"beta", b.beta},         {"lambda", b.lambda}};
}

CeResult CrossEntropyLossGrad(const ClassifierHead& head,
                              const FeatureMatrix& features,
                              const std::vector<int>& labels,
                              const Vector& sample_weights) {
  const Eigen::Index n = features.rows();
  Require(n >= 1, "empty batch");
  CheckWeights(sample_weights, n);
  CheckLabels(labels, n, head.class_count());

  const Matrix logits = HeadLogits(head, features);
  Matrix grad_logits = SoftmaxRows(logits);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    loss += sample_weights[i] * NegLogProb(logits, i, y);
    grad_logits(i, y) -= 1.0;
    grad_logits.row(i) *= sample_weights[i] * inv_n;
  }

  CeResult out;
  out.loss = loss * inv_n;
  out.grad_weights = features.transpose() * grad_logits;
  out.grad_bias = grad_logits.colwise().sum().transpose();
  out.grad_features = grad_logits * head.weights.transpose();
  return out;
}

DecovResult DecovPenaltyGrad(const FeatureMatrix& features) {
  const Eigen::Index n = features.rows();
  Require(n >= 2, "DeCov needs at least two samples");
  const Vector mean = features.colwise().mean().transpose();
  Matrix centered = features;
  centered.rowwise() -= mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  Matrix off = cov;
  off.diagonal().setZero();

  DecovResult out;
  out.penalty = 0.5 * off.squaredNorm();
  // d/dF̄ = (2/n)·F̄·offdiag(Cov); centering is a projection whose adjoint
  // removes the column mean of the incoming gradient.
  Matrix g = centered * off * (2.0 / static_cast<double>(n));
  const Vector g_mean = g.colwise().mean().transpose();
  g.rowwise() -= g_mean.transpose();
  out.grad_features = std::move(g);
  return out;
}

Stage2LossResult Stage2LossGrad(const ClassifierHead& head,
                            const FeatureMatrix& features,
                            const std::vector<int>& labels,
                            const Vector& sample_weights, double lambda,
                            PnsVariant variant, double epsilon) {
  Require(lambda >= 0.0, "lambda must be non-negative");
  const CeResult ce =
      CrossEntropyLossGrad(head, features, labels, sample_weights);

  const int n = static_cast<int>(features.rows());
  const int h = static_cast<int>(features.cols());
  const int C = head.class_count();
  const Matrix probs = HeadProbs(head, features);
  const CounterfactualProbs cf = ComputeCounterfactualProbs(head, features);
  const PnsBounds bounds = PnsLowerBound(probs, cf, labels, variant, epsilon);
  const PnsPenalty penalty = ComputePnsPenalty(bounds);

  Stage2LossResult out;
  out.breakdown.cross_entropy = ce.loss;
  out.breakdown.pns_penalty = penalty.total;
  out.breakdown.lambda = lambda;
  out.grad_weights = ce.grad_weights;
  out.grad_bias = ce.grad_bias;
  if (lambda == 0.0) {
    out.breakdown.total = ce.loss;
    return out;
  }

  double weighted_penalty = 0.0;
  for (int i = 0; i < n; ++i) {
    weighted_penalty += sample_weights[i] * penalty.per_sample[i];
  }
  out.breakdown.total =
      ce.loss + lambda * weighted_penalty / static_cast<double>(n);

  const double sign = variant == PnsVariant::kPaper ? 1.0 : -1.0;
  Vector g_orig(C), g_cf(C), g_cf_sum(C);
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    const double scale = lambda * sample_weights[i] /
                         (static_cast<double>(n) * static_cast<double>(h));
    if (scale == 0.0) continue;
    const double p_y = probs(i, y);
    double coef_orig = 0.0;
    g_cf_sum.setZero();
    for (int j = 0; j < h; ++j) {
      const double pcf_y = cf(i, j, y);
      const double raw = RawPnsBound(p_y, pcf_y, variant);
      if (!(raw > epsilon)) continue;
      const double inv = 1.0 / raw;
      coef_orig += inv;
      // ∂(−scale·log lb)/∂z_cf = −scale·sign·inv·p_cf(y)·(e_y − p_cf).
      const double k = -scale * sign * inv * pcf_y;
      for (int c = 0; c < C; ++c) {
        g_cf[c] = k * ((c == y ? 1.0 : 0.0) - cf(i, j, c));
      }
      g_cf_sum += g_cf;
      // The occluded feature does not reach the counterfactual logits.
      out.grad_weights.row(j) -= features(i, j) * g_cf.transpose();
    }
    const double k = -scale * coef_orig * p_y;
    for (int c = 0; c < C; ++c) {
      g_orig[c] = k * ((c == y ? 1.0 : 0.0) - probs(i, c));
    }
    const Vector g_total = g_orig + g_cf_sum;
    out.grad_weights += features.row(i).transpose() * g_total.transpose();
    out.grad_bias += g_total;
  }
  return out;
}

double Stage2Objective(const Vector& per_sample_ce, const PnsBounds& bounds,
                       const Vector& sample_weights, double lambda) {
  const Eigen::Index n = per_sample_ce.size();
  Require(bounds.lb.rows() == n && sample_weights.size() == n,
          "stage-2 objective inputs have inconsistent lengths");
  const PnsPenalty penalty = ComputePnsPenalty(bounds);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += sample_weights[i] * (per_sample_ce[i] + lambda * penalty.per_sample[i]);
  }
  return total / static_cast<double>(n);
}

}  // namespace ccr
