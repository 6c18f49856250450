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

#include "ccr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ccr {
namespace {

void FillUniform(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
}

void FillUniform(Vector& v, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
}

Matrix GatherRows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = m.row(rows[r]);
  return out;
}

template <typename T>
std::vector<T> Gather(const std::vector<T>& v, const std::vector<int>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (int i : rows) out.push_back(v[i]);
  return out;
}

Vector Gather(const Vector& v, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = v[rows[r]];
  return out;
}

double Accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += preds[i] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void CheckFinite(double loss, const char* stage, int epoch) {
  if (!std::isfinite(loss)) {
    Fail(ErrorKind::kNumerical, std::string(stage) +
                                    " diverged: non-finite loss in epoch " +
                                    std::to_string(epoch));
  }
}

EpochRecord Stage1EpochRecord(const Encoder& encoder,
                              const ClassifierHead& head,
                              const LabeledDataset& data, double beta,
                              int epoch) {
  const FeatureMatrix f = Encode(encoder, data.features_raw);
  const CeResult ce =
      CrossEntropyLossGrad(head, f, data.labels, Vector::Ones(data.size()));
  EpochRecord r;
  r.epoch = epoch;
  r.loss.cross_entropy = ce.loss;
  r.loss.decov = data.size() >= 2 ? DecovPenaltyGrad(f).penalty : 0.0;
  r.loss.beta = beta;
  r.loss.total = ce.loss + beta * r.loss.decov;
  r.train_accuracy = Accuracy(ArgmaxRows(HeadProbs(head, f)), data.labels);
  return r;
}

}  // namespace

void TrainConfig::Validate() const {
  Require(learning_rate > 0.0, "learning_rate must be > 0");
  Require(weight_decay >= 0.0, "weight_decay must be >= 0");
  Require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  Require(batch_size >= 2, "batch_size must be >= 2");
  Require(epochs >= 1, "epochs must be >= 1");
  Require(beta >= 0.0, "beta must be >= 0");
  Require(lambda >= 0.0, "lambda must be >= 0");
  Require(pns_epsilon > 0.0 && pns_epsilon <= 0.1,
          "pns_epsilon must lie in (0, 0.1]");
  Require(jtt_upweight >= 1.0, "jtt_upweight must be >= 1");
  Require(afr_gamma >= 0.0, "afr_gamma must be >= 0");
  Require(feature_dim >= 1, "feature_dim must be >= 1");
  Require(encoder_init_scale > 0.0, "encoder_init_scale must be > 0");
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                const TrainConfig& defaults) {
  TrainConfig c = defaults;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.beta = j.value("beta", c.beta);
    c.lambda = j.value("lambda", c.lambda);
    c.pns_variant = ParsePnsVariant(
        j.value("pns_variant", ToString(c.pns_variant)));
    c.pns_epsilon = j.value("pns_epsilon", c.pns_epsilon);
    c.ipw_estimator = ParseWeightEstimator(
        j.value("ipw_estimator", ToString(c.ipw_estimator)));
    c.jtt_upweight = j.value("jtt_upweight", c.jtt_upweight);
    c.afr_gamma = j.value("afr_gamma", c.afr_gamma);
    c.warm_start_head = j.value("warm_start_head", c.warm_start_head);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.encoder_init_scale =
        j.value("encoder_init_scale", c.encoder_init_scale);
    c.nonlinearity = ParseNonlinearity(
        j.value("nonlinearity", ToString(c.nonlinearity)));
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument,
         std::string("bad train config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::json ToJson(const TrainConfig& c) {
  return {
      {"learning_rate", c.learning_rate},
      {"weight_decay", c.weight_decay},
      {"momentum", c.momentum},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"beta", c.beta},
      {"lambda", c.lambda},
      {"pns_variant", ToString(c.pns_variant)},
      {"pns_epsilon", c.pns_epsilon},
      {"ipw_estimator", ToString(c.ipw_estimator)},
      {"jtt_upweight", c.jtt_upweight},
      {"afr_gamma", c.afr_gamma},
      {"warm_start_head", c.warm_start_head},
      {"feature_dim", c.feature_dim},
      {"encoder_init_scale", c.encoder_init_scale},
      {"nonlinearity", ToString(c.nonlinearity)},
      {"seed", c.seed},
  };
}

nlohmann::json ToJson(const TrainHistory& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : history.epochs) {
    out.push_back({{"epoch", r.epoch},
                   {"total", r.loss.total},
                   {"ce", r.loss.cross_entropy},
                   {"decov", r.loss.decov},
                   {"pns_penalty", r.loss.pns_penalty},
                   {"train_acc", r.train_accuracy}});
  }
  return out;
}

Encoder InitEncoder(int input_dim, int feature_dim, Nonlinearity nl,
                    Rng& rng, double scale) {
  Require(input_dim >= 1 && feature_dim >= 1, "encoder dims must be >= 1");
  Require(scale > 0.0, "encoder init scale must be > 0");
  Encoder e;
  e.nonlinearity = nl;
  e.weights.resize(input_dim, feature_dim);
  e.bias.resize(feature_dim);
  const double bound = scale / std::sqrt(static_cast<double>(input_dim));
  FillUniform(e.weights, bound, rng);
  FillUniform(e.bias, bound, rng);
  return e;
}

ClassifierHead InitHead(int feature_dim, int class_count, Rng& rng) {
  Require(feature_dim >= 1 && class_count >= 1, "head dims must be >= 1");
  ClassifierHead h;
  h.weights.resize(feature_dim, class_count);
  h.bias.resize(class_count);
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  FillUniform(h.weights, bound, rng);
  FillUniform(h.bias, bound, rng);
  return h;
}

std::vector<std::vector<int>> EpochBatches(int n, int batch_size, Rng& rng) {
  Require(n >= 1 && batch_size >= 1, "invalid batching parameters");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    if (end - start < 2 && !batches.empty()) {
      batches.back().insert(batches.back().end(), perm.begin() + start,
                            perm.begin() + end);
    } else {
      batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
  }
  return batches;
}

Stage1Result TrainStage1(const LabeledDataset& dataset, int feature_dim,
                         const TrainConfig& config) {
  config.Validate();
  dataset.Validate();
  Require(dataset.size() >= config.batch_size,
          "dataset smaller than one batch");
  const RngSeed seed{config.seed};
  Rng init_rng = MakeRng(seed, kStage1InitStream);
  Rng shuffle_rng = MakeRng(seed, kStage1ShuffleStream);

  Stage1Result out;
  out.encoder = InitEncoder(dataset.input_dim(), feature_dim,
                            config.nonlinearity, init_rng,
                            config.encoder_init_scale);
  out.head = InitHead(feature_dim, dataset.class_count, init_rng);
  Encoder& enc = out.encoder;
  ClassifierHead& head = out.head;

  const MomentumSgd sgd(config.learning_rate, config.momentum,
                        config.weight_decay);
  Matrix v_enc_w, v_head_w;
  Vector v_enc_b, v_head_b;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& batch :
         EpochBatches(dataset.size(), config.batch_size, shuffle_rng)) {
      const Matrix x = GatherRows(dataset.features_raw, batch);
      const std::vector<int> y = Gather(dataset.labels, batch);
      const Matrix pre = EncodePreActivation(enc, x);
      const FeatureMatrix f = enc.nonlinearity == Nonlinearity::kRelu
                                  ? Matrix(pre.cwiseMax(0.0))
                                  : pre;

      const CeResult ce =
          CrossEntropyLossGrad(head, f, y, Vector::Ones(f.rows()));
      Matrix grad_f = ce.grad_features;
      double loss = ce.loss;
      if (config.beta > 0.0) {
        const DecovResult dc = DecovPenaltyGrad(f);
        grad_f += config.beta * dc.grad_features;
        loss += config.beta * dc.penalty;
      }
      CheckFinite(loss, "stage 1", epoch);

      if (enc.nonlinearity == Nonlinearity::kRelu) {
        grad_f = grad_f.cwiseProduct(
            (pre.array() > 0.0).cast<double>().matrix());
      }
      const Matrix grad_enc_w = x.transpose() * grad_f;
      const Vector grad_enc_b = grad_f.colwise().sum().transpose();

      sgd.Step(head.weights, ce.grad_weights, v_head_w, true);
      sgd.Step(head.bias, ce.grad_bias, v_head_b, false);
      sgd.Step(enc.weights, grad_enc_w, v_enc_w, true);
      sgd.Step(enc.bias, grad_enc_b, v_enc_b, false);
    }
    EpochRecord rec =
        Stage1EpochRecord(enc, head, dataset, config.beta, epoch);
    CheckFinite(rec.loss.total, "stage 1", epoch);
    out.history.epochs.push_back(rec);
  }
  return out;
}

Stage1Evaluation EvaluateStage1(const Encoder& encoder,
                                const ClassifierHead& head,
                                const LabeledDataset& dataset) {
  Stage1Evaluation out;
  out.probs = HeadProbs(head, Encode(encoder, dataset.features_raw));
  out.preds = ArgmaxRows(out.probs);
  out.correct_per_class.assign(dataset.class_count, 0);
  out.incorrect_per_class.assign(dataset.class_count, 0);
  for (int i = 0; i < dataset.size(); ++i) {
    const int y = dataset.labels[i];
    if (out.preds[i] == y) {
      ++out.correct_per_class[y];
    } else {
      ++out.incorrect_per_class[y];
    }
  }
  return out;
}

Stage2Output TrainStage2(const Encoder& encoder,
                         const ClassifierHead& head_init,
                         const LabeledDataset& dataset,
                         const WeightVector& weights,
                         const TrainConfig& config) {
  config.Validate();
  dataset.Validate();
  Require(weights.size() == dataset.size(),
          "weight vector length " + std::to_string(weights.size()) +
              " does not match dataset size " +
              std::to_string(dataset.size()));
  Require(head_init.class_count() == dataset.class_count,
          "head class count does not match dataset");
  const RngSeed seed{config.seed};
  Rng shuffle_rng = MakeRng(seed, kStage2ShuffleStream);

  // Frozen encoder: features are computed once.
  const FeatureMatrix features = Encode(encoder, dataset.features_raw);
  Require(features.cols() == head_init.feature_dim(),
          "head input width does not match encoder output");

  Stage2Output out;
  if (config.warm_start_head) {
    out.head = head_init;
  } else {
    Rng init_rng = MakeRng(seed, kStage2InitStream);
    out.head =
        InitHead(head_init.feature_dim(), head_init.class_count(), init_rng);
  }
  ClassifierHead& head = out.head;

  const MomentumSgd sgd(config.learning_rate, config.momentum,
                        config.weight_decay);
  Matrix v_w;
  Vector v_b;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& batch :
         EpochBatches(dataset.size(), config.batch_size, shuffle_rng)) {
      const Matrix f = GatherRows(features, batch);
      const Stage2LossResult r = Stage2LossGrad(
          head, f, Gather(dataset.labels, batch),
          Gather(weights.weights, batch), config.lambda, config.pns_variant,
          config.pns_epsilon);
      CheckFinite(r.breakdown.total, "stage 2", epoch);
      sgd.Step(head.weights, r.grad_weights, v_w, true);
      sgd.Step(head.bias, r.grad_bias, v_b, false);
    }
    const Stage2LossResult full = Stage2LossGrad(
        head, features, dataset.labels, weights.weights, config.lambda,
        config.pns_variant, config.pns_epsilon);
    CheckFinite(full.breakdown.total, "stage 2", epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = full.breakdown;
    rec.train_accuracy =
        Accuracy(ArgmaxRows(HeadProbs(head, features)), dataset.labels);
    out.history.epochs.push_back(rec);
  }
  return out;
}

}  // namespace ccr
