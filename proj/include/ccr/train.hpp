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

// Two-stage training.
//
// Stage 1 fits encoder and head on mean cross-entropy + β·DeCov.
// Stage 2 freezes the encoder and refits the head on the IPW-weighted
// cross-entropy plus λ times the PNS penalty.
//
// Both stages use mini-batch gradient descent with heavy-ball momentum and
// decoupled weight decay (on weight matrices only, not biases):
//   v ← μ·v + g;   θ ← θ − lr·wd·θ − lr·v

#include <vector>

#include "json.hpp"

#include "ccr/core.hpp"
#include "ccr/ipw.hpp"
#include "ccr/losses.hpp"
#include "ccr/model.hpp"
#include "ccr/pns.hpp"

namespace ccr {

// RNG streams derived from the run seed.
inline constexpr std::uint64_t kStage1InitStream = 10;
inline constexpr std::uint64_t kStage1ShuffleStream = 11;
inline constexpr std::uint64_t kStage2InitStream = 20;
inline constexpr std::uint64_t kStage2ShuffleStream = 21;

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 10;
  double beta = 0.0;
  double lambda = 0.0;
  PnsVariant pns_variant = PnsVariant::kPaper;
  double pns_epsilon = kDefaultPnsEpsilon;
  WeightEstimator ipw_estimator = WeightEstimator::kNone;
  double jtt_upweight = 6.0;
  double afr_gamma = 4.0;
  bool warm_start_head = true;
  int feature_dim = 16;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;
  // Multiplies the encoder's initial weight and bias range.
  double encoder_init_scale = 1.0;
  std::uint64_t seed = 42;

  void Validate() const;
};

TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                const TrainConfig& defaults = {});
nlohmann::json ToJson(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  double train_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

nlohmann::json ToJson(const TrainHistory& history);

// Uniform in [−s/√fan_in, s/√fan_in] for weights and biases (s = 1 for the
// head).
Encoder InitEncoder(int input_dim, int feature_dim, Nonlinearity nl, Rng& rng,
                    double scale = 1.0);
ClassifierHead InitHead(int feature_dim, int class_count, Rng& rng);

// A seeded permutation of [0, n) cut into batches of batch_size. A trailing
// batch smaller than 2 is merged into the previous one.
std::vector<std::vector<int>> EpochBatches(int n, int batch_size, Rng& rng);

class MomentumSgd {
 public:
  MomentumSgd(double learning_rate, double momentum, double weight_decay)
      : lr_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {}

  template <typename Param>
  void Step(Param& param, const Param& grad, Param& velocity,
            bool decay) const {
    if (velocity.size() != param.size()) {
      velocity = Param::Zero(param.rows(), param.cols());
    }
    velocity = momentum_ * velocity + grad;
    if (decay && weight_decay_ != 0.0) param -= lr_ * weight_decay_ * param;
    param -= lr_ * velocity;
  }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
};

struct Stage1Result {
  Encoder encoder;
  ClassifierHead head;
  TrainHistory history;
};

Stage1Result TrainStage1(const LabeledDataset& dataset, int feature_dim,
                         const TrainConfig& config);

struct Stage1Evaluation {
  std::vector<int> preds;
  Matrix probs;                       // n×C
  std::vector<int> correct_per_class;
  std::vector<int> incorrect_per_class;
};

Stage1Evaluation EvaluateStage1(const Encoder& encoder,
                                const ClassifierHead& head,
                                const LabeledDataset& dataset);

struct Stage2Output {
  ClassifierHead head;
  TrainHistory history;
};

// Refits the head over Encode(encoder, inputs); the encoder is read-only.
Stage2Output TrainStage2(const Encoder& encoder,
                          const ClassifierHead& head_init,
                          const LabeledDataset& dataset,
                          const WeightVector& weights,
                          const TrainConfig& config);

}  // namespace ccr
