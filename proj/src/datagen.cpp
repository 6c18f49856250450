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

#include "ccr/datagen.hpp"

#include <random>

namespace ccr {
namespace {

constexpr std::uint64_t kIdealStream = 1;
constexpr std::uint64_t kObserveStream = 2;

}  // namespace

void SyntheticConfig::Validate() const {
  Require(class_count >= 2, "class_count must be >= 2");
  Require(spurious_value_count >= 2, "spurious_value_count must be >= 2");
  Require(static_cast<int>(samples_per_class.size()) == class_count,
          "samples_per_class must have one entry per class");
  for (int n : samples_per_class) {
    Require(n >= 1, "samples_per_class entries must be >= 1");
  }
  Require(causal_dim >= 1 && spurious_dim >= 1, "block dims must be >= 1");
  Require(causal_mean_scale > 0 && causal_noise > 0 &&
              spurious_mean_scale > 0 && spurious_noise > 0,
          "mean scales and noise levels must be > 0");
  Require(observation_probs.rows() == class_count &&
              observation_probs.cols() == spurious_value_count,
          "observation_probs must be C×K");
  for (Eigen::Index j = 0; j < observation_probs.rows(); ++j) {
    for (Eigen::Index k = 0; k < observation_probs.cols(); ++k) {
      const double p = observation_probs(j, k);
      Require(p > 0.0 && p <= 1.0,
              "observation probabilities must lie in (0, 1]");
    }
  }
}

SyntheticConfig SyntheticConfig::BenchV1() {
  SyntheticConfig c;
  c.observation_probs.resize(2, 2);
  c.observation_probs << 0.95, 0.05, 0.05, 0.95;
  return c;
}

SyntheticConfig SyntheticConfigFromJson(const nlohmann::json& j) {
  SyntheticConfig c = SyntheticConfig::BenchV1();
  try {
    c.class_count = j.value("class_count", c.class_count);
    c.spurious_value_count =
        j.value("spurious_value_count", c.spurious_value_count);
    if (j.contains("samples_per_class")) {
      const auto& s = j.at("samples_per_class");
      if (s.is_array()) {
        c.samples_per_class = s.get<std::vector<int>>();
      } else {
        c.samples_per_class.assign(c.class_count, s.get<int>());
      }
    } else {
      c.samples_per_class.assign(c.class_count, c.samples_per_class.front());
    }
    c.causal_dim = j.value("causal_dim", c.causal_dim);
    c.spurious_dim = j.value("spurious_dim", c.spurious_dim);
    c.causal_mean_scale = j.value("causal_mean_scale", c.causal_mean_scale);
    c.causal_noise = j.value("causal_noise", c.causal_noise);
    c.spurious_mean_scale =
        j.value("spurious_mean_scale", c.spurious_mean_scale);
    c.spurious_noise = j.value("spurious_noise", c.spurious_noise);
    if (j.contains("observation_probs")) {
      const auto rows =
          j.at("observation_probs").get<std::vector<std::vector<double>>>();
      c.observation_probs.resize(static_cast<Eigen::Index>(rows.size()),
                                 rows.empty() ? 0 : rows[0].size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Require(rows[r].size() == rows[0].size(),
                "observation_probs rows must have equal length");
        for (std::size_t k = 0; k < rows[r].size(); ++k) {
          c.observation_probs(r, k) = rows[r][k];
        }
      }
    } else if (c.class_count != 2 || c.spurious_value_count != 2) {
      Fail(ErrorKind::kInvalidArgument,
           "observation_probs is required unless C = K = 2");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument,
         std::string("bad synthetic config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::json ToJson(const SyntheticConfig& config) {
  std::vector<std::vector<double>> probs(config.observation_probs.rows());
  for (Eigen::Index j = 0; j < config.observation_probs.rows(); ++j) {
    for (Eigen::Index k = 0; k < config.observation_probs.cols(); ++k) {
      probs[j].push_back(config.observation_probs(j, k));
    }
  }
  return {
      {"class_count", config.class_count},
      {"spurious_value_count", config.spurious_value_count},
      {"samples_per_class", config.samples_per_class},
      {"causal_dim", config.causal_dim},
      {"spurious_dim", config.spurious_dim},
      {"causal_mean_scale", config.causal_mean_scale},
      {"causal_noise", config.causal_noise},
      {"spurious_mean_scale", config.spurious_mean_scale},
      {"spurious_noise", config.spurious_noise},
      {"observation_probs", probs},
  };
}

Vector LevelMeanPattern(int level, int level_count, int dim) {
  Vector s(dim);
  for (int t = 0; t < dim; ++t) {
    if (level_count == 2) {
      s[t] = level == 0 ? -1.0 : 1.0;
    } else {
      s[t] = (t % level_count) == level ? 1.0 : -1.0;
    }
  }
  return s;
}

LabeledDataset GenerateIdeal(const SyntheticConfig& config, RngSeed seed) {
  config.Validate();
  const int C = config.class_count;
  const int K = config.spurious_value_count;
  int n = 0;
  for (int nj : config.samples_per_class) n += nj;

  LabeledDataset out;
  out.class_count = C;
  out.spurious_value_count = K;
  out.causal_dim = config.causal_dim;
  out.spurious_dim = config.spurious_dim;
  out.features_raw.resize(n, config.causal_dim + config.spurious_dim);
  out.labels.reserve(n);
  out.group_ids.emplace().reserve(n);

  Rng rng = MakeRng(seed, kIdealStream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int row = 0;
  for (int j = 0; j < C; ++j) {
    const Vector causal_mean = config.causal_mean_scale *
                               LevelMeanPattern(j, C, config.causal_dim);
    for (int t = 0; t < config.samples_per_class[j]; ++t, ++row) {
      // Round-robin assignment keeps per-(j, k) counts within one of each
      // other.
      const int k = t % K;
      const Vector spurious_mean =
          config.spurious_mean_scale *
          LevelMeanPattern(k, K, config.spurious_dim);
      for (int c = 0; c < config.causal_dim; ++c) {
        out.features_raw(row, c) =
            causal_mean[c] + config.causal_noise * gauss(rng);
      }
      for (int s = 0; s < config.spurious_dim; ++s) {
        out.features_raw(row, config.causal_dim + s) =
            spurious_mean[s] + config.spurious_noise * gauss(rng);
      }
      out.labels.push_back(j);
      out.group_ids->push_back(j * K + k);
    }
  }
  return out;
}

ObservedSample SubsampleObserve(const LabeledDataset& ideal,
                                const SyntheticConfig& config, RngSeed seed) {
  Require(ideal.group_ids.has_value(),
          "subsample_observe requires true group ids");
  Require(config.observation_probs.rows() == ideal.class_count &&
              config.observation_probs.cols() == ideal.spurious_value_count,
          "observation_probs shape does not match (C, K) of the dataset");
  const int K = ideal.spurious_value_count;
  Rng rng = MakeRng(seed, kObserveStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ObservedSample out;
  out.mask.observed.resize(ideal.size());
  std::vector<int> kept;
  for (int i = 0; i < ideal.size(); ++i) {
    const int g = (*ideal.group_ids)[i];
    const double p = config.observation_probs(g / K, g % K);
    // Draw unconditionally so the stream position depends only on i.
    const bool keep = unit(rng) < p;
    out.mask.observed[i] = keep;
    if (keep) kept.push_back(i);
  }
  if (kept.empty()) {
    Fail(ErrorKind::kInvalidArgument,
         "observation dropped every sample; observed dataset is empty");
  }
  out.observed = ideal.Subset(kept);
  return out;
}

std::vector<int> GroupCounts(const LabeledDataset& dataset) {
  Require(dataset.group_ids.has_value(), "dataset has no group ids");
  std::vector<int> counts(dataset.group_count(), 0);
  for (int g : *dataset.group_ids) ++counts.at(g);
  return counts;
}

}  // namespace ccr
