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

// Shared domain types, error kinds and the deterministic randomness contract.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ccr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// n×h matrix of frozen last-layer features. Finite entries; non-negative
// when produced by a rectifier encoder.
using FeatureMatrix = Matrix;

enum class ErrorKind {
  kInvalidArgument,  // bad shapes, out-of-range parameters, bad configs
  kIo,               // open/read/write failures
  kFormat,           // malformed files
  kNumerical,        // divergence, non-finite values during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void Require(bool condition, const std::string& what) {
  if (!condition) Fail(ErrorKind::kInvalidArgument, what);
}

struct RngSeed {
  std::uint64_t value = 42;
};

// Every random draw in the library goes through this engine type, seeded
// from an RngSeed. Streams for independent consumers are split with
// DeriveSeed so that adding a consumer never perturbs another one.
using Rng = std::mt19937_64;

// SplitMix64 finalizer over (seed, stream).
std::uint64_t DeriveSeed(RngSeed seed, std::uint64_t stream);

inline Rng MakeRng(RngSeed seed, std::uint64_t stream) {
  return Rng(DeriveSeed(seed, stream));
}

// Raw inputs (causal block followed by spurious block), labels and, for
// synthetic data, the true group of each row encoded as label·K + k.
struct LabeledDataset {
  Matrix features_raw;
  std::vector<int> labels;
  std::optional<std::vector<int>> group_ids;
  int class_count = 2;
  int spurious_value_count = 0;  // K; 0 when unknown (ingested data)
  int causal_dim = 0;
  int spurious_dim = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int input_dim() const { return static_cast<int>(features_raw.cols()); }
  int group_count() const { return class_count * spurious_value_count; }

  // Throws kInvalidArgument when an invariant does not hold.
  void Validate() const;

  // Rows in `rows`, in that order.
  LabeledDataset Subset(const std::vector<int>& rows) const;
};

// M with M_j = 0 and every other entry 1.
struct CounterfactualMask {
  int dropped_feature = 0;

  // features ⊙ M for a single row.
  Vector Apply(const Vector& features) const;
};

struct ClassifierHead {
  Matrix weights;  // h×C
  Vector bias;     // C

  int feature_dim() const { return static_cast<int>(weights.rows()); }
  int class_count() const { return static_cast<int>(weights.cols()); }
};

struct ObservationMask {
  std::vector<bool> observed;

  int kept() const;
};

bool AllFinite(const Matrix& m);

}  // namespace ccr
