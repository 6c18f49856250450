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

// FVEC1 interchange format (little-endian):
//   magic "FVEC1\0" | u32 n | u32 h | u32 C | u8 has_group |
//   n × ( u32 label | [i32 group] | h × f32 )
// Values are stored as 32-bit floats; readers widen to double.

#include <optional>
#include <string>
#include <vector>

#include "ccr/core.hpp"

namespace ccr {

struct FvecData {
  FeatureMatrix values;  // n×h
  std::vector<int> labels;
  std::optional<std::vector<int>> groups;
  int class_count = 2;
};

enum class FvecError {
  kIo,
  kBadMagic,
  kTruncated,
  kLabelOutOfRange,
  kNonFinite,
  kTrailingBytes,
};

class FvecFormatError : public Error {
 public:
  FvecFormatError(FvecError code, const std::string& what)
      : Error(code == FvecError::kIo ? ErrorKind::kIo : ErrorKind::kFormat,
              what),
        code_(code) {}
  FvecError code() const { return code_; }

 private:
  FvecError code_;
};

// Serializes to an in-memory byte string. Values are narrowed to float.
std::string EncodeFvec(const FvecData& data);
FvecData DecodeFvec(const std::string& bytes);

void WriteFvec(const FvecData& data, const std::string& path);
FvecData ReadFvec(const std::string& path);

// Raw features of a dataset, packaged for FVEC1 (h = input width).
FvecData ToFvec(const LabeledDataset& dataset);

}  // namespace ccr
