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

#include "ccr/fvec.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ccr {
namespace {

constexpr char kMagic[6] = {'F', 'V', 'E', 'C', '1', '\0'};
constexpr std::size_t kHeaderBytes = sizeof(kMagic) + 4 + 4 + 4 + 1;

static_assert(std::endian::native == std::endian::little,
              "FVEC1 codec assumes a little-endian host");

template <typename T>
void Put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Take(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw FvecFormatError(FvecError::kTruncated,
                            std::string("FVEC1 truncated while reading ") +
                                what + " at byte offset " +
                                std::to_string(pos_));
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string EncodeFvec(const FvecData& data) {
  const auto n = data.values.rows();
  const auto h = data.values.cols();
  Require(n >= 1, "FVEC1 requires at least one record");
  Require(h >= 1, "FVEC1 requires feature dimension >= 1");
  Require(static_cast<Eigen::Index>(data.labels.size()) == n,
          "label count does not match feature rows");
  Require(data.class_count >= 1, "class count must be positive");
  if (data.groups) {
    Require(static_cast<Eigen::Index>(data.groups->size()) == n,
            "group count does not match feature rows");
  }
  for (int label : data.labels) {
    Require(label >= 0 && label < data.class_count,
            "label " + std::to_string(label) + " outside [0, C)");
  }
  Require(data.values.allFinite(), "FVEC1 features must be finite");

  const std::size_t record =
      4 + (data.groups ? 4 : 0) + 4 * static_cast<std::size_t>(h);
  std::string out;
  out.reserve(kHeaderBytes + record * static_cast<std::size_t>(n));
  out.append(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(data.class_count));
  Put<std::uint8_t>(out, data.groups ? 1 : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(data.labels[i]));
    if (data.groups) Put<std::int32_t>(out, (*data.groups)[i]);
    for (Eigen::Index j = 0; j < h; ++j) {
      const float v = static_cast<float>(data.values(i, j));
      Require(std::isfinite(v), "feature overflows 32-bit float");
      Put<float>(out, v);
    }
  }
  return out;
}

FvecData DecodeFvec(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FvecFormatError(FvecError::kBadMagic,
                          "not an FVEC1 file (bad magic)");
  }
  Cursor cur(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) cur.Take<char>("magic");
  const auto n = cur.Take<std::uint32_t>("record count");
  const auto h = cur.Take<std::uint32_t>("feature dimension");
  const auto c = cur.Take<std::uint32_t>("class count");
  const auto has_group = cur.Take<std::uint8_t>("group flag");
  if (n == 0 || h == 0) {
    throw FvecFormatError(FvecError::kTruncated,
                          "FVEC1 header declares an empty payload");
  }
  if (has_group > 1) {
    throw FvecFormatError(FvecError::kBadMagic,
                          "FVEC1 group flag must be 0 or 1");
  }
  const std::uint64_t record = 4ULL + (has_group ? 4 : 0) + 4ULL * h;
  if (cur.remaining() < record * n) {
    throw FvecFormatError(
        FvecError::kTruncated,
        "FVEC1 truncated: header declares " + std::to_string(n) +
            " records of " + std::to_string(record) + " bytes but only " +
            std::to_string(cur.remaining()) + " payload bytes follow");
  }

  FvecData out;
  out.class_count = static_cast<int>(c);
  out.values.resize(n, h);
  out.labels.resize(n);
  if (has_group) out.groups.emplace(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto label = cur.Take<std::uint32_t>("label");
    if (label >= c) {
      throw FvecFormatError(FvecError::kLabelOutOfRange,
                            "record " + std::to_string(i) + " has label " +
                                std::to_string(label) + " >= C=" +
                                std::to_string(c));
    }
    out.labels[i] = static_cast<int>(label);
    if (has_group) (*out.groups)[i] = cur.Take<std::int32_t>("group");
    for (std::uint32_t j = 0; j < h; ++j) {
      const float v = cur.Take<float>("feature");
      if (!std::isfinite(v)) {
        throw FvecFormatError(FvecError::kNonFinite,
                              "record " + std::to_string(i) + " feature " +
                                  std::to_string(j) + " is not finite");
      }
      out.values(i, j) = static_cast<double>(v);
    }
  }
  if (cur.remaining() != 0) {
    throw FvecFormatError(FvecError::kTrailingBytes,
                          std::to_string(cur.remaining()) +
                              " unexpected bytes after the last record");
  }
  return out;
}

void WriteFvec(const FvecData& data, const std::string& path) {
  const std::string bytes = EncodeFvec(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FvecFormatError(FvecError::kIo, "cannot open " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FvecFormatError(FvecError::kIo, "write failed: " + path);
}

FvecData ReadFvec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FvecFormatError(FvecError::kIo, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return DecodeFvec(buf.str());
}

FvecData ToFvec(const LabeledDataset& dataset) {
  FvecData out;
  out.values = dataset.features_raw;
  out.labels = dataset.labels;
  out.groups = dataset.group_ids;
  out.class_count = dataset.class_count;
  return out;
}

}  // namespace ccr
