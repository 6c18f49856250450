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

#include "ccr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace ccr {
namespace {

constexpr std::uint64_t kAttributionStream = 30;

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string Sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace

MetricsReport GroupMetrics(const std::vector<int>& preds,
                           const std::vector<int>& labels,
                           const std::optional<std::vector<int>>& group_ids,
                           int expected_group_count) {
  if (!group_ids) {
    Fail(ErrorKind::kInvalidArgument, "group metrics require group ids");
  }
  const auto& groups = *group_ids;
  Require(preds.size() == labels.size() && groups.size() == labels.size(),
          "predictions, labels and group ids must be aligned");
  Require(!labels.empty(), "no samples to evaluate");

  std::map<int, int> correct;
  MetricsReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++r.group_sizes[groups[i]];
    correct[groups[i]] += preds[i] == labels[i] ? 1 : 0;
  }
  for (int g = 0; g < expected_group_count; ++g) {
    if (!r.group_sizes.count(g)) {
      Fail(ErrorKind::kInvalidArgument,
           "group " + std::to_string(g) + " has no samples");
    }
  }
  int total_correct = 0;
  r.worst_group_accuracy = 1.0;
  for (const auto& [g, size] : r.group_sizes) {
    const double acc = static_cast<double>(correct[g]) / size;
    r.per_group_accuracy[g] = acc;
    r.worst_group_accuracy = std::min(r.worst_group_accuracy, acc);
    total_correct += correct[g];
  }
  r.mean_accuracy =
      static_cast<double>(total_correct) / static_cast<double>(labels.size());
  return r;
}

nlohmann::json ToJson(const MetricsReport& r) {
  nlohmann::json per_group = nlohmann::json::object();
  nlohmann::json sizes = nlohmann::json::object();
  for (const auto& [g, acc] : r.per_group_accuracy) {
    per_group[std::to_string(g)] = acc;
    sizes[std::to_string(g)] = r.group_sizes.at(g);
  }
  return {{"mean_accuracy", r.mean_accuracy},
          {"worst_group_accuracy", r.worst_group_accuracy},
          {"per_group_accuracy", per_group},
          {"group_sizes", sizes}};
}

std::string RenderMetricsTable(const MetricsReport& r) {
  std::ostringstream out;
  out << "group      size  accuracy\n";
  for (const auto& [g, acc] : r.per_group_accuracy) {
    char line[96];
    std::snprintf(line, sizeof(line), "%-6d %8d  %8s\n", g,
                  r.group_sizes.at(g), Fixed(acc, 4).c_str());
    out << line;
  }
  out << "mean accuracy          " << Fixed(r.mean_accuracy, 4) << "\n";
  out << "worst-group accuracy   " << Fixed(r.worst_group_accuracy, 4)
      << "\n";
  return out.str();
}

std::vector<InputBlock> DefaultBlocks(const LabeledDataset& dataset) {
  std::vector<InputBlock> blocks;
  if (dataset.causal_dim > 0) {
    blocks.push_back({"causal", 0, dataset.causal_dim});
  }
  if (dataset.spurious_dim > 0) {
    blocks.push_back({"spurious", dataset.causal_dim,
                      dataset.causal_dim + dataset.spurious_dim});
  }
  return blocks;
}

double AttributionReport::BlockMean(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.block.name == name) {
      const auto& v = b.mean_abs_change;
      return std::accumulate(v.begin(), v.end(), 0.0) /
             static_cast<double>(v.size());
    }
  }
  Fail(ErrorKind::kInvalidArgument, "no attribution block named " + name);
}

AttributionReport OcclusionAttribution(const Encoder& encoder,
                                       const ClassifierHead& head,
                                       const LabeledDataset& dataset,
                                       const std::vector<InputBlock>& blocks,
                                       RngSeed seed, int max_instances) {
  const int d = dataset.input_dim();
  Require(max_instances >= 1, "max_instances must be >= 1");
  Require(!blocks.empty(), "block spec is empty");
  // Blocks must tile [0, d) without gaps or overlaps.
  std::vector<InputBlock> sorted = blocks;
  std::sort(sorted.begin(), sorted.end(),
            [](const InputBlock& a, const InputBlock& b) {
              return a.begin < b.begin;
            });
  int cursor = 0;
  for (const auto& b : sorted) {
    Require(b.begin < b.end, "block '" + b.name + "' is empty");
    Require(b.begin == cursor, b.begin < cursor
                                   ? "block spec overlaps at column " +
                                         std::to_string(b.begin)
                                   : "block spec leaves a gap at column " +
                                         std::to_string(cursor));
    cursor = b.end;
  }
  Require(cursor == d, "block spec does not cover all " + std::to_string(d) +
                           " input columns");

  const int n = dataset.size();
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (n > max_instances) {
    Rng rng = MakeRng(seed, kAttributionStream);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(max_instances);
    std::sort(rows.begin(), rows.end());
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(r) = dataset.features_raw.row(rows[r]);
  }
  const Matrix base = HeadProbs(head, Encode(encoder, x));

  AttributionReport report;
  report.instances = static_cast<int>(rows.size());
  for (const auto& b : blocks) {
    Matrix occluded = x;
    occluded.middleCols(b.begin, b.end - b.begin).setZero();
    const Matrix probs = HeadProbs(head, Encode(encoder, occluded));
    BlockAttribution attr;
    attr.block = b;
    attr.mean_abs_change.resize(head.class_count());
    for (int c = 0; c < head.class_count(); ++c) {
      attr.mean_abs_change[c] = (probs.col(c) - base.col(c)).cwiseAbs().mean();
    }
    report.blocks.push_back(std::move(attr));
  }
  return report;
}

nlohmann::json ToJson(const AttributionReport& r) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"name", b.block.name},
                      {"begin", b.block.begin},
                      {"end", b.block.end},
                      {"mean_abs_change", b.mean_abs_change}});
  }
  return {{"instances", r.instances}, {"blocks", blocks}};
}

std::string RenderAttributionTable(const AttributionReport& r) {
  std::ostringstream out;
  out << "block        columns    per-class mean |dp|\n";
  for (const auto& b : r.blocks) {
    char head[96];
    std::snprintf(head, sizeof(head), "%-12s [%d,%d)", b.block.name.c_str(),
                  b.block.begin, b.block.end);
    out << head;
    for (double v : b.mean_abs_change) out << "  " << Sci(v);
    out << "\n";
  }
  out << "instances: " << r.instances << "\n";
  return out.str();
}

}  // namespace ccr
