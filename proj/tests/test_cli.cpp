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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "ccr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ccr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int Lab(const std::string& args) {
  const std::string cmd =
      std::string(CCR_LAB_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json ReadJson(const fs::path& path) { return json::parse(Slurp(path)); }

TEST_CASE("gen writes splits whose group counts add up") {
  const fs::path out = Scratch("gen");
  REQUIRE(Lab("gen --seed 7 --out " + out.string()) == 0);
  for (const char* f : {"ideal.fvec", "observed.fvec", "test.fvec",
                        "validation.fvec", "groups.json", "dataset.json",
                        "manifest.json"}) {
    CHECK(fs::exists(out / f));
  }
  const json groups = ReadJson(out / "groups.json");
  int total = 0;
  for (const auto& c : groups["group_counts"]) total += c.get<int>();
  CHECK(total == groups["observed_n"].get<int>());
}

TEST_CASE("missing inputs and bad usage exit with code 2") {
  const fs::path out = Scratch("missing");
  CHECK(Lab("run --config " + (out / "nope.json").string() + " --out " +
            out.string()) == 2);
  CHECK(Lab("train1 --out " + out.string()) == 2);
  CHECK(Lab("frobnicate") == 2);
  CHECK(Lab("run --variant sideways --out " + out.string()) == 2);
}

TEST_CASE("a run is reproducible from its seed") {
  const fs::path a = Scratch("run_a");
  const fs::path b = Scratch("run_b");
  REQUIRE(Lab("run --seed 42 --out " + a.string()) == 0);
  REQUIRE(Lab("run --seed 42 --out " + b.string()) == 0);
  for (const char* f : {"observed.fvec", "stage1_model.json", "weights.csv",
                        "model.json", "metrics.json", "attribution.json",
                        "manifest.json"}) {
    CHECK_MESSAGE(Slurp(a / f) == Slurp(b / f), f);
  }
  const json m = ReadJson(a / "metrics.json");
  CHECK(m.contains("mean_accuracy"));
  CHECK(m.contains("worst_group_accuracy"));
  CHECK(m["per_group_accuracy"].size() == 4);
  const json manifest = ReadJson(a / "manifest.json");
  CHECK(manifest["commands"].contains("run"));
}

TEST_CASE("stages can be run one at a time") {
  const fs::path out = Scratch("stages");
  REQUIRE(Lab("gen --seed 3 --out " + out.string()) == 0);
  CHECK(Lab("train2 --out " + out.string()) == 2);
  REQUIRE(Lab("train1 --seed 3 --out " + out.string()) == 0);
  REQUIRE(Lab("weights --seed 3 --estimator jtt --out " + out.string()) == 0);
  REQUIRE(Lab("train2 --seed 3 --lambda 0.5 --out " + out.string()) == 0);
  REQUIRE(Lab("eval --seed 3 --out " + out.string()) == 0);
  REQUIRE(Lab("attribute --seed 3 --out " + out.string()) == 0);
  const json a = ReadJson(out / "attribution.json");
  CHECK(a["blocks"].size() == 2);
  CHECK(a["instances"] == 200);
}

TEST_CASE("sweep writes one metrics file per lambda") {
  const fs::path out = Scratch("sweep");
  REQUIRE(Lab("sweep --seed 5 --out " + out.string()) == 0);
  const json rows = ReadJson(out / "sweep.json");
  const auto grid = ccr::DefaultBenchSpec().lambda_grid;
  CHECK(rows.size() == grid.size());
  int files = 0;
  for (const auto& entry : fs::directory_iterator(out / "sweep")) {
    files += fs::exists(entry.path() / "metrics.json") ? 1 : 0;
  }
  CHECK(files == static_cast<int>(grid.size()));
}

TEST_CASE("compare and ablation tables") {
  const fs::path out = Scratch("compare");
  REQUIRE(Lab("compare --seed 42 --out " + out.string()) == 0);
  const json rows = ReadJson(out / "comparison.json");
  CHECK(rows.size() == 4);
  CHECK(rows[0]["runs"].size() == 1);
  REQUIRE(Lab("compare --ablation --seed 42 --out " + out.string()) == 0);
  CHECK(ReadJson(out / "ablation.json").size() == 10);
}

TEST_CASE("a written experiment config reproduces the defaults") {
  const fs::path out = Scratch("config");
  ccr::ExperimentSpec spec = ccr::DefaultBenchSpec();
  spec.seeds = {42};
  std::ofstream(out / "exp.json") << ccr::ToJson(spec).dump(2);
  const fs::path a = out / "a";
  const fs::path b = out / "b";
  REQUIRE(Lab("run --config " + (out / "exp.json").string() + " --out " +
              a.string()) == 0);
  REQUIRE(Lab("run --seed 42 --out " + b.string()) == 0);
  CHECK(Slurp(a / "model.json") == Slurp(b / "model.json"));
}

TEST_CASE("FVEC inputs from another producer") {
  const fs::path src = Scratch("fvec_src");
  REQUIRE(Lab("gen --seed 11 --out " + src.string()) == 0);
  const fs::path out = Scratch("fvec_run");
  ccr::ExperimentSpec spec = ccr::DefaultBenchSpec();
  spec.synthetic.reset();
  spec.train_fvec = (src / "observed.fvec").string();
  spec.test_fvec = (src / "test.fvec").string();
  spec.seeds = {11};
  spec.select_lambda = false;
  std::ofstream(out / "exp.json") << ccr::ToJson(spec).dump(2);
  REQUIRE(Lab("run --config " + (out / "exp.json").string() + " --out " +
              out.string()) == 0);
  CHECK(fs::exists(out / "metrics.json"));
}

}  // namespace
