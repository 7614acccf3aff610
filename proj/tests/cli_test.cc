// Copyright 2026 The HUSE Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "huse/cli.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "huse/dataset.h"
#include "huse/oracle.h"
#include "json.hpp"

namespace huse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Fixture(const std::string& name) {
  return std::string(HUSE_FIXTURE_DIR) + "/" + name;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string tmpl = (fs::temp_directory_path() / "huse-cli-XXXXXX").string();
    dir_ = mkdtemp(tmpl.data());
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::vector<std::vector<std::string>> Tsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(CliTest, HelpListsSubcommands) {
  const CliResult r = Cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* sub : {"compute", "stability", "surface", "synth", "serve"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
  const CliResult sub = Cli({"compute", "--help"});
  EXPECT_EQ(sub.code, kExitOk);
  for (const char* flag : {"--input", "--out", "--k", "--seed", "--features"}) {
    EXPECT_NE(sub.out.find(flag), std::string::npos) << flag;
  }
}

TEST_F(CliTest, ComputeFullScale) {
  const CliResult r = Cli({"compute", "--input", Fixture("full_scale.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n_contexts"], 100);
  EXPECT_EQ(j["k"], 16);
  EXPECT_EQ(j["huse_d"].get<double>(),
            1.0 + j["huse"].get<double>() - j["huse_q"].get<double>());
}

TEST_F(CliTest, ComputeWritesOutFile) {
  const CliResult r = Cli({"compute", "-i", Fixture("separable.jsonl"), "--out",
                     Path("report.json"), "--features", "hj"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(Path("report.json"));
  const json j = json::parse(in);
  EXPECT_EQ(j["features"], "hj");
  EXPECT_EQ(j["huse"], 0.0);
}

TEST_F(CliTest, ComputeExitCodes) {
  EXPECT_EQ(Cli({"compute", "-i", Fixture("full_scale.jsonl"), "--k", "300"}).code,
            kExitPreconditionError);
  EXPECT_EQ(Cli({"compute", "-i", Path("missing.jsonl")}).code, kExitInputError);
  std::ofstream(Path("bad.jsonl")) << "{\"example_id\": 1}\n";
  const CliResult bad = Cli({"compute", "-i", Path("bad.jsonl")});
  EXPECT_EQ(bad.code, kExitInputError);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
  EXPECT_EQ(Cli({"compute"}).code, kExitInputError);
  EXPECT_EQ(Cli({"compute", "-i", Fixture("separable.jsonl"), "--features", "bleu"})
                .code,
            kExitInputError);
  EXPECT_EQ(Cli({"compute", "-i", Fixture("separable.jsonl"), "--features", "opt"})
                .code,
            kExitPreconditionError);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitInputError);
}

TEST_F(CliTest, ComputeDuplicatedFixture) {
  const CliResult r = Cli({"compute", "-i", Fixture("duplicated.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["huse"], j["huse_q"]);
  EXPECT_EQ(j["huse_d"], 1.0);
  EXPECT_TRUE(j["degenerate"].get<bool>());
}

TEST_F(CliTest, StabilityIsByteIdentical) {
  const std::vector<std::string> args = {"stability", "-i", Fixture("full_scale.jsonl"),
                                         "--examples", "50", "--raters", "20",
                                         "--boot", "100", "--seed", "1"};
  const CliResult a = Cli(args);
  const CliResult b = Cli(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  const json j = json::parse(a.out);
  EXPECT_EQ(j["replicate_huse"].size(), 100u);
  EXPECT_EQ(j["n_examples_used"], 50);
}

TEST_F(CliTest, StabilityTooManyExamples) {
  EXPECT_EQ(Cli({"stability", "-i", Fixture("full_scale.jsonl"), "--examples", "500"})
                .code,
            kExitPreconditionError);
}

TEST_F(CliTest, StabilityBandsWidenWithFewerRaters) {
  std::ifstream in(Fixture("zipf_pair.json"));
  const DiscretePair pair = AnnealModel(PairFromJson(json::parse(in)), 0.7);
  RaterModel raters;
  raters.n_raters = 20;
  {
    std::ofstream out(Path("hard.jsonl"));
    WriteDataset(out, SampleEvalDataset(pair, 400, raters, 5));
  }
  std::vector<double> widths;
  for (const char* n : {"5", "20"}) {
    const CliResult r = Cli({"stability", "-i", Path("hard.jsonl"), "--examples", "100",
                       "--raters", n, "--boot", "200", "--seed", "3"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json j = json::parse(r.out);
    widths.push_back(j["p95"].get<double>() - j["p05"].get<double>());
  }
  EXPECT_GT(widths[0], widths[1]);
}

TEST_F(CliTest, SurfaceGridOfTwo) {
  const CliResult r = Cli({"surface", "-i", Fixture("full_scale.jsonl"), "--grid", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = Tsv(r.out);
  ASSERT_EQ(rows.size(), 1u + 4u + 200u);
  EXPECT_EQ(rows[0][0], "kind");
  int grid = 0;
  for (const auto& row : rows) grid += row[0] == "grid";
  EXPECT_EQ(grid, 4);
}

TEST_F(CliTest, SurfaceSeparableConfidence) {
  const CliResult r = Cli({"surface", "-i", Fixture("separable.jsonl"), "--grid", "20"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const auto& row : Tsv(r.out)) {
    if (row[0] != "grid") continue;
    EXPECT_TRUE(row[3] == "0" || row[3] == "1") << row[3];
  }
  EXPECT_EQ(Cli({"surface", "-i", Fixture("separable.jsonl"), "--grid", "1"}).code,
            kExitPreconditionError);
}

TEST_F(CliTest, SynthConvergence) {
  const CliResult r = Cli({"synth", "-i", Fixture("tv02_pair.json"), "--mode", "convergence",
                     "--n", "10000", "--features", "opt"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["l_star"].get<double>(), 0.8, 1e-15);
  EXPECT_LT(j["mean_gap"].get<double>(), 0.05);
}

TEST_F(CliTest, SynthBounds) {
  const CliResult r = Cli({"synth", "--mode", "bounds", "--pairs", "100", "--seed", "4"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["checks"].size(), 100u);
  EXPECT_TRUE(j["all_hold"].get<bool>());
  const CliResult fixed = Cli({"synth", "--mode", "bounds", "-i", Fixture("tv02_pair.json")});
  ASSERT_EQ(fixed.code, kExitOk) << fixed.err;
  const json f = json::parse(fixed.out);
  EXPECT_TRUE(f["all_hold"].get<bool>());
  EXPECT_EQ(f["checks"][0]["quantizer"], "identity");
  EXPECT_EQ(f["checks"][0]["mutual_info_bits"], 0.0);
  EXPECT_EQ(f["checks"][1]["l_phi"], 1.0);
}

TEST_F(CliTest, SynthAnnealSweepOnIdenticalPair) {
  const CliResult r = Cli({"synth", "-i", Fixture("zipf_pair.json"), "--mode", "anneal-sweep",
                     "--temperatures", "1.0,0.9,0.7,0.5", "--n", "300"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["sweep"].size(), 4u);
  EXPECT_EQ(j["sweep"][0]["exact_tv"], 0.0);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_GT(j["sweep"][i]["exact_tv"].get<double>(),
              j["sweep"][i - 1]["exact_tv"].get<double>());
    EXPECT_TRUE(j["sweep"][i].contains("huse"));
  }
}

TEST_F(CliTest, SynthIsDeterministic) {
  const std::vector<std::string> args = {"synth", "-i", Fixture("zipf_pair.json"),
                                         "--mode", "anneal-sweep", "--n", "200",
                                         "--seed", "9"};
  EXPECT_EQ(Cli(args).out, Cli(args).out);
}

TEST_F(CliTest, SynthBadSpec) {
  std::ofstream(Path("bad.json")) << R"({"contexts": [{"support": ["a", "b"],
      "p_human": [0.5, 0.6], "p_model": [0.5, 0.5]}]})";
  EXPECT_EQ(Cli({"synth", "-i", Path("bad.json")}).code, kExitInputError);
  std::ofstream(Path("broken.json")) << "{";
  EXPECT_EQ(Cli({"synth", "-i", Path("broken.json")}).code, kExitInputError);
  EXPECT_EQ(Cli({"synth", "--mode", "convergence"}).code, kExitInputError);
  EXPECT_EQ(Cli({"synth", "--mode", "sideways"}).code, kExitInputError);
}

TEST_F(CliTest, ServeRejectsBadPool) {
  EXPECT_EQ(Cli({"serve", "--pool", Path("nope.jsonl"), "--log", Path("log.jsonl"),
                 "--port", "0"})
                .code,
            kExitInputError);
}

}  // namespace
}  // namespace huse
