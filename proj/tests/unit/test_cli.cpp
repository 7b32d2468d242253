// Copyright 2026 The seqsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end runs of the command-line tool, in process.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "seqsynth/cli.hpp"
#include "support/fixture.hpp"

namespace seqsynth {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kConfigs = fs::path(SEQSYNTH_SOURCE_DIR) / "configs";

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "seqsynth");
  return run_cli(args);
}

// Runs the tool and returns (exit code, captured stderr).
std::pair<int, std::string> run_err(std::vector<std::string> args) {
  ::testing::internal::CaptureStderr();
  const int code = run(std::move(args));
  return {code, ::testing::internal::GetCapturedStderr()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::set<std::string> header_subjects(const fs::path& labels) {
  std::set<std::string> ids;
  std::istringstream in(slurp(labels));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) ids.insert(line.substr(0, line.find(',')));
  return ids;
}

// Simulated fixture and a tiny trained model shared by every test.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("cli"));
    ASSERT_EQ(run({"simulate", "--config", (kConfigs / "scenario_default.toml").string(), "--seed",
                   "1", "--out", data().string()}),
              0);
    const auto t0 = std::chrono::steady_clock::now();
    ASSERT_EQ(run({"train", "--data", data().string(), "--config",
                   (kConfigs / "train_tiny.toml").string(), "--seed", "2", "--out",
                   model().string()}),
              0);
    train_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static fs::path data() { return *root_ / "data"; }
  static fs::path model() { return *root_ / "model"; }
  static fs::path checkpoint() { return model() / "checkpoint.json"; }
  static fs::path dir(const std::string& name) { return *root_ / name; }

  static fs::path* root_;
  static double train_seconds_;
};

fs::path* Cli::root_ = nullptr;
double Cli::train_seconds_ = 0.0;

TEST_F(Cli, SimulateWritesDefaultFixture) {
  EXPECT_EQ(header_subjects(data() / "train_labels.csv").size(), 200u);
  EXPECT_EQ(header_subjects(data() / "test_labels.csv").size(), 50u);
  const json m = read_json(data() / "manifest.json");
  EXPECT_EQ(m["command"], "simulate");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["outputs"].size(), 4u);
  for (const auto& o : m["outputs"]) EXPECT_EQ(o["sha256"].get<std::string>().size(), 64u);
}

TEST_F(Cli, SimulateIsSeedDeterministic) {
  const fs::path again = dir("sim_again");
  ASSERT_EQ(run({"simulate", "--config", (kConfigs / "scenario_default.toml").string(), "--seed",
                 "1", "--out", again.string()}),
            0);
  for (const char* f : {"train_events.csv", "train_labels.csv", "test_events.csv", "test_labels.csv"}) {
    EXPECT_EQ(slurp(again / f), slurp(data() / f)) << f;
  }
}

TEST_F(Cli, BadInputsExitTwo) {
  EXPECT_EQ(run_err({"simulate", "--config", "/nonexistent/scenario.toml", "--out",
                     dir("missing").string()}).first,
            2);
  const fs::path bad_cfg = dir("explosive.toml");
  std::ofstream(bad_cfg) << "[scenario]\nmu = [0.1]\nA = 2.0\n";
  EXPECT_EQ(run_err({"simulate", "--config", bad_cfg.string(), "--out", dir("explosive").string()}).first, 2);
  EXPECT_EQ(run_err({"frobnicate"}).first, 2);
  EXPECT_EQ(run_err({"train", "--out", dir("x").string()}).first, 2);  // --data missing
}

TEST_F(Cli, CorruptCsvNamesTheRow) {
  const fs::path bad = dir("corrupt");
  fs::create_directories(bad);
  std::ofstream(bad / "train_events.csv")
      << "subject_id,time,event_name,value\nA,1,type_0,\nA,2,type_1,\nA,zzz,type_0,\n";
  std::ofstream(bad / "train_labels.csv") << "subject_id,label\nA,1\n";
  const auto [code, err] = run_err({"train", "--data", bad.string(), "--config",
                                    (kConfigs / "train_tiny.toml").string(), "--out",
                                    dir("corrupt_out").string()});
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("4"), std::string::npos) << err;
}

TEST_F(Cli, TinyTrainIsFastAndReproducible) {
  EXPECT_LT(train_seconds_, 60.0);
  EXPECT_TRUE(fs::exists(model() / "loss_curve.csv"));
  const fs::path again = dir("model_again");
  ASSERT_EQ(run({"train", "--data", data().string(), "--config",
                 (kConfigs / "train_tiny.toml").string(), "--seed", "2", "--out", again.string()}),
            0);
  EXPECT_EQ(slurp(again / "checkpoint.json"), slurp(checkpoint()));
  EXPECT_EQ(slurp(again / "loss_curve.csv"), slurp(model() / "loss_curve.csv"));
}

TEST_F(Cli, DivergenceExitsThreeAndKeepsCheckpoint) {
  const fs::path cfg = dir("diverge.toml");
  std::ofstream(cfg) << "[model]\nd_model = 8\nd_latent = 4\nn_layers = 1\nn_heads = 2\nd_ff = 16\n"
                        "[train]\nepochs = 3\nlr = 1e6\ngrad_clip = 1e12\n";
  const fs::path out = dir("diverged");
  EXPECT_EQ(run_err({"train", "--data", data().string(), "--config", cfg.string(), "--out",
                     out.string()}).first,
            3);
  EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
  EXPECT_EQ(read_json(out / "manifest.json")["exit_code"], 3);
}

TEST_F(Cli, GenerateOneToOneAndRepeatable) {
  const fs::path a = dir("gen_a"), b = dir("gen_b");
  for (const fs::path& out : {a, b}) {
    ASSERT_EQ(run({"generate", "--checkpoint", checkpoint().string(), "--data", data().string(),
                   "--var-multiplier", "0", "--seed", "3", "--out", out.string()}),
              0);
  }
  EXPECT_EQ(slurp(a / "events.csv"), slurp(b / "events.csv"));
  EXPECT_EQ(slurp(a / "metadata.json"), slurp(b / "metadata.json"));
  EXPECT_EQ(header_subjects(a / "labels.csv").size(), 200u);
  EXPECT_EQ(read_json(a / "metadata.json")["subjects"].size(), 200u);
}

TEST_F(Cli, GenerateThreadCountDoesNotMatter) {
  const fs::path one = dir("gen_t1"), three = dir("gen_t3");
  ASSERT_EQ(run({"generate", "--checkpoint", checkpoint().string(), "--data", data().string(),
                 "--seed", "5", "--parallel", "1", "--out", one.string()}),
            0);
  ::setenv("SEQSYNTH_THREADS", "3", 1);
  const int code = run({"generate", "--checkpoint", checkpoint().string(), "--data",
                        data().string(), "--seed", "5", "--out", three.string()});
  ::unsetenv("SEQSYNTH_THREADS");
  ASSERT_EQ(code, 0);
  EXPECT_EQ(slurp(one / "events.csv"), slurp(three / "events.csv"));
}

TEST_F(Cli, EventsKnownFlag) {
  const fs::path out = dir("gen_known");
  ASSERT_EQ(run({"generate", "--checkpoint", checkpoint().string(), "--data", data().string(),
                 "--events-known", "--var-multiplier", "2", "--out", out.string()}),
            0);
  EXPECT_EQ(read_json(out / "metadata.json")["config"]["mode"], "events_known");
}

TEST_F(Cli, VersionMismatchExitsFour) {
  json ck = read_json(checkpoint());
  ck["version"] = 99;
  const fs::path bad = dir("future_checkpoint.json");
  std::ofstream(bad) << ck.dump();
  EXPECT_EQ(run_err({"generate", "--checkpoint", bad.string(), "--data", data().string(), "--out",
                     dir("gen_future").string()}).first,
            4);
}

TEST_F(Cli, VocabularyMismatchExitsFive) {
  const fs::path odd = dir("odd_data");
  fs::create_directories(odd);
  std::ofstream(odd / "train_events.csv") << "subject_id,time,event_name\nA,1,type_0\nA,2,mystery\n";
  std::ofstream(odd / "train_labels.csv") << "subject_id,label\nA,0\n";
  EXPECT_EQ(run_err({"generate", "--checkpoint", checkpoint().string(), "--data", odd.string(),
                     "--out", dir("gen_odd").string()}).first,
            5);

  const fs::path syn = dir("odd_syn");
  fs::create_directories(syn);
  std::ofstream(syn / "events.csv") << "subject_id,time,event_name\nS,1,type_0\nS,2,mystery\n";
  std::ofstream(syn / "labels.csv") << "subject_id,label\nS,1\n";
  EXPECT_EQ(run_err({"evaluate", "--real", data().string(), "--synthetic", syn.string(), "--out",
                     dir("eval_odd").string()}).first,
            5);
}

TEST_F(Cli, EvaluateCopyCase) {
  const fs::path copy = dir("copy");
  fs::create_directories(copy);
  fs::copy_file(data() / "train_events.csv", copy / "events.csv");
  fs::copy_file(data() / "train_labels.csv", copy / "labels.csv");
  const fs::path out = dir("eval_copy");
  ASSERT_EQ(run({"evaluate", "--real", data().string(), "--synthetic", copy.string(), "--config",
                 (kConfigs / "evaluate_quick.toml").string(), "--seed", "4", "--out",
                 out.string()}),
            0);
  const json r = read_json(out / "report.json");
  EXPECT_EQ(r["dcr"]["mean"], 0.0);
  EXPECT_EQ(r["dataset_attack"], 0.0);
  EXPECT_NEAR(r["ml_inference"].get<double>(), 0.5, 0.15);
  EXPECT_EQ(line_count(out / "metrics.csv"), 2u);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST_F(Cli, SweepRowsSvgAndPartialOutput) {
  const fs::path out = dir("sweep");
  ASSERT_EQ(run({"sweep", "--checkpoint", checkpoint().string(), "--data", data().string(),
                 "--multipliers", "0.1,1,4", "--config", (kConfigs / "evaluate_quick.toml").string(),
                 "--out", out.string()}),
            0);
  EXPECT_EQ(line_count(out / "sweep.csv"), 4u);
  const std::string svg = slurp(out / "sweep.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);

  EXPECT_EQ(run_err({"sweep", "--checkpoint", checkpoint().string(), "--data", data().string(),
                     "--multipliers", "1", "--out", dir("sweep_one").string()}).first,
            2);
}

TEST_F(Cli, WritesOnlyInsideOutDir) {
  auto listing = [] {
    std::set<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(*root_)) files.insert(e.path().string());
    return files;
  };
  const auto before = listing();
  const fs::path out = dir("gen_fenced");
  ASSERT_EQ(run({"generate", "--checkpoint", checkpoint().string(), "--data", data().string(),
                 "--out", out.string()}),
            0);
  for (const auto& f : listing()) {
    if (before.count(f)) continue;
    EXPECT_EQ(f.rfind(out.string(), 0), 0u) << f;
  }
  // Exactly one manifest per output directory.
  int manifests = 0;
  for (const auto& e : fs::directory_iterator(out)) manifests += e.path().filename() == "manifest.json";
  EXPECT_EQ(manifests, 1);
}

}  // namespace
}  // namespace seqsynth
