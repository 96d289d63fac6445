#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "mexa/dataset.hpp"

namespace mexa::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mexa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string synth(std::size_t n, double sep, const std::string& name = "data.jsonl") {
    const Result r = call({"synth", "--n", std::to_string(n), "--seed", "3", "--separability", std::to_string(sep),
                           "--d-mol", "6", "--d-dis", "5", "--d-txt", "7", "--out", path(name)});
    EXPECT_EQ(r.code, kOk) << r.err;
    return path(name);
  }

  std::vector<std::string> small_model() const {
    return {"--set", "d_model=8", "--set", "ffn=8", "--set", "layers=1", "--set", "epochs=3", "--set", "batch_size=16",
            "--set", "seed=4"};
  }

  fs::path dir_;
};

TEST_F(Cli, SynthWritesRequestedRecords) {
  const std::string p = synth(10, 1.0);
  EXPECT_EQ(data::load_dataset(p).records.size(), 10u);
  EXPECT_TRUE(fs::exists(p + ".synth.json"));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(call({"train", "--data", path("missing.jsonl"), "--out-dir", path("o")}).code, kUsage);
  EXPECT_EQ(call({}).code, kUsage);
  EXPECT_EQ(call({"synth", "--out", path("x")}).code, kUsage);
  EXPECT_EQ(call({"synth", "--n", "5", "--separability", "2", "--out", path("x")}).code, kUsage);
  EXPECT_EQ(call({"--help"}).code, kOk);
}

TEST_F(Cli, BadConfigIsARuntimeError) {
  const std::string data = synth(20, 1.0);
  const Result r = call({"train", "--data", data, "--out-dir", path("o"), "--set", "no_such_key=1"});
  EXPECT_EQ(r.code, kRuntime);
  EXPECT_NE(r.err.find("no_such_key"), std::string::npos);
}

TEST_F(Cli, TrainIsDeterministicAndWritesArtifacts) {
  const std::string data = synth(60, 1.0);
  std::vector<std::string> a{"train", "--data", data, "--out-dir", path("a")};
  std::vector<std::string> b{"train", "--data", data, "--out-dir", path("b")};
  for (const auto& s : small_model()) {
    a.push_back(s);
    b.push_back(s);
  }
  const Result ra = call(a), rb = call(b);
  ASSERT_EQ(ra.code, kOk) << ra.err;
  ASSERT_EQ(rb.code, kOk) << rb.err;
  const auto sa = nlohmann::json::parse(slurp(dir_ / "a" / "summary.json"));
  const auto sb = nlohmann::json::parse(slurp(dir_ / "b" / "summary.json"));
  EXPECT_EQ(sa.at("checkpoint_hash"), sb.at("checkpoint_hash"));
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  const auto resolved = nlohmann::json::parse(slurp(dir_ / "a" / "resolved_config.json"));
  EXPECT_EQ(resolved.at("d_model"), 8);
  EXPECT_EQ(resolved.at("seed"), 4);
}

TEST_F(Cli, EvalIsDeterministicAndChecksDims) {
  const std::string data = synth(60, 1.0);
  std::vector<std::string> t{"train", "--data", data, "--out-dir", path("t")};
  for (const auto& s : small_model()) t.push_back(s);
  ASSERT_EQ(call(t).code, kOk);
  const std::string ckpt = path("t/model.ckpt");
  const Result e1 = call({"eval", "--checkpoint", ckpt, "--data", data, "--out-dir", path("e")});
  const Result e2 = call({"eval", "--checkpoint", ckpt, "--data", data});
  ASSERT_EQ(e1.code, kOk) << e1.err;
  EXPECT_EQ(e1.out, e2.out);
  EXPECT_NE(e1.out.find("roc_auc\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "e" / "metrics.tsv"));
  EXPECT_TRUE(fs::exists(dir_ / "e" / "resolved_config.json"));

  const Result wrong = call({"synth", "--n", "10", "--d-mol", "4", "--d-dis", "5", "--d-txt", "7", "--out",
                             path("other.jsonl")});
  ASSERT_EQ(wrong.code, kOk);
  const Result mismatch = call({"eval", "--checkpoint", ckpt, "--data", path("other.jsonl")});
  EXPECT_EQ(mismatch.code, kRuntime);
  EXPECT_NE(mismatch.err.find("dims"), std::string::npos);
}

TEST_F(Cli, EvalOnTrainingDataOfOverfitRunHasHighF1) {
  const std::string data = synth(80, 1.0);
  ASSERT_EQ(call({"train", "--data", data, "--out-dir", path("t"), "--set", "d_model=8", "--set", "ffn=8",
                  "--set", "layers=1", "--set", "epochs=60", "--set", "batch_size=16", "--set", "validation_fraction=0",
                  "--set", "seed=1"})
                .code,
            kOk);
  const Result e = call({"eval", "--checkpoint", path("t/model.ckpt"), "--data", data, "--split", "train", "--set",
                         "bootstrap_fraction=1", "--set", "bootstrap_reps=1"});
  ASSERT_EQ(e.code, kOk) << e.err;
  std::istringstream rows(e.out);
  std::string metric;
  double mean = 0, sd = 0;
  std::string header;
  std::getline(rows, header);
  rows >> metric >> mean >> sd;
  ASSERT_EQ(metric, "f1");
  EXPECT_GT(mean, 0.9);
}

TEST_F(Cli, StatsWithTinyKeepHighThresholdSelectsEverything) {
  const std::string data = synth(30, 1.0);
  std::vector<std::string> t{"train", "--data", data, "--out-dir", path("t")};
  for (const auto& s : small_model()) t.push_back(s);
  ASSERT_EQ(call(t).code, kOk);
  const Result r = call({"stats", "--checkpoint", path("t/model.ckpt"), "--data", data, "--set",
                         "indicator_direction=keep_high", "--set", "threshold=1e-12", "--out-dir", path("s")});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream rows(r.out);
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "mode\tvalid_count\tindex\tselected\tsamples\tratio");
  std::size_t n = 0;
  while (std::getline(rows, line)) {
    ++n;
    EXPECT_EQ(line.substr(line.rfind('\t') + 1), "1") << line;
  }
  EXPECT_GT(n, 0u);
  EXPECT_EQ(slurp(dir_ / "s" / "token_usage.tsv"), r.out);
}

TEST_F(Cli, AblateWritesSummaryPerCell) {
  const std::string data = synth(50, 1.0);
  {
    std::ofstream g(path("grid.json"));
    g << R"({"cells": [{"name": "full", "set": {}},
                       {"name": "bce", "set": {"lambda_cauchy": 0, "lambda_contrastive": 0}}],
             "axes": {"seed": [1, 2]}})";
  }
  std::vector<std::string> a{"ablate", "--data", data, "--grid", path("grid.json"), "--out-dir", path("ab"),
                             "--jobs", "2", "--set", "d_model=8", "--set", "ffn=8", "--set", "layers=1",
                             "--set", "epochs=2", "--set", "batch_size=16"};
  const Result r = call(a);
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("full\t2\t"), std::string::npos);
  EXPECT_NE(r.out.find("bce\t2\t"), std::string::npos);
  const auto resolved = nlohmann::json::parse(slurp(dir_ / "ab" / "grid_resolved.json"));
  ASSERT_EQ(resolved.size(), 4u);
  EXPECT_EQ(resolved[2].at("name"), "bce|seed=1");
  EXPECT_EQ(resolved[2].at("config").at("lambda_cauchy"), 0.0);
  EXPECT_TRUE(fs::exists(dir_ / "ab" / "ablation_runs.tsv"));
}

}  // namespace
}  // namespace mexa::cli
