// Copyright 2026 The sasv-fuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "sasvfuse/cli.hpp"

namespace sasv {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sasv_fuse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sasv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small dataset and model so an end-to-end run takes well under a second.
  std::vector<std::string> small(const std::string& data, const std::string& out) const {
    return {"--set", "synth.n_speakers=8",    "--set", "synth.utts_per_speaker=8",
            "--set", "synth.asv_dims=4,4",    "--set", "synth.cm_dims=3,5",
            "--set", "model.d_h=4",           "--set", "model.cm_block_dims=8",
            "--set", "model.predictor_dims=4", "--set", "train.epochs=3",
            "--set", "train.lr=0.001",        "--set", "train.record_time=false",
            "--set", "paths.data_dir=" + data, "--set", "paths.out_dir=" + out};
  }

  static std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndDefaults) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  const auto d = run_cli({"defaults"});
  EXPECT_EQ(d.code, 0);
  EXPECT_NE(d.out.find("[synth]"), std::string::npos);
  EXPECT_NE(d.out.find("pool = TAP"), std::string::npos);
  // The dump parses back to the defaults.
  const RunConfig back = parse_run_config_text(d.out, "dump");
  EXPECT_EQ(dump_run_config(back), d.out);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"synth", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--split", "test"}).code, 2);
  EXPECT_EQ(run_cli({"synth", "--set", "synth.nope=1"}).code, 2);
  EXPECT_EQ(run_cli({"synth", "--set", "model.pool=MAX"}).code, 2);
}

TEST_F(Cli, InvalidSynthSpecWritesNothing) {
  const auto r = run_cli({"synth", "-o", path("data"), "--set", "synth.n_speakers=0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kind=config"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("data")));
}

TEST_F(Cli, MissingDataIsExitThree) {
  const auto r = run_cli({"train", "--set", "paths.data_dir=" + path("nothing")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("kind="), std::string::npos);
}

TEST_F(Cli, SynthIsByteIdentical) {
  const auto a = run_cli(cat({"synth"}, small(path("a"), path("o"))));
  const auto b = run_cli(cat({"synth"}, small(path("b"), path("o"))));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"train.protocol", "dev.protocol", "eval.protocol", "enroll.map",
                        "asv_0.emb", "asv_1.emb", "cm_0.emb", "cm_1.emb"}) {
    EXPECT_EQ(read_text_file(path("a") + "/" + f), read_text_file(path("b") + "/" + f)) << f;
  }
  EXPECT_FALSE(fs::exists(path("a") + "/asv_2.emb"));
}

TEST_F(Cli, TrainEvalBaselineHistEnsemble) {
  const auto args = small(path("data"), path("out"));
  ASSERT_EQ(run_cli(cat({"synth"}, args)).code, 0);
  const auto t = run_cli(cat({"train"}, args));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(path("out") + "/model.ckpt"));
  const std::string log = read_text_file(path("out") + "/train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,loss,sv_eer,spf_eer,sasv_eer,seconds");

  const auto e = run_cli(cat({"eval", "--split", "dev"}, args));
  ASSERT_EQ(e.code, 0) << e.err;
  const std::string scores = path("out") + "/dev_scores.csv";
  const std::string report = path("out") + "/dev_report.csv";
  EXPECT_TRUE(fs::exists(scores));
  EXPECT_NE(read_text_file(report).find("sasv_eer,"), std::string::npos);

  for (const char* kind : {"asv", "cm", "sum"}) {
    EXPECT_EQ(run_cli(cat({"baseline", "--kind", kind}, args)).code, 0) << kind;
    EXPECT_TRUE(fs::exists(path("out") + "/eval_" + kind + "_scores.csv"));
  }

  EXPECT_EQ(run_cli({"hist", "--scores", scores, "--bins", "5", "-o", path("h.csv")}).code, 0);
  EXPECT_NE(read_text_file(path("h.csv")).find("bin_lo,bin_hi"), std::string::npos);

  // A one-member ensemble reproduces the member's scores and report.
  const auto en = run_cli({"ensemble", "--scores", scores, "-o", path("ens.csv"), "--report",
                           path("ens_report.csv")});
  ASSERT_EQ(en.code, 0) << en.err;
  EXPECT_EQ(read_text_file(path("ens.csv")), read_text_file(scores));
  EXPECT_EQ(read_text_file(path("ens_report.csv")), read_text_file(report));

  const auto bad_k = run_cli({"ensemble", "--scores", scores, "-k", "2", "-o", path("x.csv"),
                              "--report", path("y.csv")});
  EXPECT_EQ(bad_k.code, 2);
}

TEST_F(Cli, EvalWithMismatchedCheckpointIsConfigError) {
  const auto args = small(path("data"), path("out"));
  ASSERT_EQ(run_cli(cat({"synth"}, args)).code, 0);
  ASSERT_EQ(run_cli(cat({"train"}, args)).code, 0);
  auto other = small(path("data2"), path("out2"));
  other.insert(other.end(), {"--set", "synth.cm_dims=3,6"});
  ASSERT_EQ(run_cli(cat({"synth"}, other)).code, 0);
  const auto r = run_cli(cat({"eval", "--checkpoint", path("out") + "/model.ckpt"}, other));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
}

TEST_F(Cli, ConfigFile) {
  write_text_file(path("run.cfg"),
                  "# experiment\n[synth]\nn_speakers = 8\n\n[model]\npool = ASP\n");
  const RunConfig c = load_run_config(path("run.cfg"));
  EXPECT_EQ(c.synth.n_speakers, 8u);
  EXPECT_EQ(c.model.pool.mode, PoolMode::kAsp);
  EXPECT_THROW(parse_run_config_text("[synth]\nspeakers = 3\n", "f"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[optim]\nlr = 3\n", "f"), ConfigError);
  EXPECT_THROW(parse_run_config_text("n_speakers = 3\n", "f"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[train]\nepochs = many\n", "f"), ConfigError);
  write_text_file(path("bad.cfg"), "[synth]\nbogus = 1\n");
  const auto r = run_cli({"synth", "-c", path("bad.cfg"), "-o", path("d")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.cfg:2"), std::string::npos);
}

TEST_F(Cli, SelftestPasses) {
  const auto r = run_cli({"selftest"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace sasv
