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

#include "sasvfuse/ensemble.hpp"

namespace sasv {
namespace {

SystemScores system(std::string id, std::vector<double> scores) {
  const TrialLabel labels[] = {TrialLabel::kTarget, TrialLabel::kNontarget, TrialLabel::kSpoof};
  SystemScores s{std::move(id), {}};
  for (std::size_t i = 0; i < scores.size(); ++i) s.scores.push_back({i, scores[i], labels[i % 3]});
  return s;
}

EvalReport report_with_sasv(double e) {
  EvalReport r;
  r.sasv = MetricResult{e, 0.0, 1, 1};
  return r;
}

TEST(EnsembleMean, AveragesPerTrial) {
  const std::vector<SystemScores> s{system("a", {0.2, 0.4, 0.9}), system("b", {0.6, 0.0, 0.3})};
  const SystemScores m = ensemble_mean(s);
  ASSERT_EQ(m.scores.size(), 3u);
  EXPECT_NEAR(m.scores[0].score, 0.4, 1e-15);
  EXPECT_NEAR(m.scores[1].score, 0.2, 1e-15);
  EXPECT_NEAR(m.scores[2].score, 0.6, 1e-15);
  EXPECT_EQ(m.scores[2].label, TrialLabel::kSpoof);
}

TEST(EnsembleMean, SingleSystemAndCopiesAreNoOps) {
  const SystemScores a = system("a", {0.125, 0.5, 0.75, 0.25});
  EXPECT_EQ(ensemble_mean(std::vector{a}).scores, a.scores);
  EXPECT_EQ(ensemble_mean(std::vector{a, a, a, a}).scores, a.scores);
}

TEST(EnsembleMean, MemberOrderDoesNotMatter) {
  Rng rng(1);
  std::vector<SystemScores> s;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> v(30);
    for (double& x : v) x = rng.uniform();
    s.push_back(system("s" + std::to_string(k), v));
  }
  const auto a = ensemble_mean(s);
  std::reverse(s.begin(), s.end());
  const auto b = ensemble_mean(s);
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    EXPECT_NEAR(a.scores[i].score, b.scores[i].score, 1e-15);
  }
}

TEST(EnsembleMean, MismatchNamesTheIndex) {
  SystemScores a = system("a", {0.1, 0.2, 0.3});
  SystemScores b = system("b", {0.1, 0.2, 0.3});
  b.scores[1].label = TrialLabel::kTarget;
  try {
    ensemble_mean(std::vector{a, b});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
  EXPECT_THROW(ensemble_mean(std::vector{a, system("c", {0.1})}), ConfigError);
  EXPECT_THROW(ensemble_mean(std::vector<SystemScores>{}), ConfigError);
}

TEST(TopK, PicksLowestSasvEer) {
  const std::vector<std::pair<std::string, EvalReport>> r{
      {"a", report_with_sasv(0.3)}, {"b", report_with_sasv(0.1)}, {"c", report_with_sasv(0.2)}};
  EXPECT_EQ(select_top_k(r, 1), (std::vector<std::string>{"b"}));
  EXPECT_EQ(select_top_k(r, 2), (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(select_top_k(r, 3).size(), 3u);
}

TEST(TopK, TiesBreakById) {
  const std::vector<std::pair<std::string, EvalReport>> r{
      {"z", report_with_sasv(0.1)}, {"m", report_with_sasv(0.1)}, {"a", report_with_sasv(0.5)}};
  EXPECT_EQ(select_top_k(r, 2), (std::vector<std::string>{"m", "z"}));
}

TEST(TopK, BadK) {
  const std::vector<std::pair<std::string, EvalReport>> r{{"a", report_with_sasv(0.1)}};
  EXPECT_THROW(select_top_k(r, 0), ConfigError);
  EXPECT_THROW(select_top_k(r, 2), ConfigError);
}

TEST(ScoreCsv, RoundTripIsExact) {
  SystemScores s = system("x", {0.1, 1.0 / 3.0, 2e-300, 0.7});
  const auto back = parse_scores_csv(scores_csv(s.scores), "x");
  EXPECT_EQ(back, s.scores);
}

TEST(ScoreCsv, Errors) {
  EXPECT_THROW(parse_scores_csv("", "f"), FormatError);
  EXPECT_THROW(parse_scores_csv("idx,score,label\n", "f"), FormatError);
  EXPECT_THROW(parse_scores_csv("trial_index,score,label\n0,0.1\n", "f"), FormatError);
  EXPECT_THROW(parse_scores_csv("trial_index,score,label\n0,abc,target\n", "f"), FormatError);
  EXPECT_THROW(parse_scores_csv("trial_index,score,label\n0,0.1,bona\n", "f"), FormatError);
}

}  // namespace
}  // namespace sasv
