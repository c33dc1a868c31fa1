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

#include <cmath>

#include "sasvfuse/fusion_model.hpp"
#include "sasvfuse/testing/oracles.hpp"

namespace sasv {
namespace {

ModelConfig small_config(PoolMode mode) {
  ModelConfig c;
  c.m = 2;
  c.n = 3;
  c.cm_input_dims = {5, 3, 4};
  c.pool.mode = mode;
  c.pool.d_h = 4;
  c.pool.d_a = 3;
  c.cm_block_dims = {6};
  c.predictor_dims = {5};
  return c;
}

TrialFeatures random_features(Rng& rng, const ModelConfig& c, TrialLabel label) {
  TrialFeatures f;
  f.label = label;
  for (std::size_t i = 0; i < c.m; ++i) f.asv_scores.push_back(rng.uniform(-1, 1));
  for (auto d : c.cm_input_dims) {
    Vec v(d);
    for (double& x : v) x = rng.normal();
    f.cm_embeddings.push_back(std::move(v));
  }
  return f;
}

TEST(Labels, DecisionAndCmTargets) {
  EXPECT_EQ(decision_label(TrialLabel::kTarget), 1u);
  EXPECT_EQ(decision_label(TrialLabel::kNontarget), 0u);
  EXPECT_EQ(decision_label(TrialLabel::kSpoof), 0u);
  EXPECT_EQ(cm_label(CmLabelScheme::kTargetVsRest, TrialLabel::kNontarget), 0u);
  EXPECT_EQ(cm_label(CmLabelScheme::kBonafideVsSpoof, TrialLabel::kNontarget), 1u);
  EXPECT_EQ(cm_label(CmLabelScheme::kBonafideVsSpoof, TrialLabel::kSpoof), 0u);
}

TEST(Model, ZeroParametersScoreOneHalf) {
  const ModelConfig c = small_config(PoolMode::kAsp);
  Rng rng(1);
  const FusionParams z = init_model(c, rng).zeros_like();
  const TrialFeatures f = random_features(rng, c, TrialLabel::kTarget);
  EXPECT_EQ(final_score(f, z, c), 0.5);
  EXPECT_NEAR(loss_and_grads(f, z, c).loss, 2.0 * std::log(2.0), 1e-15);
}

TEST(Model, TinyForwardMatchesReferenceValue) {
  // m = 1, n = 1, d_h = 4, no hidden layers, seed 42. The reference value
  // comes from a separate SplitMix64 + scalar-loop implementation that
  // repeats the same draws in parameter order.
  ModelConfig c;
  c.m = 1;
  c.n = 1;
  c.cm_input_dims = {3};
  c.pool.mode = PoolMode::kTap;
  c.pool.d_h = 4;
  c.cm_block_dims = {};
  c.predictor_dims = {};
  Rng rng(42);
  const FusionParams p = init_model(c, rng);
  TrialFeatures f;
  f.asv_scores = {0.3};
  f.cm_embeddings = {{0.5, -1.0, 2.0}};
  const ForwardTrace tr = forward(f, p, c);
  EXPECT_NEAR(tr.s_cm[0], -0.633756612891869, 1e-12);
  EXPECT_NEAR(tr.s_cm[1], -0.2552924534318916, 1e-12);
  EXPECT_NEAR(tr.y_hat[0], -0.03707696139003697, 1e-12);
  EXPECT_NEAR(tr.y_hat[1], 0.1775952452612004, 1e-12);
  EXPECT_NEAR(tr.final_score, 0.553462893159818, 1e-12);
}

TEST(Model, LossIsWeightedSumOfCrossEntropies) {
  ModelConfig c = small_config(PoolMode::kTsp);
  c.cm_loss_weight = 0.3;
  c.pred_loss_weight = 2.0;
  Rng rng(2);
  const FusionParams p = init_model(c, rng);
  const TrialFeatures f = random_features(rng, c, TrialLabel::kSpoof);
  const ForwardTrace tr = forward(f, p, c);
  const double ref = 0.3 * cross_entropy(tr.s_cm, 0).loss + 2.0 * cross_entropy(tr.y_hat, 0).loss;
  EXPECT_NEAR(loss_and_grads(f, p, c).loss, ref, 1e-14);
  EXPECT_GT(tr.final_score, 0.0);
  EXPECT_LT(tr.final_score, 1.0);
}

class ModelGradients : public ::testing::TestWithParam<PoolMode> {};

TEST_P(ModelGradients, MatchFiniteDifferences) {
  const ModelConfig c = small_config(GetParam());
  Rng rng(10 + static_cast<int>(GetParam()));
  double worst = 0.0;
  std::size_t checked = 0;
  for (int inst = 0; inst < 25; ++inst) {
    const FusionParams p = init_model(c, rng);
    const auto label = static_cast<TrialLabel>(rng.below(3));
    const auto gc = testing::check_model_gradients(random_features(rng, c, label), p, c);
    worst = std::max(worst, gc.max_rel_error);
    checked += gc.checked;
  }
  EXPECT_LT(worst, 1e-5);
  EXPECT_GT(checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllModes, ModelGradients,
                         ::testing::Values(PoolMode::kCat, PoolMode::kTap, PoolMode::kTsp,
                                           PoolMode::kSap, PoolMode::kAsp),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Model, GradientsWithoutCmLoss) {
  ModelConfig c = small_config(PoolMode::kSap);
  c.cm_loss_weight = 0.0;
  c.cm_labels = CmLabelScheme::kBonafideVsSpoof;
  Rng rng(3);
  for (int inst = 0; inst < 10; ++inst) {
    const FusionParams p = init_model(c, rng);
    const auto gc = testing::check_model_gradients(random_features(rng, c, TrialLabel::kTarget), p, c);
    EXPECT_LT(gc.max_rel_error, 1e-5);
  }
}

TEST(Model, AveragePoolingIgnoresCmOrderWhenInputsMatch) {
  // Same input dims so the CM models can be swapped along with their projections.
  for (PoolMode mode : {PoolMode::kTap, PoolMode::kTsp}) {
    ModelConfig c = small_config(mode);
    c.cm_input_dims = {4, 4, 4};
    Rng rng(4);
    const FusionParams p = init_model(c, rng);
    const TrialFeatures f = random_features(rng, c, TrialLabel::kTarget);
    FusionParams q = p;
    TrialFeatures g = f;
    std::swap(q.proj[0], q.proj[2]);
    std::swap(g.cm_embeddings[0], g.cm_embeddings[2]);
    EXPECT_NEAR(final_score(f, p, c), final_score(g, q, c), 1e-14);
  }
}

TEST(Model, FeatureShapeErrors) {
  const ModelConfig c = small_config(PoolMode::kTap);
  Rng rng(5);
  const FusionParams p = init_model(c, rng);
  TrialFeatures f = random_features(rng, c, TrialLabel::kTarget);
  f.asv_scores.pop_back();
  EXPECT_THROW(forward(f, p, c), ConfigError);
  f = random_features(rng, c, TrialLabel::kTarget);
  f.cm_embeddings[1].push_back(0.0);
  EXPECT_THROW(forward(f, p, c), ConfigError);
  ModelConfig bad = c;
  bad.cm_input_dims = {5};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (PoolMode mode : {PoolMode::kCat, PoolMode::kAsp}) {
    ModelConfig c = small_config(mode);
    c.cm_loss_weight = 0.25;
    c.cm_labels = CmLabelScheme::kBonafideVsSpoof;
    Rng rng(6);
    const FusionParams p = init_model(c, rng);
    const std::string bytes = encode_checkpoint(c, p);
    EXPECT_EQ(bytes.substr(0, 8), "SASVCKPT");
    const Checkpoint ck = decode_checkpoint(bytes, "x");
    EXPECT_EQ(ck.config, c);
    EXPECT_EQ(ck.params, p);
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  const ModelConfig c = small_config(PoolMode::kTap);
  Rng rng(7);
  const std::string bytes = encode_checkpoint(c, init_model(c, rng));
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3), "x"), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + std::string(1, '\0'), "x"), FormatError);
  std::string bad = bytes;
  bad[0] = 'Z';
  EXPECT_THROW(decode_checkpoint(bad, "x"), FormatError);
}

TEST(Baselines, ScoreSum) {
  EXPECT_NEAR(score_sum_baseline(Vec{0.2, 0.4}, 0.5), 0.8, 1e-15);
  EXPECT_NEAR(score_sum_baseline(Vec{-1.0}, 1.0), 0.0, 1e-15);
  EXPECT_THROW(score_sum_baseline(Vec{}, 1.0), ConfigError);
}

TEST(Baselines, CentroidScorerSeparatesClusters) {
  std::vector<TrialFeatures> train;
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    TrialFeatures f;
    f.asv_scores = {0.0};
    const bool spoof = i % 2 == 1;
    f.label = spoof ? TrialLabel::kSpoof : TrialLabel::kTarget;
    f.cm_embeddings = {{(spoof ? -3.0 : 3.0) + rng.normal(), rng.normal()}};
    train.push_back(f);
  }
  const auto sc = CentroidCmScorer::fit(train);
  TrialFeatures bona{{0.0}, {{3.0, 0.0}}, TrialLabel::kTarget};
  TrialFeatures spf{{0.0}, {{-3.0, 0.0}}, TrialLabel::kSpoof};
  EXPECT_GT(sc.score(bona), 0.0);
  EXPECT_LT(sc.score(spf), 0.0);
}

}  // namespace
}  // namespace sasv
