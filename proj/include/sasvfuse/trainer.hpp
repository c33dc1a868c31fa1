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

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sasvfuse/dataio.hpp"
#include "sasvfuse/fusion_model.hpp"
#include "sasvfuse/metrics.hpp"
#include "sasvfuse/numerics.hpp"

namespace sasv {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 40;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  bool shuffle = true;
  bool select_on_dev = true;  // keep the epoch with the lowest dev SASV-EER
  unsigned threads = 1;
  bool record_time = true;  // off: seconds column is 0 and logs are reproducible

  void validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw ConfigError("train: lr must be a positive finite number");
    }
  }
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean training loss over the epoch's trials
  double sv_eer = std::nan("");
  double spf_eer = std::nan("");
  double sasv_eer = std::nan("");
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0 when no dev selection took place
  std::size_t optimizer_steps = 0;
};

/// CSV with header `epoch,loss,sv_eer,spf_eer,sasv_eer,seconds`.
inline std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,loss,sv_eer,spf_eer,sasv_eer,seconds\n";
  for (const auto& e : log.epochs) {
    out += std::to_string(e.epoch) + ',' + format_real(e.loss) + ',' +
           format_real(e.sv_eer) + ',' + format_real(e.spf_eer) + ',' +
           format_real(e.sasv_eer) + ',' + format_real(e.seconds) + '\n';
  }
  return out;
}

struct ScoreRow {
  std::size_t trial_index = 0;
  double score = 0.0;
  TrialLabel label = TrialLabel::kTarget;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

inline std::vector<ScoreRow> evaluate_scores(std::span<const TrialFeatures> feats,
                                             const FusionParams& params,
                                             const ModelConfig& cfg,
                                             unsigned threads = 1) {
  std::vector<ScoreRow> rows(feats.size());
  parallel_for(feats.size(), threads, [&](std::size_t i) {
    rows[i] = {i, final_score(feats[i], params, cfg), feats[i].label};
  });
  return rows;
}

inline std::vector<ScoredTrial> to_scored(std::span<const ScoreRow> rows) {
  std::vector<ScoredTrial> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.score, r.label});
  return out;
}

/// Mean loss and mean gradient over the trials at `indices`. Per-trial
/// gradients are summed in index order, so the result does not depend on
/// the thread count.
inline LossGrads batch_loss_and_grads(std::span<const TrialFeatures> feats,
                                      std::span<const std::size_t> indices,
                                      const FusionParams& params,
                                      const ModelConfig& cfg,
                                      unsigned threads = 1) {
  std::vector<LossGrads> per(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    per[k] = loss_and_grads(feats[indices[k]], params, cfg);
  });
  LossGrads total;
  total.grads = params.zeros_like();
  std::vector<double> acc(parameter_count(params), 0.0);
  for (const auto& lg : per) {
    total.loss += lg.loss;
    std::size_t off = 0;
    lg.grads.for_each_tensor([&](const Mat& t) {
      for (double x : t.data) acc[off++] += x;
    });
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  total.loss *= inv;
  for (double& x : acc) x *= inv;
  unflatten(std::span<const double>(acc), total.grads);
  return total;
}

struct TrainResult {
  FusionParams params;
  TrainLog log;
};

/// Mini-batch Adam. Each epoch shuffles with a seeded generator, trains on
/// every batch including a final partial one, then scores the dev set.
/// Returns the parameters of the epoch with the lowest dev SASV-EER (ties go
/// to the earlier epoch), or the last epoch when selection is off.
inline TrainResult train(std::span<const TrialFeatures> train_set,
                         std::span<const TrialFeatures> dev_set,
                         const ModelConfig& model_cfg,
                         const TrainConfig& train_cfg) {
  model_cfg.validate();
  train_cfg.validate();
  if (train_set.empty()) throw DegenerateInputError("train: empty training set");
  const bool select = train_cfg.select_on_dev;
  if (select && dev_set.empty()) {
    throw DegenerateInputError("train: dev set required for model selection");
  }
  for (const auto& f : train_set) check_features(f, model_cfg);
  for (const auto& f : dev_set) check_features(f, model_cfg);

  // Separate streams so changing the shuffle flag does not change the init.
  Rng init_rng(train_cfg.seed);
  Rng shuffle_rng(train_cfg.seed ^ 0x5DEECE66DULL);

  TrainResult result;
  FusionParams params = init_model(model_cfg, init_rng);
  AdamState adam;
  adam.lr = train_cfg.lr;

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (train_cfg.shuffle) shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += train_cfg.batch_size) {
      ++batch_no;
      const std::size_t hi = std::min(order.size(), lo + train_cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      LossGrads lg = batch_loss_and_grads(train_set, idx, params, model_cfg,
                                          train_cfg.threads);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("non-finite training loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
      loss_sum += lg.loss * static_cast<double>(hi - lo);
      adam_step(adam, params, lg.grads);
      ++result.log.optimizer_steps;
    }

    EpochLog e;
    e.epoch = epoch;
    e.loss = loss_sum / static_cast<double>(order.size());
    if (!dev_set.empty()) {
      const auto rows = evaluate_scores(dev_set, params, model_cfg, train_cfg.threads);
      const auto scored = to_scored(rows);
      const EvalReport rep = eval_report(scored);
      if (rep.sv) e.sv_eer = rep.sv->eer;
      if (rep.spf) e.spf_eer = rep.spf->eer;
      if (rep.sasv) e.sasv_eer = rep.sasv->eer;
    }
    if (train_cfg.record_time) {
      e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.epochs.push_back(e);

    if (select && std::isfinite(e.sasv_eer) && e.sasv_eer < best) {
      best = e.sasv_eer;
      result.log.best_epoch = epoch;
      result.params = params;
    }
  }
  if (result.log.best_epoch == 0) result.params = std::move(params);
  return result;
}

}  // namespace sasv
