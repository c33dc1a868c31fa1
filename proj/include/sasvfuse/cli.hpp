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

// The sasv_fuse command line: synth, train, eval, baseline, hist, ensemble,
// selftest and defaults. Each command is also callable in-process.

#pragma once

#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sasvfuse/dataio.hpp"
#include "sasvfuse/ensemble.hpp"
#include "sasvfuse/errors.hpp"
#include "sasvfuse/fusion_model.hpp"
#include "sasvfuse/metrics.hpp"
#include "sasvfuse/run_config.hpp"
#include "sasvfuse/testing/oracles.hpp"
#include "sasvfuse/trainer.hpp"

namespace sasv::cli {

namespace fs = std::filesystem;

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'");
  }
}

inline std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// synth

/// Writes train/dev/eval protocols, the enrollment map and one embedding
/// file per model into paths.data_dir. Returns the written paths.
inline std::vector<std::string> cmd_synth(const RunConfig& cfg) {
  cfg.synth.validate();
  const SynthData data = generate_synthetic(cfg.synth);
  const std::string& dir = cfg.paths.data_dir;
  ensure_dir(dir);
  std::vector<std::string> written;
  for (Split s : {Split::kTrain, Split::kDev, Split::kEval}) {
    const auto path = in_dir(dir, std::string(to_string(s)) + ".protocol");
    write_text_file(path, serialize_protocol(data.split(s)));
    written.push_back(path);
  }
  const auto enroll = in_dir(dir, "enroll.map");
  write_text_file(enroll, serialize_enrollment(data.enrollment));
  written.push_back(enroll);
  for (const auto& st : data.asv_stores) {
    written.push_back(in_dir(dir, st.model_id() + ".emb"));
    write_embeddings(st, written.back());
  }
  for (const auto& st : data.cm_stores) {
    written.push_back(in_dir(dir, st.model_id() + ".emb"));
    write_embeddings(st, written.back());
  }
  return written;
}

// ---------------------------------------------------------------------------
// Loading a dataset described by [paths].

struct Dataset {
  std::vector<EmbeddingStore> asv;
  std::vector<EmbeddingStore> cm;
  EnrollmentMap enrollment;

  std::vector<std::size_t> cm_dims() const {
    std::vector<std::size_t> d;
    for (const auto& s : cm) d.push_back(s.dim());
    return d;
  }
};

inline std::vector<std::string> embedding_paths(const std::vector<std::string>& explicit_paths,
                                                const std::string& dir,
                                                const std::string& prefix) {
  if (!explicit_paths.empty()) return explicit_paths;
  std::vector<std::string> out;
  for (std::size_t k = 0;; ++k) {
    const auto p = in_dir(dir, prefix + std::to_string(k) + ".emb");
    if (!fs::exists(p)) break;
    out.push_back(p);
  }
  if (out.empty()) {
    throw LookupError("no " + prefix + "<k>.emb files in '" + dir + "'");
  }
  return out;
}

inline std::string protocol_path(const RunConfig& cfg, Split s) {
  const std::string& p = s == Split::kTrain ? cfg.paths.train_protocol
                         : s == Split::kDev ? cfg.paths.dev_protocol
                                            : cfg.paths.eval_protocol;
  return p.empty() ? in_dir(cfg.paths.data_dir, std::string(to_string(s)) + ".protocol") : p;
}

inline Dataset load_dataset(const RunConfig& cfg) {
  Dataset ds;
  for (const auto& p : embedding_paths(cfg.paths.asv_embeddings, cfg.paths.data_dir, "asv_")) {
    ds.asv.push_back(read_embeddings(p));
  }
  for (const auto& p : embedding_paths(cfg.paths.cm_embeddings, cfg.paths.data_dir, "cm_")) {
    ds.cm.push_back(read_embeddings(p));
  }
  const std::string enroll = cfg.paths.enroll_map.empty()
                                 ? in_dir(cfg.paths.data_dir, "enroll.map")
                                 : cfg.paths.enroll_map;
  ds.enrollment = parse_enrollment(enroll);
  return ds;
}

inline std::vector<TrialFeatures> split_features(const RunConfig& cfg, const Dataset& ds,
                                                 Split s) {
  const auto trials = parse_protocol(protocol_path(cfg, s));
  return assemble_features(trials, ds.asv, ds.cm, ds.enrollment, cfg.train.threads);
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "eval") return Split::kEval;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// train / eval / baseline

struct TrainOutputs {
  std::string checkpoint;
  std::string log;
  TrainLog train_log;
};

inline TrainOutputs cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = load_dataset(cfg);
  const ModelConfig mcfg = cfg.model.instantiate(ds.asv.size(), ds.cm_dims());
  const auto train_set = split_features(cfg, ds, Split::kTrain);
  const auto dev_set = split_features(cfg, ds, Split::kDev);
  TrainResult res = train(train_set, dev_set, mcfg, cfg.train);

  ensure_dir(cfg.paths.out_dir);
  TrainOutputs o;
  o.checkpoint = in_dir(cfg.paths.out_dir, "model.ckpt");
  o.log = in_dir(cfg.paths.out_dir, "train_log.csv");
  write_checkpoint(o.checkpoint, mcfg, res.params);
  write_text_file(o.log, train_log_csv(res.log));
  out << "trained " << res.log.epochs.size() << " epochs, "
      << res.log.optimizer_steps << " steps; best dev epoch "
      << res.log.best_epoch << "\n"
      << "wrote " << o.checkpoint << "\nwrote " << o.log << "\n";
  o.train_log = std::move(res.log);
  return o;
}

struct EvalOutputs {
  std::string scores;
  std::string report;
  EvalReport eval;
};

inline EvalOutputs write_eval_outputs(const RunConfig& cfg, const std::string& stem,
                                      const std::vector<ScoreRow>& rows,
                                      std::ostream& out) {
  ensure_dir(cfg.paths.out_dir);
  EvalOutputs o;
  o.scores = in_dir(cfg.paths.out_dir, stem + "_scores.csv");
  o.report = in_dir(cfg.paths.out_dir, stem + "_report.csv");
  const auto scored = to_scored(rows);
  o.eval = eval_report(scored);
  write_scores(o.scores, rows);
  const std::string rep = report_csv(o.eval);
  write_text_file(o.report, rep);
  out << rep << "wrote " << o.scores << "\nwrote " << o.report << "\n";
  return o;
}

inline EvalOutputs cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
                            Split split, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(checkpoint);
  const Dataset ds = load_dataset(cfg);
  const auto dims = ds.cm_dims();
  if (ck.config.m != ds.asv.size() || ck.config.cm_input_dims != dims) {
    throw ConfigError("checkpoint '" + checkpoint + "' expects m=" +
                      std::to_string(ck.config.m) + " CM dims [" +
                      detail::join_dims(ck.config.cm_input_dims) +
                      "], data provides m=" + std::to_string(ds.asv.size()) +
                      " CM dims [" + detail::join_dims(dims) + "]");
  }
  const auto feats = split_features(cfg, ds, split);
  const auto rows = evaluate_scores(feats, ck.params, ck.config, cfg.train.threads);
  return write_eval_outputs(cfg, to_string(split), rows, out);
}

enum class BaselineKind { kAsv, kCm, kSum };

/// Single-objective and score-sum comparison systems. The CM scorer is fit
/// on the train split.
inline EvalOutputs cmd_baseline(const RunConfig& cfg, BaselineKind kind, Split split,
                                std::ostream& out) {
  const Dataset ds = load_dataset(cfg);
  const auto feats = split_features(cfg, ds, split);
  std::optional<CentroidCmScorer> cm;
  if (kind != BaselineKind::kAsv) {
    const auto train_feats = split_features(cfg, ds, Split::kTrain);
    cm = CentroidCmScorer::fit(train_feats);
  }
  std::vector<ScoreRow> rows(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    double s = 0.0;
    switch (kind) {
      case BaselineKind::kAsv: s = asv_mean_score(feats[i]); break;
      case BaselineKind::kCm: s = cm->score(feats[i]); break;
      case BaselineKind::kSum:
        s = score_sum_baseline(feats[i].asv_scores, cm->score(feats[i]));
        break;
    }
    rows[i] = {i, s, feats[i].label};
  }
  const char* name = kind == BaselineKind::kAsv ? "asv" : kind == BaselineKind::kCm ? "cm" : "sum";
  return write_eval_outputs(cfg, std::string(to_string(split)) + "_" + name, rows, out);
}

// ---------------------------------------------------------------------------
// hist / ensemble

inline HistogramData cmd_hist(const std::string& scores_path, std::size_t bins,
                              const std::string& out_path, std::ostream& out) {
  const SystemScores s = read_scores(scores_path);
  const auto scored = to_scored(s.scores);
  HistogramData h = histogram(scored, bins);
  write_text_file(out_path, histogram_csv(h));
  out << "wrote " << out_path << "\n";
  return h;
}

struct EnsembleOutputs {
  std::vector<std::string> members;
  EvalReport eval;
};

/// Averages the given score files. With k > 0, only the k systems with the
/// lowest SASV-EER take part; the EER is measured on `select_paths` when
/// given (e.g. dev scores, one per system in the same order), else on the
/// score files themselves.
inline EnsembleOutputs cmd_ensemble(const std::vector<std::string>& paths, std::size_t k,
                                    const std::vector<std::string>& select_paths,
                                    const std::string& out_scores,
                                    const std::string& out_report, std::ostream& out) {
  if (paths.empty()) throw ConfigError("ensemble: no score files given");
  if (!select_paths.empty() && select_paths.size() != paths.size()) {
    throw ConfigError("ensemble: --select-scores needs one file per --scores file");
  }
  std::vector<SystemScores> systems;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    systems.push_back(read_scores(paths[i]));
    systems.back().system_id = paths[i];
  }
  std::vector<SystemScores> chosen = systems;
  if (k > 0) {
    std::vector<std::pair<std::string, EvalReport>> reports;
    for (std::size_t i = 0; i < systems.size(); ++i) {
      const auto& src = select_paths.empty() ? systems[i].scores
                                             : read_scores(select_paths[i]).scores;
      const auto scored = to_scored(src);
      reports.emplace_back(systems[i].system_id, eval_report(scored));
    }
    const auto ids = select_top_k(reports, k);
    chosen.clear();
    for (const auto& id : ids) {
      for (const auto& s : systems) {
        if (s.system_id == id) chosen.push_back(s);
      }
    }
  }
  const SystemScores ens = ensemble_mean(chosen);
  EnsembleOutputs o;
  for (const auto& s : chosen) o.members.push_back(s.system_id);
  const auto scored = to_scored(ens.scores);
  o.eval = eval_report(scored);
  write_scores(out_scores, ens.scores);
  const std::string rep = report_csv(o.eval);
  write_text_file(out_report, rep);
  for (const auto& m : o.members) out << "member " << m << "\n";
  out << rep << "wrote " << out_scores << "\nwrote " << out_report << "\n";
  return o;
}

// ---------------------------------------------------------------------------
// selftest

/// A reduced version of the gradient, EER and pooling oracle suites.
inline bool cmd_selftest(std::ostream& out, std::uint64_t seed = 7) {
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    ok = ok && pass;
  };
  Rng rng(seed);

  for (PoolMode mode : {PoolMode::kCat, PoolMode::kTap, PoolMode::kTsp, PoolMode::kSap,
                        PoolMode::kAsp}) {
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
      ModelConfig c;
      c.m = 2;
      c.n = 3;
      c.cm_input_dims = {5, 6, 7};
      c.pool = {mode, 4, 3, 1};
      c.cm_block_dims = {5};
      c.predictor_dims = {4};
      const FusionParams p = init_model(c, rng);
      TrialFeatures f;
      f.asv_scores = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      for (auto d : c.cm_input_dims) {
        Vec v(d);
        for (double& x : v) x = rng.normal();
        f.cm_embeddings.push_back(v);
      }
      f.label = static_cast<TrialLabel>(rng.below(3));
      worst = std::max(worst, testing::check_model_gradients(f, p, c).max_rel_error);
    }
    report(std::string("gradient-check ") + std::string(to_string(mode)), worst < 1e-5,
           "max rel err " + format_real(worst));
  }

  double eer_gap = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<double> pos(1 + rng.below(50)), neg(1 + rng.below(50));
    for (double& x : pos) x = std::round(rng.normal() * 4.0) / 4.0 + 0.5;
    for (double& x : neg) x = std::round(rng.normal() * 4.0) / 4.0;
    eer_gap = std::max(eer_gap, std::abs(eer(pos, neg).eer -
                                         testing::brute_force_eer(pos, neg).eer));
  }
  report("eer-oracle", eer_gap <= 1e-12, "max |diff| " + format_real(eer_gap));

  double degen = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    PoolConfig pc{PoolMode::kSap, 4, 3, 1};
    Mat h(4, 3);
    for (double& x : h.data) x = rng.normal();
    PoolParams zero{Mat(4, 3), Mat(3, 1)};
    for (double& x : zero.w2.data) x = rng.normal();
    const auto sap = pool_forward(h, pc, &zero).h_cm;
    pc.mode = PoolMode::kTap;
    const auto tap = pool_forward(h, pc, nullptr).h_cm;
    pc.mode = PoolMode::kAsp;
    const auto asp = pool_forward(h, pc, &zero).h_cm;
    pc.mode = PoolMode::kTsp;
    const auto tsp = pool_forward(h, pc, nullptr).h_cm;
    for (std::size_t j = 0; j < sap.size(); ++j) degen = std::max(degen, std::abs(sap[j] - tap[j]));
    for (std::size_t j = 0; j < asp.size(); ++j) degen = std::max(degen, std::abs(asp[j] - tsp[j]));
  }
  report("pool-degeneracy", degen <= 1e-9, "max |diff| " + format_real(degen));
  return ok;
}

// ---------------------------------------------------------------------------
// Entry point.

inline RunConfig resolve_config(const std::string& path,
                                const std::vector<std::string>& overrides,
                                unsigned threads) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  for (const auto& o : overrides) apply_override(cfg, o);
  apply_seed_env(cfg);
  cfg.train.threads = threads;
  return cfg;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Multi-model, multi-level fusion for spoofing-aware speaker verification",
               "sasv_fuse"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "Cap on worker threads; results do not depend on it")
      ->check(CLI::Range(1u, 1024u));

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Experiment config file (key = value, [sections])")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "Override one key: section.key=value (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset into paths.data_dir");
  add_config(synth);
  std::string synth_out;
  synth->add_option("-o,--out", synth_out, "Output directory (overrides paths.data_dir)");

  auto* trn = app.add_subcommand("train", "Train a fusion model; writes model.ckpt and train_log.csv");
  add_config(trn);

  auto* ev = app.add_subcommand("eval", "Score a split with a checkpoint; writes scores and report CSVs");
  add_config(ev);
  std::string ckpt;
  std::string split_name = "eval";
  ev->add_option("--checkpoint", ckpt, "Checkpoint (default <out_dir>/model.ckpt)");
  ev->add_option("--split", split_name, "train, dev or eval")
      ->check(CLI::IsMember({"train", "dev", "eval"}));

  auto* base = app.add_subcommand("baseline", "Score a split with a non-trained comparison system");
  add_config(base);
  std::string base_kind = "asv";
  base->add_option("--kind", base_kind, "asv (mean cosine), cm (centroid CM), sum (ASV mean + CM)")
      ->check(CLI::IsMember({"asv", "cm", "sum"}));
  base->add_option("--split", split_name, "train, dev or eval")
      ->check(CLI::IsMember({"train", "dev", "eval"}));

  auto* hist = app.add_subcommand("hist", "Per-class score histogram of a score CSV");
  std::string hist_in, hist_out;
  std::size_t bins = 50;
  hist->add_option("--scores", hist_in, "Score CSV (trial_index,score,label)")
      ->required()->check(CLI::ExistingFile);
  hist->add_option("--bins", bins, "Number of uniform bins")->check(CLI::Range(1u, 1000000u));
  hist->add_option("-o,--out", hist_out, "Histogram CSV to write")->required();

  auto* ens = app.add_subcommand("ensemble", "Mean-ensemble score CSVs, optionally the top-k");
  std::vector<std::string> ens_in, ens_select;
  std::size_t top_k = 0;
  std::string ens_out, ens_report;
  ens->add_option("--scores", ens_in, "Score CSVs of the member systems")
      ->required()->check(CLI::ExistingFile);
  ens->add_option("-k,--top-k", top_k, "Keep the k systems with lowest SASV-EER (0 = all)");
  ens->add_option("--select-scores", ens_select,
                  "Score CSVs used for top-k selection, one per --scores file")
      ->check(CLI::ExistingFile);
  ens->add_option("-o,--out", ens_out, "Ensembled score CSV to write")->required();
  ens->add_option("--report", ens_report, "Report CSV to write")->required();

  auto* self = app.add_subcommand("selftest", "Run the gradient, EER and pooling oracle checks");
  auto* defaults = app.add_subcommand("defaults", "Print a config file with every key at its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (defaults->parsed()) {
      out << dump_run_config(RunConfig{});
      return 0;
    }
    if (self->parsed()) return cmd_selftest(out) ? 0 : 4;
    if (hist->parsed()) {
      cmd_hist(hist_in, bins, hist_out, out);
      return 0;
    }
    if (ens->parsed()) {
      cmd_ensemble(ens_in, top_k, ens_select, ens_out, ens_report, out);
      return 0;
    }
    RunConfig cfg = resolve_config(config_path, overrides, threads);
    if (synth->parsed()) {
      if (!synth_out.empty()) cfg.paths.data_dir = synth_out;
      for (const auto& p : cmd_synth(cfg)) out << "wrote " << p << "\n";
      return 0;
    }
    if (trn->parsed()) {
      cmd_train(cfg, out);
      return 0;
    }
    const Split split = *parse_split(split_name);
    if (ev->parsed()) {
      cmd_eval(cfg, ckpt.empty() ? in_dir(cfg.paths.out_dir, "model.ckpt") : ckpt, split, out);
      return 0;
    }
    if (base->parsed()) {
      const BaselineKind kind = base_kind == "asv"  ? BaselineKind::kAsv
                                : base_kind == "cm" ? BaselineKind::kCm
                                                    : BaselineKind::kSum;
      cmd_baseline(cfg, kind, split, out);
      return 0;
    }
  } catch (const Error& e) {
    err << "sasv_fuse: error kind=" << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "sasv_fuse: error kind=internal: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace sasv::cli
