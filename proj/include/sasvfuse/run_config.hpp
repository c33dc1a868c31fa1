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

// Experiment configuration: a flat `key = value` file with [section]
// headers. Every key has a default; unknown sections or keys are errors.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sasvfuse/dataio.hpp"
#include "sasvfuse/errors.hpp"
#include "sasvfuse/fusion_model.hpp"
#include "sasvfuse/text.hpp"
#include "sasvfuse/trainer.hpp"

namespace sasv {

/// ModelConfig minus what the data determines (m, n, CM input dims).
struct ModelTemplate {
  PoolConfig pool;
  std::vector<std::size_t> cm_block_dims{64};
  std::vector<std::size_t> predictor_dims{16};
  double cm_loss_weight = 1.0;
  double pred_loss_weight = 1.0;
  CmLabelScheme cm_labels = CmLabelScheme::kTargetVsRest;

  ModelConfig instantiate(std::size_t m, std::vector<std::size_t> cm_dims) const {
    ModelConfig c;
    c.m = m;
    c.n = cm_dims.size();
    c.cm_input_dims = std::move(cm_dims);
    c.pool = pool;
    c.cm_block_dims = cm_block_dims;
    c.predictor_dims = predictor_dims;
    c.cm_loss_weight = cm_loss_weight;
    c.pred_loss_weight = pred_loss_weight;
    c.cm_labels = cm_labels;
    c.validate();
    return c;
  }
};

struct PathConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
  // Empty means "derive from data_dir".
  std::string train_protocol;
  std::string dev_protocol;
  std::string eval_protocol;
  std::string enroll_map;
  std::vector<std::string> asv_embeddings;
  std::vector<std::string> cm_embeddings;
};

struct RunConfig {
  SynthSpec synth;
  ModelTemplate model;
  TrainConfig train;
  PathConfig paths;
};

namespace detail {

struct ConfigKey {
  const char* section;
  const char* key;
  const char* help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline std::size_t to_count(std::string_view v, const std::string& key) {
  const auto c = parse_count(v);
  if (!c) throw ConfigError("'" + key + "': expected a non-negative integer, got '" + std::string(v) + "'");
  return static_cast<std::size_t>(*c);
}
inline double to_real(std::string_view v, const std::string& key) {
  const auto r = parse_real(v);
  if (!r) throw ConfigError("'" + key + "': expected a number, got '" + std::string(v) + "'");
  return *r;
}
inline bool to_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + std::string(v) + "'");
}
inline std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  for (auto p : split_on(v, ',')) out.emplace_back(trim(p));
  return out;
}
inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}
inline std::string bstr(bool b) { return b ? "true" : "false"; }

#define SASV_COUNT(sec, name, field, help)                                     \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) {                             \
              c.field = to_count(v, std::string(sec) + "." + name);            \
            },                                                                 \
            [](const RunConfig& c) { return std::to_string(c.field); }}
#define SASV_REAL(sec, name, field, help)                                      \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) {                             \
              c.field = to_real(v, std::string(sec) + "." + name);             \
            },                                                                 \
            [](const RunConfig& c) { return format_real(c.field); }}
#define SASV_BOOL(sec, name, field, help)                                      \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) {                             \
              c.field = to_bool(v, std::string(sec) + "." + name);             \
            },                                                                 \
            [](const RunConfig& c) { return bstr(c.field); }}
#define SASV_DIMS(sec, name, field, help)                                      \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) {                             \
              c.field = parse_dims(v, std::string(sec) + "." + name);          \
            },                                                                 \
            [](const RunConfig& c) { return join_dims(c.field); }}
#define SASV_STR(sec, name, field, help)                                       \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) { c.field = std::string(v); }, \
            [](const RunConfig& c) { return c.field; }}
#define SASV_LIST(sec, name, field, help)                                      \
  ConfigKey{sec, name, help,                                                   \
            [](RunConfig& c, std::string_view v) { c.field = to_list(v); },    \
            [](const RunConfig& c) { return join(c.field); }}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      SASV_COUNT("synth", "n_speakers", synth.n_speakers, "speakers (>= 6; split 50/25/25)"),
      SASV_COUNT("synth", "utts_per_speaker", synth.utts_per_speaker, "bona fide utterances per speaker"),
      SASV_COUNT("synth", "enroll_per_speaker", synth.enroll_per_speaker, "of which used for enrollment"),
      SASV_DIMS("synth", "asv_dims", synth.asv_dims, "embedding dim per ASV model"),
      SASV_DIMS("synth", "cm_dims", synth.cm_dims, "embedding dim per CM model"),
      SASV_REAL("synth", "speaker_separation", synth.speaker_separation, "speaker center distance / noise sigma"),
      SASV_REAL("synth", "spoof_cm_separation", synth.spoof_cm_separation, "bona fide/spoof CM center distance / noise sigma"),
      SASV_BOOL("synth", "spoof_mimics_target", synth.spoof_mimics_target, "spoof ASV embeddings drawn from the claimed speaker"),
      SASV_COUNT("synth", "seed", synth.seed, "generator seed"),

      ConfigKey{"model", "pool", "CAT, TAP, TSP, SAP or ASP",
                [](RunConfig& c, std::string_view v) {
                  const auto m = parse_pool_mode(v);
                  if (!m) throw ConfigError("'model.pool': unknown mode '" + std::string(v) + "'");
                  c.model.pool.mode = *m;
                },
                [](const RunConfig& c) { return std::string(to_string(c.model.pool.mode)); }},
      SASV_COUNT("model", "d_h", model.pool.d_h, "projected CM embedding length"),
      SASV_COUNT("model", "d_a", model.pool.d_a, "attention hidden size (SAP/ASP)"),
      SASV_DIMS("model", "cm_block_dims", model.cm_block_dims, "CM Block hidden widths"),
      SASV_DIMS("model", "predictor_dims", model.predictor_dims, "Predictor hidden widths"),
      SASV_REAL("model", "cm_loss_weight", model.cm_loss_weight, "weight of the s_cm cross-entropy"),
      SASV_REAL("model", "pred_loss_weight", model.pred_loss_weight, "weight of the final cross-entropy"),
      ConfigKey{"model", "cm_label_scheme", "target_vs_rest or bonafide_vs_spoof",
                [](RunConfig& c, std::string_view v) {
                  const auto s = parse_cm_label_scheme(v);
                  if (!s) throw ConfigError("'model.cm_label_scheme': unknown scheme '" + std::string(v) + "'");
                  c.model.cm_labels = *s;
                },
                [](const RunConfig& c) { return std::string(to_string(c.model.cm_labels)); }},

      SASV_COUNT("train", "batch_size", train.batch_size, "mini-batch size"),
      SASV_COUNT("train", "epochs", train.epochs, "training epochs"),
      SASV_REAL("train", "lr", train.lr, "Adam learning rate (constant)"),
      SASV_COUNT("train", "seed", train.seed, "init and shuffle seed"),
      SASV_BOOL("train", "shuffle", train.shuffle, "shuffle every epoch"),
      SASV_BOOL("train", "select_on_dev", train.select_on_dev, "keep the best dev SASV-EER epoch"),
      SASV_BOOL("train", "record_time", train.record_time, "write wall time to the training log"),

      SASV_STR("paths", "data_dir", paths.data_dir, "synth output / default input directory"),
      SASV_STR("paths", "out_dir", paths.out_dir, "checkpoints, logs and score files"),
      SASV_STR("paths", "train_protocol", paths.train_protocol, "default <data_dir>/train.protocol"),
      SASV_STR("paths", "dev_protocol", paths.dev_protocol, "default <data_dir>/dev.protocol"),
      SASV_STR("paths", "eval_protocol", paths.eval_protocol, "default <data_dir>/eval.protocol"),
      SASV_STR("paths", "enroll_map", paths.enroll_map, "default <data_dir>/enroll.map"),
      SASV_LIST("paths", "asv_embeddings", paths.asv_embeddings, "comma list; default <data_dir>/asv_<k>.emb"),
      SASV_LIST("paths", "cm_embeddings", paths.cm_embeddings, "comma list; default <data_dir>/cm_<k>.emb"),
  };
  return keys;
}

#undef SASV_COUNT
#undef SASV_REAL
#undef SASV_BOOL
#undef SASV_DIMS
#undef SASV_STR
#undef SASV_LIST

}  // namespace detail

/// Sets `section.key` from its textual value.
inline void apply_setting(RunConfig& cfg, std::string_view section,
                          std::string_view key, std::string_view value) {
  for (const auto& k : detail::config_keys()) {
    if (section == k.section && key == k.key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(section) + "." +
                    std::string(key) + "'");
}

/// `section.key=value`, as given to --set.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot_pos = assignment.find('.');
  if (eq == std::string_view::npos || dot_pos == std::string_view::npos || dot_pos > eq) {
    throw ConfigError("override must look like section.key=value, got '" +
                      std::string(assignment) + "'");
  }
  apply_setting(cfg, trim(assignment.substr(0, dot_pos)),
                trim(assignment.substr(dot_pos + 1, eq - dot_pos - 1)),
                assignment.substr(eq + 1));
}

inline RunConfig parse_run_config_text(std::string_view text,
                                       const std::string& source) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  for (auto raw : split_on(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "synth" && section != "model" && section != "train" &&
          section != "paths") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    try {
      apply_setting(cfg, section, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config_text(read_text_file(path), path);
}

/// SASV_FUSE_SEED, when set, replaces both the synth and the train seed.
inline void apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("SASV_FUSE_SEED");
  if (env == nullptr || *env == '\0') return;
  const auto seed = parse_count(env);
  if (!seed) throw ConfigError("SASV_FUSE_SEED must be a non-negative integer");
  cfg.synth.seed = *seed;
  cfg.train.seed = *seed;
}

/// A complete config file with every key at its current value.
inline std::string dump_run_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : detail::config_keys()) {
    if (section != k.section) {
      section = k.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += "# " + std::string(k.help) + '\n';
    out += std::string(k.key) + " = " + k.get(cfg) + '\n';
  }
  return out;
}

}  // namespace sasv
