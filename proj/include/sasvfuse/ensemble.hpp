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

#include <algorithm>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sasvfuse/errors.hpp"
#include "sasvfuse/metrics.hpp"
#include "sasvfuse/text.hpp"
#include "sasvfuse/trainer.hpp"

namespace sasv {

struct SystemScores {
  std::string system_id;
  std::vector<ScoreRow> scores;
};

/// Per-trial arithmetic mean of final scores. Members must list the same
/// trials (index and label) in the same order.
inline SystemScores ensemble_mean(std::span<const SystemScores> systems) {
  if (systems.empty()) throw ConfigError("ensemble: no systems given");
  const auto& ref = systems.front().scores;
  for (const auto& s : systems) {
    if (s.scores.size() != ref.size()) {
      const std::size_t first = std::min(s.scores.size(), ref.size());
      throw ConfigError("ensemble: system '" + s.system_id + "' has " +
                        std::to_string(s.scores.size()) + " trials, expected " +
                        std::to_string(ref.size()) + "; lists diverge at index " +
                        std::to_string(first));
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (s.scores[i].trial_index != ref[i].trial_index ||
          s.scores[i].label != ref[i].label) {
        throw ConfigError("ensemble: system '" + s.system_id +
                          "' diverges from '" + systems.front().system_id +
                          "' at index " + std::to_string(i));
      }
    }
  }
  SystemScores out;
  out.system_id = "ensemble";
  out.scores = ref;
  const double inv = 1.0 / static_cast<double>(systems.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double s = 0.0;
    for (const auto& sys : systems) s += sys.scores[i].score;
    out.scores[i].score = s * inv;
  }
  return out;
}

/// The k system ids with the smallest SASV-EER, ties by id. Systems without
/// a SASV-EER sort last.
inline std::vector<std::string> select_top_k(
    std::span<const std::pair<std::string, EvalReport>> reports, std::size_t k) {
  if (k == 0) throw ConfigError("select_top_k: k must be >= 1");
  if (k > reports.size()) {
    throw ConfigError("select_top_k: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(reports.size()) + " systems");
  }
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& [id, rep] : reports) {
    keyed.emplace_back(rep.sasv ? rep.sasv->eer : INFINITY, id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(keyed[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Score files: CSV `trial_index,score,label`.

inline std::string scores_csv(std::span<const ScoreRow> rows) {
  std::string out = "trial_index,score,label\n";
  for (const auto& r : rows) {
    out += std::to_string(r.trial_index) + ',' + format_real(r.score) + ',' +
           std::string(to_string(r.label)) + '\n';
  }
  return out;
}

inline std::vector<ScoreRow> parse_scores_csv(std::string_view text,
                                              const std::string& source) {
  std::vector<ScoreRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (auto line : split_on(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "trial_index,score,label") {
        throw FormatError(source + ":" + std::to_string(line_no) +
                          ": expected header 'trial_index,score,label'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_on(line, ',');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (f.size() != 3) throw FormatError(where + "expected 3 columns");
    const auto idx = parse_count(f[0]);
    const auto score = parse_real(f[1]);
    const auto label = parse_label(f[2]);
    if (!idx) throw FormatError(where + "bad trial_index");
    if (!score || !std::isfinite(*score)) throw FormatError(where + "bad score");
    if (!label) throw FormatError(where + "unknown label");
    rows.push_back({static_cast<std::size_t>(*idx), *score, *label});
  }
  if (!header_seen) throw FormatError(source + ": empty score file");
  return rows;
}

inline SystemScores read_scores(const std::string& path) {
  return {std::filesystem::path(path).stem().string(),
          parse_scores_csv(read_text_file(path), path)};
}

inline void write_scores(const std::string& path, std::span<const ScoreRow> rows) {
  write_text_file(path, scores_csv(rows));
}

}  // namespace sasv
