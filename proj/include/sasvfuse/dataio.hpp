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

// Trial protocols, enrollment maps, binary embedding stores, per-trial
// feature assembly and the synthetic dataset generator.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sasvfuse/errors.hpp"
#include "sasvfuse/labels.hpp"
#include "sasvfuse/numerics.hpp"
#include "sasvfuse/text.hpp"

namespace sasv {

struct Trial {
  std::string enroll_id;
  std::string test_utt;
  TrialLabel label = TrialLabel::kTarget;

  friend bool operator==(const Trial&, const Trial&) = default;
};

// ---------------------------------------------------------------------------
// Protocol files: `<enroll_id> <test_utt> <label>` per line, `#` comments.

inline std::vector<Trial> parse_protocol_text(std::string_view text,
                                              const std::string& source) {
  std::vector<Trial> trials;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_ws(line);
    if (f.size() != 3) {
      throw FormatError(source + ":" + std::to_string(line_no) +
                        ": expected 3 fields, got " + std::to_string(f.size()));
    }
    const auto label = parse_label(f[2]);
    if (!label) {
      throw FormatError(source + ":" + std::to_string(line_no) +
                        ": unknown label '" + std::string(f[2]) + "'");
    }
    trials.push_back({std::string(f[0]), std::string(f[1]), *label});
  }
  return trials;
}

inline std::vector<Trial> parse_protocol(const std::string& path) {
  return parse_protocol_text(read_text_file(path), path);
}

inline std::string serialize_protocol(std::span<const Trial> trials) {
  std::string out;
  for (const auto& t : trials) {
    out += t.enroll_id;
    out += ' ';
    out += t.test_utt;
    out += ' ';
    out += to_string(t.label);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enrollment map: `<enroll_id> <utt_id>` per line, repeatable per id.

using EnrollmentMap = std::map<std::string, std::vector<std::string>>;

inline EnrollmentMap parse_enrollment_text(std::string_view text,
                                           const std::string& source) {
  EnrollmentMap map;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_ws(line);
    if (f.size() != 2) {
      throw FormatError(source + ":" + std::to_string(line_no) +
                        ": expected `<enroll_id> <utt_id>`");
    }
    map[std::string(f[0])].emplace_back(f[1]);
  }
  return map;
}

inline EnrollmentMap parse_enrollment(const std::string& path) {
  return parse_enrollment_text(read_text_file(path), path);
}

inline std::string serialize_enrollment(const EnrollmentMap& map) {
  std::string out;
  for (const auto& [id, utts] : map) {
    for (const auto& u : utts) out += id + ' ' + u + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding store.

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::string model_id, std::size_t dim)
      : model_id_(std::move(model_id)), dim_(dim) {}

  const std::string& model_id() const { return model_id_; }
  void set_model_id(std::string id) { model_id_ = std::move(id); }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Vec& vector_at(std::size_t i) const { return vectors_[i]; }

  void add(const std::string& id, Vec v) {
    if (v.size() != dim_) {
      throw FormatError("store '" + model_id_ + "': vector for '" + id +
                        "' has length " + std::to_string(v.size()) +
                        ", expected " + std::to_string(dim_));
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw FormatError("store '" + model_id_ + "': duplicate utterance id '" +
                        id + "'");
    }
    ids_.push_back(id);
    vectors_.push_back(std::move(v));
  }

  const Vec* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &vectors_[it->second];
  }

  const Vec& at(const std::string& id) const {
    if (const Vec* v = find(id)) return *v;
    throw LookupError("utterance '" + id + "' not found in store '" +
                      model_id_ + "'");
  }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_;
  }

 private:
  std::string model_id_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Vec> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr char kEmbeddingMagic[8] = {'S', 'A', 'S', 'V',
                                            'E', 'M', 'B', '1'};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>((v >> 8) & 0xff);
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

/// Bounds-checked little-endian cursor over a byte buffer.
class ByteReader {
 public:
  ByteReader(std::string_view buf, std::string source)
      : buf_(buf), source_(std::move(source)) {}

  std::string_view take(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated payload while reading " + what +
                        " at byte " + std::to_string(pos_));
    }
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t le(std::size_t n, const char* what) {
    auto s = take(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i]))
           << (8 * i);
    }
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }
  std::size_t pos() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  std::string_view buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Layout: magic `SASVEMB1`, u32 dim, u32 count, then per record
/// u16 id length, id bytes, dim x f32. All little-endian.
inline std::string encode_embeddings(const EmbeddingStore& store) {
  std::string out(kEmbeddingMagic, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(store.dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.ids()[i];
    if (id.size() > 0xffff) throw FormatError("utterance id too long: " + id);
    detail::put_u16(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (double x : store.vector_at(i)) {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }
  return out;
}

inline EmbeddingStore decode_embeddings(std::string_view bytes,
                                        const std::string& source,
                                        std::string model_id) {
  detail::ByteReader rd(bytes, source);
  if (rd.take(8, "magic") != std::string_view(kEmbeddingMagic, 8)) {
    throw FormatError(source + ": bad magic (expected SASVEMB1)");
  }
  const auto dim = static_cast<std::size_t>(rd.le(4, "dim"));
  const auto count = static_cast<std::size_t>(rd.le(4, "count"));
  EmbeddingStore store(std::move(model_id), dim);
  for (std::size_t r = 0; r < count; ++r) {
    const auto len = static_cast<std::size_t>(rd.le(2, "id length"));
    std::string id(rd.take(len, "utterance id"));
    Vec v(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      v[k] = static_cast<double>(std::bit_cast<float>(
          static_cast<std::uint32_t>(rd.le(4, "embedding value"))));
    }
    store.add(id, std::move(v));
  }
  if (!rd.done()) {
    throw FormatError(source + ": " +
                      std::to_string(bytes.size() - rd.pos()) +
                      " trailing bytes after " + std::to_string(count) +
                      " records (declared dim/count mismatch?)");
  }
  return store;
}

inline EmbeddingStore read_embeddings(const std::string& path) {
  return decode_embeddings(read_text_file(path), path,
                           std::filesystem::path(path).stem().string());
}

inline void write_embeddings(const EmbeddingStore& store,
                             const std::string& path) {
  write_text_file(path, encode_embeddings(store));
}

// ---------------------------------------------------------------------------
// Scoring and feature assembly.

inline double cosine_score(std::span<const double> a,
                           std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("cosine_score: length mismatch (" +
                      std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_score: zero-norm embedding");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// Inputs of the fusion model for one trial: m ASV cosine scores and the
/// n CM embeddings of the test utterance.
struct TrialFeatures {
  Vec asv_scores;
  std::vector<Vec> cm_embeddings;
  TrialLabel label = TrialLabel::kTarget;
};

/// Enrollment embedding of an identity = mean of its enrollment utterances.
inline Vec enrollment_embedding(const EmbeddingStore& store,
                                const EnrollmentMap& enrollment,
                                const std::string& enroll_id) {
  auto it = enrollment.find(enroll_id);
  if (it == enrollment.end() || it->second.empty()) {
    throw LookupError("enrollment identity '" + enroll_id +
                      "' has no enrollment utterances");
  }
  Vec mean(store.dim(), 0.0);
  for (const auto& utt : it->second) {
    const Vec& v = store.at(utt);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
  }
  const double inv = 1.0 / static_cast<double>(it->second.size());
  for (double& x : mean) x *= inv;
  return mean;
}

inline std::vector<TrialFeatures> assemble_features(
    std::span<const Trial> trials, std::span<const EmbeddingStore> asv_stores,
    std::span<const EmbeddingStore> cm_stores, const EnrollmentMap& enrollment,
    unsigned threads = 1) {
  // Enrollment means are computed once per (store, identity).
  std::vector<std::map<std::string, Vec>> enroll_cache(asv_stores.size());
  for (const auto& t : trials) {
    for (std::size_t k = 0; k < asv_stores.size(); ++k) {
      auto& cache = enroll_cache[k];
      if (!cache.contains(t.enroll_id)) {
        cache.emplace(t.enroll_id, enrollment_embedding(asv_stores[k],
                                                        enrollment,
                                                        t.enroll_id));
      }
    }
  }
  std::vector<TrialFeatures> out(trials.size());
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    const Trial& t = trials[i];
    TrialFeatures f;
    f.label = t.label;
    f.asv_scores.reserve(asv_stores.size());
    for (std::size_t k = 0; k < asv_stores.size(); ++k) {
      f.asv_scores.push_back(cosine_score(enroll_cache[k].at(t.enroll_id),
                                          asv_stores[k].at(t.test_utt)));
    }
    for (const auto& cm : cm_stores) f.cm_embeddings.push_back(cm.at(t.test_utt));
    out[i] = std::move(f);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data.

struct SynthSpec {
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 40;
  std::size_t enroll_per_speaker = 3;
  std::vector<std::size_t> asv_dims{16, 16, 16};
  std::vector<std::size_t> cm_dims{16, 24, 32};
  double speaker_separation = 7.0;
  double spoof_cm_separation = 6.0;
  bool spoof_mimics_target = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_speakers < 6) {
      throw ConfigError("synth: n_speakers must be >= 6 (2 per split), got " +
                        std::to_string(n_speakers));
    }
    if (utts_per_speaker < 2) {
      throw ConfigError("synth: utts_per_speaker must be >= 2");
    }
    if (enroll_per_speaker < 1 || enroll_per_speaker >= utts_per_speaker) {
      throw ConfigError(
          "synth: enroll_per_speaker must be in [1, utts_per_speaker)");
    }
    if (asv_dims.empty() || cm_dims.empty()) {
      throw ConfigError("synth: need at least one ASV and one CM model");
    }
    for (auto d : asv_dims) {
      if (d == 0) throw ConfigError("synth: ASV dims must be >= 1");
    }
    for (auto d : cm_dims) {
      if (d == 0) throw ConfigError("synth: CM dims must be >= 1");
    }
    if (!(speaker_separation >= 0.0) || !(spoof_cm_separation >= 0.0)) {
      throw ConfigError("synth: separations must be >= 0");
    }
  }
};

enum class Split { kTrain, kDev, kEval };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
  }
  return "?";
}

struct SynthData {
  std::vector<Trial> train, dev, eval;
  std::vector<EmbeddingStore> asv_stores;
  std::vector<EmbeddingStore> cm_stores;
  EnrollmentMap enrollment;

  const std::vector<Trial>& split(Split s) const {
    return s == Split::kTrain ? train : s == Split::kDev ? dev : eval;
  }
};

namespace detail {

// Values are rounded through f32 so the in-memory store equals what the
// binary file holds.
inline Vec gaussian_point(Rng& rng, std::span<const double> center) {
  Vec v(center.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = static_cast<double>(static_cast<float>(center[k] + rng.normal()));
  }
  return v;
}

inline Vec random_center(Rng& rng, std::size_t dim, double norm_scale) {
  // E|c1 - c2|^2 = 2 * norm_scale^2 for independent draws.
  Vec c(dim);
  const double s = norm_scale / std::sqrt(static_cast<double>(dim));
  for (double& x : c) x = s * rng.normal();
  return c;
}

}  // namespace detail

/// Isotropic Gaussian clusters with unit noise per dimension.
///
/// ASV spaces: one center per speaker; expected distance between two
/// speaker centers is speaker_separation. CM spaces: a bona fide center and
/// a spoof center at distance spoof_cm_separation. With spoof_mimics_target
/// set, a spoof utterance aimed at speaker s has its ASV embeddings drawn
/// from s's cluster; otherwise from a speaker-independent cluster at the
/// origin.
///
/// Speakers are split 50/25/25 into disjoint train/dev/eval sets. Each
/// non-enrollment bona fide utterance of a speaker yields one target trial,
/// one nontarget trial (claimed identity: another speaker of the same
/// split) and one spoof trial (a spoof utterance claiming the speaker).
inline SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t ns = spec.n_speakers;
  const std::size_t n_test = spec.utts_per_speaker - spec.enroll_per_speaker;

  auto spk_name = [](std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "spk%03zu", s);
    return std::string(buf);
  };
  auto utt_name = [](std::size_t s, std::size_t u, const char* kind) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s_spk%03zu_%04zu", kind, s, u);
    return std::string(buf);
  };

  SynthData data;
  for (std::size_t k = 0; k < spec.asv_dims.size(); ++k) {
    data.asv_stores.emplace_back("asv_" + std::to_string(k), spec.asv_dims[k]);
  }
  for (std::size_t k = 0; k < spec.cm_dims.size(); ++k) {
    data.cm_stores.emplace_back("cm_" + std::to_string(k), spec.cm_dims[k]);
  }

  // Cluster centers.
  std::vector<std::vector<Vec>> spk_centers(spec.asv_dims.size());
  for (std::size_t k = 0; k < spec.asv_dims.size(); ++k) {
    for (std::size_t s = 0; s < ns; ++s) {
      spk_centers[k].push_back(detail::random_center(
          rng, spec.asv_dims[k], spec.speaker_separation / std::sqrt(2.0)));
    }
  }
  std::vector<Vec> bona_centers, spoof_centers;
  for (std::size_t k = 0; k < spec.cm_dims.size(); ++k) {
    const std::size_t d = spec.cm_dims[k];
    Vec dir(d);
    double norm = 0.0;
    do {
      for (double& x : dir) x = rng.normal();
      norm = std::sqrt(dot(dir, dir));
    } while (norm == 0.0);
    Vec b(d), sp(d);
    for (std::size_t j = 0; j < d; ++j) {
      b[j] = 0.5 * spec.spoof_cm_separation * dir[j] / norm;
      sp[j] = -b[j];
    }
    bona_centers.push_back(std::move(b));
    spoof_centers.push_back(std::move(sp));
  }

  // Utterances: speaker-major, bona fide then spoof.
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t u = 0; u < spec.utts_per_speaker; ++u) {
      const std::string id = utt_name(s, u, "bona");
      for (std::size_t k = 0; k < spec.asv_dims.size(); ++k) {
        data.asv_stores[k].add(id, detail::gaussian_point(rng, spk_centers[k][s]));
      }
      for (std::size_t k = 0; k < spec.cm_dims.size(); ++k) {
        data.cm_stores[k].add(id, detail::gaussian_point(rng, bona_centers[k]));
      }
      if (u < spec.enroll_per_speaker) data.enrollment[spk_name(s)].push_back(id);
    }
    for (std::size_t u = 0; u < n_test; ++u) {
      const std::string id = utt_name(s, u, "spoof");
      for (std::size_t k = 0; k < spec.asv_dims.size(); ++k) {
        const Vec origin(spec.asv_dims[k], 0.0);
        data.asv_stores[k].add(
            id, detail::gaussian_point(
                    rng, spec.spoof_mimics_target ? spk_centers[k][s] : origin));
      }
      for (std::size_t k = 0; k < spec.cm_dims.size(); ++k) {
        data.cm_stores[k].add(id, detail::gaussian_point(rng, spoof_centers[k]));
      }
    }
  }

  // Speaker splits.
  const std::size_t n_train = ns / 2;
  const std::size_t n_dev = (ns - n_train) / 2;
  auto split_of = [&](std::size_t s) {
    return s < n_train ? Split::kTrain
           : s < n_train + n_dev ? Split::kDev
                                 : Split::kEval;
  };
  auto split_range = [&](Split sp) -> std::pair<std::size_t, std::size_t> {
    switch (sp) {
      case Split::kTrain: return {0, n_train};
      case Split::kDev: return {n_train, n_train + n_dev};
      default: return {n_train + n_dev, ns};
    }
  };

  for (std::size_t s = 0; s < ns; ++s) {
    const Split sp = split_of(s);
    const auto [lo, hi] = split_range(sp);
    auto& list = sp == Split::kTrain ? data.train
                 : sp == Split::kDev ? data.dev
                                     : data.eval;
    for (std::size_t u = 0; u < n_test; ++u) {
      const std::string test = utt_name(s, spec.enroll_per_speaker + u, "bona");
      list.push_back({spk_name(s), test, TrialLabel::kTarget});
      std::size_t other = lo + static_cast<std::size_t>(rng.below(hi - lo - 1));
      if (other >= s) ++other;
      list.push_back({spk_name(other), test, TrialLabel::kNontarget});
      list.push_back({spk_name(s), utt_name(s, u, "spoof"), TrialLabel::kSpoof});
    }
  }
  return data;
}

}  // namespace sasv
