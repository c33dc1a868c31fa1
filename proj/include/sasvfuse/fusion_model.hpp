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

// The trainable second-level fusion network.
//
//   h^i --proj_i--> columns of H --pool--> h_cm --CM Block--> s_cm (2 logits)
//   [s_cm ; s_sv^1..m] --Predictor--> y_hat (2 logits)
//   final_score = softmax(y_hat)[target]
//
// CM Block and Predictor are ReLU MLPs whose last layer is a plain affine map
// to two logits. Class index 1 is the positive class throughout.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasvfuse/dataio.hpp"
#include "sasvfuse/errors.hpp"
#include "sasvfuse/numerics.hpp"
#include "sasvfuse/pooling.hpp"
#include "sasvfuse/text.hpp"

namespace sasv {

/// How s_cm is supervised. kTargetVsRest marks only target trials positive;
/// kBonafideVsSpoof marks every non-spoof trial positive.
enum class CmLabelScheme { kTargetVsRest, kBonafideVsSpoof };

inline std::string_view to_string(CmLabelScheme s) {
  return s == CmLabelScheme::kTargetVsRest ? "target_vs_rest"
                                           : "bonafide_vs_spoof";
}

inline std::optional<CmLabelScheme> parse_cm_label_scheme(std::string_view s) {
  if (s == "target_vs_rest") return CmLabelScheme::kTargetVsRest;
  if (s == "bonafide_vs_spoof") return CmLabelScheme::kBonafideVsSpoof;
  return std::nullopt;
}

inline std::size_t decision_label(TrialLabel l) {
  return l == TrialLabel::kTarget ? 1 : 0;
}

inline std::size_t cm_label(CmLabelScheme scheme, TrialLabel l) {
  if (scheme == CmLabelScheme::kTargetVsRest) return decision_label(l);
  return l == TrialLabel::kSpoof ? 0 : 1;
}

struct ModelConfig {
  std::size_t m = 1;                        // ASV models
  std::size_t n = 1;                        // CM models
  std::vector<std::size_t> cm_input_dims{1};
  PoolConfig pool;                          // pool.d_h is the projected length
  std::vector<std::size_t> cm_block_dims{64};
  std::vector<std::size_t> predictor_dims{16};
  double cm_loss_weight = 1.0;
  double pred_loss_weight = 1.0;
  CmLabelScheme cm_labels = CmLabelScheme::kTargetVsRest;

  std::size_t d_h() const { return pool.d_h; }
  std::size_t pooled_dim() const { return pool.out_dim(n); }
  std::size_t predictor_input() const { return m + 2; }

  void validate() const {
    if (m < 1) throw ConfigError("model: need at least one ASV score (m >= 1)");
    if (n < 1) throw ConfigError("model: need at least one CM model (n >= 1)");
    if (cm_input_dims.size() != n) {
      throw ConfigError("model: " + std::to_string(cm_input_dims.size()) +
                        " CM input dims for n = " + std::to_string(n));
    }
    for (auto d : cm_input_dims) {
      if (d == 0) throw ConfigError("model: zero-width CM input");
    }
    pool.validate();
    for (auto d : cm_block_dims) {
      if (d == 0) throw ConfigError("model: zero-width CM Block layer");
    }
    for (auto d : predictor_dims) {
      if (d == 0) throw ConfigError("model: zero-width Predictor layer");
    }
    if (!std::isfinite(cm_loss_weight) || !std::isfinite(pred_loss_weight) ||
        cm_loss_weight < 0.0 || pred_loss_weight < 0.0) {
      throw ConfigError("model: loss weights must be finite and >= 0");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// y = x W + b with W of shape (in, out) and b of shape (1, out).
struct Affine {
  Mat weight;
  Mat bias;

  std::size_t in() const { return weight.rows; }
  std::size_t out() const { return weight.cols; }

  Vec apply(std::span<const double> x) const {
    Vec y(bias.data);
    for (std::size_t i = 0; i < weight.rows; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const auto row = weight.row(i);
      for (std::size_t j = 0; j < y.size(); ++j) y[j] += xi * row[j];
    }
    return y;
  }
  friend bool operator==(const Affine&, const Affine&) = default;
};

inline Affine init_affine(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("affine layer with zero width");
  Affine a{Mat(in, out), Mat(1, out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& x : a.weight.data) x = rng.uniform(-bound, bound);
  for (double& x : a.bias.data) x = rng.uniform(-bound, bound);
  return a;
}

/// ReLU between layers, identity after the last one.
struct Mlp {
  std::vector<Affine> layers;

  struct Cache {
    std::vector<Vec> inputs;  // input to each layer (post-activation)
    std::vector<Vec> pre;     // pre-activation of each layer
  };

  Vec forward(std::span<const double> x, Cache* cache) const {
    Vec a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Vec z = layers[l].apply(a);
      if (cache) {
        cache->inputs.push_back(std::move(a));
        cache->pre.push_back(z);
      }
      if (l + 1 < layers.size()) {
        for (double& v : z) v = relu(v);
      }
      a = std::move(z);
    }
    return a;
  }

  /// Accumulates into `grads` (same shape as this) and returns d/dx.
  Vec backward(const Cache& cache, Vec g, Mlp& grads) const {
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size()) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (!(cache.pre[l][j] > 0.0)) g[j] = 0.0;
        }
      }
      const Affine& layer = layers[l];
      Affine& gl = grads.layers[l];
      const Vec& x = cache.inputs[l];
      for (std::size_t i = 0; i < layer.in(); ++i) {
        if (x[i] == 0.0) continue;
        auto row = gl.weight.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) row[j] += x[i] * g[j];
      }
      for (std::size_t j = 0; j < g.size(); ++j) gl.bias.data[j] += g[j];
      Vec gx(layer.in(), 0.0);
      for (std::size_t i = 0; i < layer.in(); ++i) {
        gx[i] = dot(layer.weight.row(i), g);
      }
      g = std::move(gx);
    }
    return g;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

inline Mlp init_mlp(std::size_t in, const std::vector<std::size_t>& hidden,
                    std::size_t out, Rng& rng) {
  Mlp mlp;
  std::size_t prev = in;
  for (auto h : hidden) {
    mlp.layers.push_back(init_affine(prev, h, rng));
    prev = h;
  }
  mlp.layers.push_back(init_affine(prev, out, rng));
  return mlp;
}

/// All trainable tensors. Traversal order (also the checkpoint order):
/// proj[0].W, proj[0].b, ..., proj[n-1].b, [pool W1, W2],
/// cm_block layers (W, b) in order, predictor layers (W, b) in order.
struct FusionParams {
  std::vector<Affine> proj;
  std::optional<PoolParams> pool;
  Mlp cm_block;
  Mlp predictor;

  template <class F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  /// Same shapes, all zeros.
  FusionParams zeros_like() const {
    FusionParams z = *this;
    z.for_each_tensor([](Mat& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
    return z;
  }

  friend bool operator==(const FusionParams&, const FusionParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    for (auto& a : self.proj) {
      f(a.weight);
      f(a.bias);
    }
    if (self.pool) {
      f(self.pool->w1);
      f(self.pool->w2);
    }
    for (auto& a : self.cm_block.layers) {
      f(a.weight);
      f(a.bias);
    }
    for (auto& a : self.predictor.layers) {
      f(a.weight);
      f(a.bias);
    }
  }
};

/// Draw order follows the tensor traversal order. Weights and biases are
/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); attention weights use
/// fan_in = d_h.
inline FusionParams init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  FusionParams p;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    p.proj.push_back(init_affine(cfg.cm_input_dims[i], cfg.d_h(), rng));
  }
  if (uses_attention(cfg.pool.mode)) p.pool = init_pool_params(cfg.pool, rng);
  p.cm_block = init_mlp(cfg.pooled_dim(), cfg.cm_block_dims, 2, rng);
  p.predictor = init_mlp(cfg.predictor_input(), cfg.predictor_dims, 2, rng);
  return p;
}

inline void check_shapes(const FusionParams& p, const ModelConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw ConfigError("model parameters do not match config: " + what);
  };
  if (p.proj.size() != cfg.n) fail("projection count");
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (p.proj[i].in() != cfg.cm_input_dims[i] || p.proj[i].out() != cfg.d_h()) {
      fail("projection " + std::to_string(i) + " shape");
    }
  }
  if (p.pool.has_value() != uses_attention(cfg.pool.mode)) fail("pool params");
  if (p.cm_block.layers.size() != cfg.cm_block_dims.size() + 1 ||
      p.cm_block.layers.front().in() != cfg.pooled_dim() ||
      p.cm_block.layers.back().out() != 2) {
    fail("CM Block shape");
  }
  if (p.predictor.layers.size() != cfg.predictor_dims.size() + 1 ||
      p.predictor.layers.front().in() != cfg.predictor_input() ||
      p.predictor.layers.back().out() != 2) {
    fail("Predictor shape");
  }
}

struct ForwardTrace {
  Vec s_cm;        // 2 CM logits
  Vec y_hat;       // 2 decision logits
  double final_score = 0.5;

  Mat h;           // projected embeddings, d_h x n
  Pooled pooled;
  Mlp::Cache cm_cache;
  Mlp::Cache pred_cache;
};

inline void check_features(const TrialFeatures& f, const ModelConfig& cfg) {
  if (f.asv_scores.size() != cfg.m) {
    throw ConfigError("trial has " + std::to_string(f.asv_scores.size()) +
                      " ASV scores, model expects " + std::to_string(cfg.m));
  }
  if (f.cm_embeddings.size() != cfg.n) {
    throw ConfigError("trial has " + std::to_string(f.cm_embeddings.size()) +
                      " CM embeddings, model expects " + std::to_string(cfg.n));
  }
  for (double x : f.asv_scores) {
    if (!std::isfinite(x)) throw DegenerateInputError("trial has a non-finite ASV score");
  }
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (double x : f.cm_embeddings[i]) {
      if (!std::isfinite(x)) {
        throw DegenerateInputError("CM embedding " + std::to_string(i) +
                                   " has a non-finite value");
      }
    }
    if (f.cm_embeddings[i].size() != cfg.cm_input_dims[i]) {
      throw ConfigError("CM embedding " + std::to_string(i) + " has dim " +
                        std::to_string(f.cm_embeddings[i].size()) +
                        ", model expects " +
                        std::to_string(cfg.cm_input_dims[i]));
    }
  }
}

inline ForwardTrace forward(const TrialFeatures& feat, const FusionParams& params,
                            const ModelConfig& cfg) {
  check_features(feat, cfg);
  ForwardTrace tr;
  tr.h = Mat(cfg.d_h(), cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const Vec p = params.proj[i].apply(feat.cm_embeddings[i]);
    for (std::size_t j = 0; j < p.size(); ++j) tr.h(j, i) = p[j];
  }
  tr.pooled = pool_forward(tr.h, cfg.pool, params.pool ? &*params.pool : nullptr);
  tr.s_cm = params.cm_block.forward(tr.pooled.h_cm, &tr.cm_cache);

  Vec pred_in = tr.s_cm;
  pred_in.insert(pred_in.end(), feat.asv_scores.begin(), feat.asv_scores.end());
  tr.y_hat = params.predictor.forward(pred_in, &tr.pred_cache);
  tr.final_score = softmax(tr.y_hat)[1];
  return tr;
}

/// Score-only forward (no caches kept).
inline double final_score(const TrialFeatures& feat, const FusionParams& params,
                          const ModelConfig& cfg) {
  return forward(feat, params, cfg).final_score;
}

struct LossGrads {
  double loss = 0.0;
  FusionParams grads;
};

/// cm_loss_weight * CE(s_cm, cm label) + pred_loss_weight * CE(y_hat, label)
/// and its exact gradient with respect to every parameter.
inline LossGrads loss_and_grads(const TrialFeatures& feat,
                                const FusionParams& params,
                                const ModelConfig& cfg) {
  const ForwardTrace tr = forward(feat, params, cfg);
  const auto ce_pred = cross_entropy(tr.y_hat, decision_label(feat.label));
  const auto ce_cm = cross_entropy(tr.s_cm, cm_label(cfg.cm_labels, feat.label));

  LossGrads out;
  out.loss = cfg.cm_loss_weight * ce_cm.loss + cfg.pred_loss_weight * ce_pred.loss;
  out.grads = params.zeros_like();

  Vec g_y = ce_pred.grad;
  for (double& x : g_y) x *= cfg.pred_loss_weight;
  const Vec g_pred_in = params.predictor.backward(tr.pred_cache, std::move(g_y),
                                                  out.grads.predictor);
  Vec g_s{g_pred_in[0] + cfg.cm_loss_weight * ce_cm.grad[0],
          g_pred_in[1] + cfg.cm_loss_weight * ce_cm.grad[1]};
  const Vec g_hcm =
      params.cm_block.backward(tr.cm_cache, std::move(g_s), out.grads.cm_block);

  const PoolParams* pp = params.pool ? &*params.pool : nullptr;
  PoolGrads pg = pool_backward(tr.pooled, g_hcm, tr.h, cfg.pool, pp);
  if (out.grads.pool) {
    out.grads.pool->w1 = std::move(*pg.grad_w1);
    out.grads.pool->w2 = std::move(*pg.grad_w2);
  }
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const Vec& x = feat.cm_embeddings[i];
    Affine& g = out.grads.proj[i];
    for (std::size_t r = 0; r < x.size(); ++r) {
      auto row = g.weight.row(r);
      for (std::size_t j = 0; j < cfg.d_h(); ++j) row[j] = x[r] * pg.grad_h(j, i);
    }
    for (std::size_t j = 0; j < cfg.d_h(); ++j) g.bias.data[j] = pg.grad_h(j, i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-objective and score-sum baselines.

/// Mean ASV cosine score of a trial.
inline double asv_mean_score(const TrialFeatures& f) {
  if (f.asv_scores.empty()) throw ConfigError("asv_mean_score: no ASV scores");
  double s = 0.0;
  for (double x : f.asv_scores) s += x;
  return s / static_cast<double>(f.asv_scores.size());
}

/// Mean of the ASV scores plus a CM scalar, added without any rescaling.
inline double score_sum_baseline(std::span<const double> asv_scores,
                                 double cm_score) {
  if (asv_scores.empty()) throw ConfigError("score_sum_baseline: no ASV scores");
  double s = 0.0;
  for (double x : asv_scores) s += x;
  return s / static_cast<double>(asv_scores.size()) + cm_score;
}

/// A CM-only scorer that needs no training loop: per CM model, the
/// projection of the test embedding onto the bona fide minus spoof class
/// mean direction, relative to the class midpoint; summed over models.
class CentroidCmScorer {
 public:
  static CentroidCmScorer fit(std::span<const TrialFeatures> train) {
    if (train.empty()) throw DegenerateInputError("CentroidCmScorer: no data");
    const std::size_t n = train.front().cm_embeddings.size();
    CentroidCmScorer sc;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t d = train.front().cm_embeddings[k].size();
      Vec bona(d, 0.0), spoof(d, 0.0);
      std::size_t nb = 0, nsp = 0;
      for (const auto& f : train) {
        Vec& acc = f.label == TrialLabel::kSpoof ? spoof : bona;
        (f.label == TrialLabel::kSpoof ? nsp : nb) += 1;
        for (std::size_t j = 0; j < d; ++j) acc[j] += f.cm_embeddings[k][j];
      }
      if (nb == 0 || nsp == 0) {
        throw DegenerateInputError("CentroidCmScorer: need bona fide and spoof");
      }
      Vec dir(d), mid(d);
      for (std::size_t j = 0; j < d; ++j) {
        bona[j] /= static_cast<double>(nb);
        spoof[j] /= static_cast<double>(nsp);
        dir[j] = bona[j] - spoof[j];
        mid[j] = 0.5 * (bona[j] + spoof[j]);
      }
      const double norm = std::sqrt(dot(dir, dir));
      if (norm > 0.0) {
        for (double& x : dir) x /= norm;
      }
      sc.direction_.push_back(std::move(dir));
      sc.midpoint_.push_back(std::move(mid));
    }
    return sc;
  }

  double score(const TrialFeatures& f) const {
    if (f.cm_embeddings.size() != direction_.size()) {
      throw ConfigError("CentroidCmScorer: CM model count mismatch");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < direction_.size(); ++k) {
      const Vec& h = f.cm_embeddings[k];
      if (h.size() != direction_[k].size()) {
        throw ConfigError("CentroidCmScorer: CM dim mismatch");
      }
      for (std::size_t j = 0; j < h.size(); ++j) {
        s += (h[j] - midpoint_[k][j]) * direction_[k][j];
      }
    }
    return s;
  }

 private:
  std::vector<Vec> direction_;
  std::vector<Vec> midpoint_;
};

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Layout: magic `SASVCKPT`, u32 byte length L, L bytes of UTF-8 `key=value`
// lines describing the ModelConfig, u64 parameter count, then every
// parameter as little-endian f64 in FusionParams traversal order.

inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'S', 'V',
                                             'C', 'K', 'P', 'T'};

namespace detail {

inline std::string join_dims(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(dims[i]);
  }
  return s;
}

inline std::vector<std::size_t> parse_dims(std::string_view s,
                                           const std::string& key) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (auto part : split_on(s, ',')) {
    const auto v = parse_count(trim(part));
    if (!v) throw ConfigError("bad dimension list for '" + key + "': " + std::string(s));
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

}  // namespace detail

inline std::string serialize_model_config(const ModelConfig& c) {
  std::string s;
  s += "m=" + std::to_string(c.m) + '\n';
  s += "n=" + std::to_string(c.n) + '\n';
  s += "cm_input_dims=" + detail::join_dims(c.cm_input_dims) + '\n';
  s += "d_h=" + std::to_string(c.pool.d_h) + '\n';
  s += "pool=" + std::string(to_string(c.pool.mode)) + '\n';
  s += "d_a=" + std::to_string(c.pool.d_a) + '\n';
  s += "d_r=" + std::to_string(c.pool.d_r) + '\n';
  s += "cm_block_dims=" + detail::join_dims(c.cm_block_dims) + '\n';
  s += "predictor_dims=" + detail::join_dims(c.predictor_dims) + '\n';
  s += "cm_loss_weight=" + format_real(c.cm_loss_weight) + '\n';
  s += "pred_loss_weight=" + format_real(c.pred_loss_weight) + '\n';
  s += "cm_label_scheme=" + std::string(to_string(c.cm_labels)) + '\n';
  return s;
}

inline ModelConfig parse_model_config(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split_on(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("checkpoint config: malformed line '" + std::string(line) + "'");
    }
    kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("checkpoint config: missing '") + key + "'");
    return it->second;
  };
  auto count = [&](const char* key) {
    auto v = parse_count(get(key));
    if (!v) throw FormatError(std::string("checkpoint config: bad '") + key + "'");
    return static_cast<std::size_t>(*v);
  };
  auto real = [&](const char* key) {
    auto v = parse_real(get(key));
    if (!v) throw FormatError(std::string("checkpoint config: bad '") + key + "'");
    return *v;
  };
  ModelConfig c;
  c.m = count("m");
  c.n = count("n");
  c.cm_input_dims = detail::parse_dims(get("cm_input_dims"), "cm_input_dims");
  c.pool.d_h = count("d_h");
  const auto mode = parse_pool_mode(get("pool"));
  if (!mode) throw FormatError("checkpoint config: unknown pool mode");
  c.pool.mode = *mode;
  c.pool.d_a = count("d_a");
  c.pool.d_r = count("d_r");
  c.cm_block_dims = detail::parse_dims(get("cm_block_dims"), "cm_block_dims");
  c.predictor_dims = detail::parse_dims(get("predictor_dims"), "predictor_dims");
  c.cm_loss_weight = real("cm_loss_weight");
  c.pred_loss_weight = real("pred_loss_weight");
  const auto scheme = parse_cm_label_scheme(get("cm_label_scheme"));
  if (!scheme) throw FormatError("checkpoint config: unknown cm_label_scheme");
  c.cm_labels = *scheme;
  if (kv.size() != 12) throw FormatError("checkpoint config: unexpected keys");
  return c;
}

inline std::string encode_checkpoint(const ModelConfig& cfg,
                                     const FusionParams& params) {
  check_shapes(params, cfg);
  std::string out(kCheckpointMagic, 8);
  const std::string text = serialize_model_config(cfg);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  const std::vector<double> flat = flatten(params);
  detail::put_u64(out, flat.size());
  for (double x : flat) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

struct Checkpoint {
  ModelConfig config;
  FusionParams params;
};

inline Checkpoint decode_checkpoint(std::string_view bytes,
                                    const std::string& source) {
  detail::ByteReader rd(bytes, source);
  if (rd.take(8, "magic") != std::string_view(kCheckpointMagic, 8)) {
    throw FormatError(source + ": bad magic (expected SASVCKPT)");
  }
  const auto len = static_cast<std::size_t>(rd.le(4, "config length"));
  Checkpoint ck;
  ck.config = parse_model_config(rd.take(len, "config block"));
  ck.config.validate();
  // Shapes come from a zero-draw init; values are overwritten below.
  Rng rng(0);
  ck.params = init_model(ck.config, rng);
  const auto count = rd.le(8, "parameter count");
  if (count != parameter_count(ck.params)) {
    throw FormatError(source + ": checkpoint holds " + std::to_string(count) +
                      " parameters, config implies " +
                      std::to_string(parameter_count(ck.params)));
  }
  std::vector<double> flat(static_cast<std::size_t>(count));
  for (double& x : flat) x = std::bit_cast<double>(rd.le(8, "parameter"));
  if (!rd.done()) throw FormatError(source + ": trailing bytes after parameters");
  unflatten(std::span<const double>(flat), ck.params);
  return ck;
}

inline void write_checkpoint(const std::string& path, const ModelConfig& cfg,
                             const FusionParams& params) {
  write_text_file(path, encode_checkpoint(cfg, params));
}

inline Checkpoint read_checkpoint(const std::string& path) {
  return decode_checkpoint(read_text_file(path), path);
}

}  // namespace sasv
