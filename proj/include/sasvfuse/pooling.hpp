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

// First-level fusion: combines the n projected CM embeddings (columns of a
// d_h x n matrix H) into one vector h_cm.
//
//   CAT  columns stacked in model order                      (n * d_h)
//   TAP  column mean                                         (d_h)
//   TSP  [mean ; population std]                             (2 * d_h)
//   SAP  attention-weighted mean, A = softmax(tanh(H^T W1) W2) (d_h)
//   ASP  [weighted mean ; weighted std]                      (2 * d_h)
//
// Standard deviations are sqrt(max(0, E[h^2] - E[h]^2) + kStdEpsilon).

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "sasvfuse/errors.hpp"
#include "sasvfuse/numerics.hpp"

namespace sasv {

inline constexpr double kStdEpsilon = 1e-8;

enum class PoolMode { kCat, kTap, kTsp, kSap, kAsp };

inline std::string_view to_string(PoolMode m) {
  switch (m) {
    case PoolMode::kCat: return "CAT";
    case PoolMode::kTap: return "TAP";
    case PoolMode::kTsp: return "TSP";
    case PoolMode::kSap: return "SAP";
    case PoolMode::kAsp: return "ASP";
  }
  return "?";
}

inline std::optional<PoolMode> parse_pool_mode(std::string_view s) {
  if (s == "CAT" || s == "cat") return PoolMode::kCat;
  if (s == "TAP" || s == "tap") return PoolMode::kTap;
  if (s == "TSP" || s == "tsp") return PoolMode::kTsp;
  if (s == "SAP" || s == "sap") return PoolMode::kSap;
  if (s == "ASP" || s == "asp") return PoolMode::kAsp;
  return std::nullopt;
}

inline bool uses_attention(PoolMode m) {
  return m == PoolMode::kSap || m == PoolMode::kAsp;
}

struct PoolConfig {
  PoolMode mode = PoolMode::kTap;
  std::size_t d_h = 32;
  std::size_t d_a = 16;
  std::size_t d_r = 1;  // single attention head only

  void validate() const {
    if (d_h < 1) throw ConfigError("pool: d_h must be >= 1");
    if (d_a < 1) throw ConfigError("pool: d_a must be >= 1");
    if (d_r != 1) throw ConfigError("pool: only d_r = 1 is supported");
  }

  std::size_t out_dim(std::size_t n) const {
    switch (mode) {
      case PoolMode::kCat: return n * d_h;
      case PoolMode::kTap:
      case PoolMode::kSap: return d_h;
      case PoolMode::kTsp:
      case PoolMode::kAsp: return 2 * d_h;
    }
    return 0;
  }

  friend bool operator==(const PoolConfig&, const PoolConfig&) = default;
};

/// Attention parameters; W1 is d_h x d_a, W2 is d_a x 1.
struct PoolParams {
  Mat w1;
  Mat w2;

  template <class F>
  void for_each_tensor(F&& f) {
    f(w1);
    f(w2);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    f(w1);
    f(w2);
  }
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

inline PoolParams init_pool_params(const PoolConfig& cfg, Rng& rng) {
  cfg.validate();
  PoolParams p{Mat(cfg.d_h, cfg.d_a), Mat(cfg.d_a, 1)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
  for (double& x : p.w1.data) x = rng.uniform(-bound, bound);
  for (double& x : p.w2.data) x = rng.uniform(-bound, bound);
  return p;
}

struct Pooled {
  Vec h_cm;
  std::size_t out_dim = 0;

  // Cache for pool_backward.
  PoolMode mode = PoolMode::kTap;
  std::size_t d_h = 0;
  std::size_t n = 0;
  Vec alpha;       // attention / uniform weights, length n
  Mat tanh_act;    // n x d_a, SAP/ASP only
  Vec mean;        // d_h
  Vec stdev;       // d_h, TSP/ASP only
  std::vector<bool> var_positive;  // variance was above the 0 floor
};

struct PoolGrads {
  Mat grad_h;                  // d_h x n
  std::optional<Mat> grad_w1;  // SAP/ASP only
  std::optional<Mat> grad_w2;
};

namespace detail {

inline void weighted_stats(const Mat& h, Pooled& out, bool with_std) {
  const std::size_t d = h.rows, n = h.cols;
  out.mean.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += out.alpha[i] * h(j, i);
    out.mean[j] = s;
  }
  if (!with_std) return;
  out.stdev.assign(d, 0.0);
  out.var_positive.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += out.alpha[i] * h(j, i) * h(j, i);
    const double var = sq - out.mean[j] * out.mean[j];
    out.var_positive[j] = var > 0.0;
    out.stdev[j] = std::sqrt((var < 0.0 ? 0.0 : var) + kStdEpsilon);  // NaN passes through
  }
}

}  // namespace detail

inline Pooled pool_forward(const Mat& h, const PoolConfig& cfg,
                           const PoolParams* params) {
  cfg.validate();
  if (h.cols == 0) throw DegenerateInputError("pool: no CM embeddings (n = 0)");
  if (h.rows != cfg.d_h) {
    throw ConfigError("pool: H has " + std::to_string(h.rows) +
                      " rows, expected d_h = " + std::to_string(cfg.d_h));
  }
  const std::size_t d = h.rows, n = h.cols;
  Pooled out;
  out.mode = cfg.mode;
  out.d_h = d;
  out.n = n;
  out.out_dim = cfg.out_dim(n);

  switch (cfg.mode) {
    case PoolMode::kCat:
      out.h_cm.resize(n * d);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out.h_cm[i * d + j] = h(j, i);
      }
      return out;
    case PoolMode::kTap:
    case PoolMode::kTsp:
      out.alpha.assign(n, 1.0 / static_cast<double>(n));
      break;
    case PoolMode::kSap:
    case PoolMode::kAsp: {
      if (params == nullptr) {
        throw ConfigError("pool: " + std::string(to_string(cfg.mode)) +
                          " requires attention parameters");
      }
      if (params->w1.rows != d || params->w1.cols != cfg.d_a ||
          params->w2.rows != cfg.d_a || params->w2.cols != 1) {
        throw ConfigError("pool: attention parameter shapes do not match config");
      }
      // tanh(H^T W1) is n x d_a; scores e = tanh(.) W2 is n x 1.
      Mat ht(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ht(i, j) = h(j, i);
      }
      out.tanh_act = matmul(ht, params->w1);
      for (double& x : out.tanh_act.data) x = std::tanh(x);
      const Mat e = matmul(out.tanh_act, params->w2);
      out.alpha = softmax(e.data);
      break;
    }
  }

  const bool with_std =
      cfg.mode == PoolMode::kTsp || cfg.mode == PoolMode::kAsp;
  detail::weighted_stats(h, out, with_std);
  out.h_cm = out.mean;
  if (with_std) out.h_cm.insert(out.h_cm.end(), out.stdev.begin(), out.stdev.end());
  return out;
}

inline PoolGrads pool_backward(const Pooled& pooled, std::span<const double> grad_out,
                               const Mat& h, const PoolConfig& cfg,
                               const PoolParams* params) {
  if (pooled.mode != cfg.mode || pooled.d_h != h.rows || pooled.n != h.cols) {
    throw Error(ErrorKind::kConfig, "pool_backward: cache does not match inputs");
  }
  if (grad_out.size() != pooled.out_dim) {
    throw ConfigError("pool_backward: gradient has length " +
                      std::to_string(grad_out.size()) + ", expected " +
                      std::to_string(pooled.out_dim));
  }
  const std::size_t d = h.rows, n = h.cols;
  PoolGrads g;
  g.grad_h = Mat(d, n);

  if (cfg.mode == PoolMode::kCat) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) g.grad_h(j, i) = grad_out[i * d + j];
    }
    return g;
  }

  const bool with_std =
      cfg.mode == PoolMode::kTsp || cfg.mode == PoolMode::kAsp;
  const std::span<const double> g_mean = grad_out.subspan(0, d);
  // d sigma_j / d var_j = 1 / (2 sigma_j) above the floor, 0 below.
  Vec g_var(d, 0.0);
  if (with_std) {
    for (std::size_t j = 0; j < d; ++j) {
      if (pooled.var_positive[j]) g_var[j] = grad_out[d + j] / (2.0 * pooled.stdev[j]);
    }
  }

  // Gradient with the weights held fixed:
  //   mean_j = sum_i a_i H_ji,  var_j = sum_i a_i H_ji^2 - mean_j^2
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      g.grad_h(j, i) = pooled.alpha[i] *
                       (g_mean[j] + 2.0 * g_var[j] * (h(j, i) - pooled.mean[j]));
    }
  }
  if (!uses_attention(cfg.mode)) return g;
  if (params == nullptr) {
    throw ConfigError("pool_backward: attention parameters missing");
  }

  // Through the weights: d mean_j / d a_i = H_ji,
  // d var_j / d a_i = H_ji^2 - 2 mean_j H_ji.
  Vec g_alpha(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = h(j, i);
      s += g_mean[j] * x + g_var[j] * (x * x - 2.0 * pooled.mean[j] * x);
    }
    g_alpha[i] = s;
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) weighted += pooled.alpha[i] * g_alpha[i];
  Vec g_e(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_e[i] = pooled.alpha[i] * (g_alpha[i] - weighted);
  }

  const std::size_t da = cfg.d_a;
  const Mat& t = pooled.tanh_act;
  g.grad_w2 = Mat(da, 1);
  g.grad_w1 = Mat(d, da);
  Mat g_z(n, da);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < da; ++a) {
      (*g.grad_w2)(a, 0) += g_e[i] * t(i, a);
      g_z(i, a) = g_e[i] * params->w2(a, 0) * (1.0 - t(i, a) * t(i, a));
    }
  }
  // z = H^T W1: dW1 = H g_z, dH^T += g_z W1^T.
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t a = 0; a < da; ++a) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += h(j, i) * g_z(i, a);
      (*g.grad_w1)(j, a) = s;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t a = 0; a < da; ++a) s += g_z(i, a) * params->w1(j, a);
      g.grad_h(j, i) += s;
    }
  }
  return g;
}

}  // namespace sasv
