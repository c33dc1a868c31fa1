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

// Dense linear algebra, activations, seeded randomness and the Adam rule.
// Everything is double precision and row-major.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sasvfuse/errors.hpp"

namespace sasv {

using Vec = std::vector<double>;

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Mat m(rs.size(), rs.size() ? rs.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rs) {
      if (row.size() != m.cols) throw ConfigError("Mat::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.data.begin() + r * m.cols);
      ++r;
    }
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Mat&, const Mat&) = default;
};

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) {
    throw ConfigError("matmul: inner dimensions differ (" +
                      std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                      ")");
  }
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      double* orow = out.data.data() + i * out.cols;
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Stable softmax (max subtracted before exponentiation).
inline Vec softmax(std::span<const double> v) {
  if (v.empty()) throw ConfigError("softmax: empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

inline double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

struct CrossEntropy {
  double loss = 0.0;
  Vec grad;  // d loss / d logits
};

/// Two-class softmax cross-entropy with its logit gradient.
inline CrossEntropy cross_entropy(std::span<const double> logits,
                                  std::size_t label) {
  if (logits.size() != 2) {
    throw ConfigError("cross_entropy: expected 2 logits, got " +
                      std::to_string(logits.size()));
  }
  if (label > 1) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) +
                      " out of range");
  }
  CrossEntropy ce;
  ce.loss = log_sum_exp(logits) - logits[label];
  ce.grad = softmax(logits);
  ce.grad[label] -= 1.0;
  return ce;
}

inline double relu(double x) { return x < 0.0 ? 0.0 : x; }  // NaN passes through

/// SplitMix64. The recurrence is fixed so that every implementation that
/// follows it draws the same sequence:
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
/// uniform() takes the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller, one draw per call (no cached second variate).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: n must be positive");
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// A parameter set exposes its tensors in a fixed order.
template <class P>
concept ParameterSet = requires(P& p, const P& cp) {
  p.for_each_tensor([](Mat&) {});
  cp.for_each_tensor([](const Mat&) {});
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update over a flat parameter vector.
/// Moment buffers are sized on the first call and checked afterwards.
inline void adam_step(AdamState& st, std::span<double> params,
                      std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw ConfigError("adam_step: " + std::to_string(grads.size()) +
                      " gradients for " + std::to_string(params.size()) +
                      " parameters");
  }
  if (st.step == 0 && st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state tracks " +
                      std::to_string(st.m.size()) + " parameters, got " +
                      std::to_string(params.size()));
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

template <ParameterSet P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  p.for_each_tensor([&](const Mat& t) { n += t.size(); });
  return n;
}

template <ParameterSet P>
std::vector<double> flatten(const P& p) {
  std::vector<double> flat;
  flat.reserve(parameter_count(p));
  p.for_each_tensor(
      [&](const Mat& t) { flat.insert(flat.end(), t.data.begin(), t.data.end()); });
  return flat;
}

template <ParameterSet P>
void unflatten(std::span<const double> flat, P& p) {
  if (flat.size() != parameter_count(p)) {
    throw ConfigError("unflatten: size mismatch");
  }
  std::size_t off = 0;
  p.for_each_tensor([&](Mat& t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.size(),
                t.data.begin());
    off += t.size();
  });
}

template <ParameterSet P>
void adam_step(AdamState& st, P& params, const P& grads) {
  if (parameter_count(params) != parameter_count(grads)) {
    throw ConfigError("adam_step: gradient set does not match parameter set");
  }
  std::vector<double> flat = flatten(params);
  const std::vector<double> g = flatten(grads);
  adam_step(st, std::span<double>(flat), std::span<const double>(g));
  unflatten(std::span<const double>(flat), params);
}

/// Runs fn(i) for i in [0, n) over up to `threads` workers using contiguous
/// chunks. Callers write results to per-index slots, so output does not
/// depend on the thread count.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, w, &fn, &errors] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // First failing chunk wins so the reported error is thread-count stable.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sasv
