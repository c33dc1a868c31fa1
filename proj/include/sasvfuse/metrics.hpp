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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasvfuse/errors.hpp"
#include "sasvfuse/labels.hpp"
#include "sasvfuse/text.hpp"

namespace sasv {

struct ScoredTrial {
  double score = 0.0;
  TrialLabel label = TrialLabel::kTarget;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

namespace detail {

// FRR(t) = #{pos < t} / P and FAR(t) = #{neg >= t} / N, evaluated at
// t = -inf, every midpoint between consecutive distinct scores, and +inf.
// Those points trace a piecewise-linear ROC; the EER is where the segment
// joining the last point with FAR > FRR and the first point with
// FAR <= FRR crosses the diagonal.
inline EerResult interpolate_crossing(double frr0, double far0, double t0,
                                      double frr1, double far1, double t1) {
  const double d0 = far0 - frr0;
  const double d1 = far1 - frr1;
  const double lambda = d0 / (d0 - d1);
  EerResult r;
  r.eer = frr0 + lambda * (frr1 - frr0);
  if (std::isinf(t0)) {
    r.threshold = t1;
  } else if (std::isinf(t1)) {
    r.threshold = t0;
  } else {
    r.threshold = t0 + lambda * (t1 - t0);
  }
  return r;
}

}  // namespace detail

/// EER of two ascending-sorted score lists. Positives are accepted when
/// score >= threshold. Linear in the input size.
inline EerResult eer_sorted(std::span<const double> pos,
                            std::span<const double> neg) {
  if (pos.empty() || neg.empty()) {
    throw DegenerateInputError("eer: both classes need at least one score");
  }
  const auto np = static_cast<std::int64_t>(pos.size());
  const auto nn = static_cast<std::int64_t>(neg.size());
  const double inv_p = 1.0 / static_cast<double>(np);
  const double inv_n = 1.0 / static_cast<double>(nn);

  std::size_t ip = 0, in = 0;
  std::int64_t below_p = 0, below_n = 0;
  double prev_t = -std::numeric_limits<double>::infinity();
  std::int64_t prev_bp = 0, prev_bn = 0;

  while (ip < pos.size() || in < neg.size()) {
    double u;
    if (in >= neg.size() || (ip < pos.size() && pos[ip] <= neg[in])) {
      u = pos[ip];
    } else {
      u = neg[in];
    }
    while (ip < pos.size() && pos[ip] == u) { ++ip; ++below_p; }
    while (in < neg.size() && neg[in] == u) { ++in; ++below_n; }

    double t;
    if (ip >= pos.size() && in >= neg.size()) {
      t = std::numeric_limits<double>::infinity();
    } else {
      double next;
      if (in >= neg.size()) next = pos[ip];
      else if (ip >= pos.size()) next = neg[in];
      else next = std::min(pos[ip], neg[in]);
      t = u + (next - u) / 2.0;
    }
    // sign(FAR - FRR) without rounding: (N - bn) * P - bp * N
    const std::int64_t d = (nn - below_n) * np - below_p * nn;
    if (d <= 0) {
      return detail::interpolate_crossing(
          static_cast<double>(prev_bp) * inv_p,
          static_cast<double>(nn - prev_bn) * inv_n, prev_t,
          static_cast<double>(below_p) * inv_p,
          static_cast<double>(nn - below_n) * inv_n, t);
    }
    prev_t = t;
    prev_bp = below_p;
    prev_bn = below_n;
  }
  // Unreachable: at +inf FRR = 1 and FAR = 0.
  throw DegenerateInputError("eer: no crossing found");
}

inline EerResult eer(std::span<const double> positives,
                     std::span<const double> negatives) {
  std::vector<double> p(positives.begin(), positives.end());
  std::vector<double> n(negatives.begin(), negatives.end());
  std::sort(p.begin(), p.end());
  std::sort(n.begin(), n.end());
  return eer_sorted(p, n);
}

struct MetricResult {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// SV: target vs nontarget. SPF: target vs spoof. SASV: target vs both.
/// A sub-metric whose classes are missing is left empty.
struct EvalReport {
  std::optional<MetricResult> sv;
  std::optional<MetricResult> spf;
  std::optional<MetricResult> sasv;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  std::size_t n_spoof = 0;
};

inline EvalReport eval_report(std::span<const ScoredTrial> scored) {
  std::vector<double> tgt, non, spf;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) {
      throw DegenerateInputError("eval_report: non-finite score");
    }
    switch (s.label) {
      case TrialLabel::kTarget: tgt.push_back(s.score); break;
      case TrialLabel::kNontarget: non.push_back(s.score); break;
      case TrialLabel::kSpoof: spf.push_back(s.score); break;
    }
  }
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());
  std::sort(spf.begin(), spf.end());

  EvalReport r;
  r.n_target = tgt.size();
  r.n_nontarget = non.size();
  r.n_spoof = spf.size();
  auto run = [&](std::span<const double> neg) -> std::optional<MetricResult> {
    if (tgt.empty() || neg.empty()) return std::nullopt;
    const EerResult e = eer_sorted(tgt, neg);
    return MetricResult{e.eer, e.threshold, tgt.size(), neg.size()};
  };
  r.sv = run(non);
  r.spf = run(spf);
  std::vector<double> both(non.size() + spf.size());
  std::merge(non.begin(), non.end(), spf.begin(), spf.end(), both.begin());
  r.sasv = run(both);
  return r;
}

/// CSV with header `metric,eer,threshold,n_pos,n_neg`.
inline std::string report_csv(const EvalReport& r) {
  std::string out = "metric,eer,threshold,n_pos,n_neg\n";
  auto row = [&](const char* name, const std::optional<MetricResult>& m,
                 std::size_t n_pos, std::size_t n_neg) {
    out += name;
    out += ',';
    out += m ? format_real(m->eer) : "nan";
    out += ',';
    out += m ? format_real(m->threshold) : "nan";
    out += ',' + std::to_string(n_pos) + ',' + std::to_string(n_neg) + '\n';
  };
  row("sv_eer", r.sv, r.n_target, r.n_nontarget);
  row("spf_eer", r.spf, r.n_target, r.n_spoof);
  row("sasv_eer", r.sasv, r.n_target, r.n_nontarget + r.n_spoof);
  return out;
}

struct HistogramData {
  std::vector<double> bin_edges;  // n_bins + 1 ascending edges
  std::array<std::vector<std::size_t>, 3> counts;  // indexed by TrialLabel

  std::size_t n_bins() const { return counts[0].size(); }
  const std::vector<std::size_t>& of(TrialLabel l) const {
    return counts[static_cast<std::size_t>(l)];
  }
};

/// Uniform bins over [min, max] of all scores; the max lands in the last
/// bin. Identical scores collapse to one bin [v, v].
inline HistogramData histogram(std::span<const ScoredTrial> scored,
                               std::size_t n_bins) {
  if (n_bins == 0) throw ConfigError("histogram: n_bins must be >= 1");
  if (scored.empty()) throw DegenerateInputError("histogram: no scores");
  double lo = scored[0].score, hi = scored[0].score;
  for (const auto& s : scored) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  HistogramData h;
  if (lo == hi) n_bins = 1;
  for (auto& c : h.counts) c.assign(n_bins, 0);
  h.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(n_bins);
  }
  h.bin_edges.back() = hi;
  const double width = hi - lo;
  for (const auto& s : scored) {
    std::size_t b = 0;
    if (width > 0.0) {
      const double pos = (s.score - lo) / width * static_cast<double>(n_bins);
      b = std::min(n_bins - 1, static_cast<std::size_t>(pos));
    }
    ++h.counts[static_cast<std::size_t>(s.label)][b];
  }
  return h;
}

/// CSV with header `bin_lo,bin_hi,target,nontarget,spoof`.
inline std::string histogram_csv(const HistogramData& h) {
  std::string out = "bin_lo,bin_hi,target,nontarget,spoof\n";
  for (std::size_t b = 0; b < h.n_bins(); ++b) {
    out += format_real(h.bin_edges[b]) + ',' + format_real(h.bin_edges[b + 1]);
    for (const auto& c : h.counts) out += ',' + std::to_string(c[b]);
    out += '\n';
  }
  return out;
}

}  // namespace sasv
