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

#include "sasvfuse/pooling.hpp"
#include "sasvfuse/testing/oracles.hpp"

namespace sasv {
namespace {

constexpr PoolMode kAllModes[] = {PoolMode::kCat, PoolMode::kTap, PoolMode::kTsp,
                                  PoolMode::kSap, PoolMode::kAsp};

Mat random_h(Rng& rng, std::size_t d, std::size_t n) {
  Mat h(d, n);
  for (double& x : h.data) x = rng.uniform(-2, 2);
  return h;
}

PoolConfig config(PoolMode mode, std::size_t d_h, std::size_t d_a = 3) {
  PoolConfig c;
  c.mode = mode;
  c.d_h = d_h;
  c.d_a = d_a;
  return c;
}

TEST(Pool, TemporalAverageExample) {
  // Columns (1, 3) and (3, 5).
  const Mat h = Mat::from_rows({{1, 3}, {3, 5}});
  const Pooled p = pool_forward(h, config(PoolMode::kTap, 2), nullptr);
  EXPECT_EQ(p.h_cm, (Vec{2, 4}));
}

TEST(Pool, TemporalStatisticsExample) {
  const Mat h = Mat::from_rows({{1, 3}, {3, 5}});
  const Pooled p = pool_forward(h, config(PoolMode::kTsp, 2), nullptr);
  ASSERT_EQ(p.h_cm.size(), 4u);
  EXPECT_EQ(p.h_cm[0], 2.0);
  EXPECT_EQ(p.h_cm[1], 4.0);
  // Population variance 1 per row, plus the floor.
  EXPECT_NEAR(p.h_cm[2], std::sqrt(1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.h_cm[3], std::sqrt(1.0 + 1e-8), 1e-15);
}

TEST(Pool, ConcatenationStacksColumns) {
  const Mat h = Mat::from_rows({{1, 2, 3}, {4, 5, 6}});
  const Pooled p = pool_forward(h, config(PoolMode::kCat, 2), nullptr);
  EXPECT_EQ(p.h_cm, (Vec{1, 4, 2, 5, 3, 6}));
}

TEST(Pool, OutputDimensions) {
  Rng rng(1);
  for (PoolMode mode : kAllModes) {
    const PoolConfig c = config(mode, 4);
    const PoolParams pp = init_pool_params(c, rng);
    for (std::size_t n : {1u, 2u, 3u, 5u}) {
      const Pooled p = pool_forward(random_h(rng, 4, n), c, &pp);
      const std::size_t expect = mode == PoolMode::kCat                           ? 4 * n
                                 : mode == PoolMode::kTap || mode == PoolMode::kSap ? 4
                                                                                     : 8;
      EXPECT_EQ(p.h_cm.size(), expect) << to_string(mode) << " n=" << n;
      EXPECT_EQ(c.out_dim(n), expect);
    }
  }
}

TEST(Pool, ZeroScoreAttentionReducesToUniformPooling) {
  Rng rng(2);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 1 + rng.below(6);
    const Mat h = random_h(rng, 5, n);
    const Pooled tap = pool_forward(h, config(PoolMode::kTap, 5), nullptr);
    const Pooled tsp = pool_forward(h, config(PoolMode::kTsp, 5), nullptr);
    for (bool zero_w1 : {true, false}) {
      PoolParams pp = init_pool_params(config(PoolMode::kSap, 5), rng);
      Mat& w = zero_w1 ? pp.w1 : pp.w2;
      std::fill(w.data.begin(), w.data.end(), 0.0);
      const Pooled sap = pool_forward(h, config(PoolMode::kSap, 5), &pp);
      const Pooled asp = pool_forward(h, config(PoolMode::kAsp, 5), &pp);
      for (std::size_t k = 0; k < tap.h_cm.size(); ++k) {
        EXPECT_NEAR(sap.h_cm[k], tap.h_cm[k], 1e-9);
      }
      for (std::size_t k = 0; k < tsp.h_cm.size(); ++k) {
        EXPECT_NEAR(asp.h_cm[k], tsp.h_cm[k], 1e-9);
      }
    }
  }
}

TEST(Pool, SingleColumnIsExact) {
  Rng rng(3);
  const Mat h = random_h(rng, 4, 1);
  const Vec col{h(0, 0), h(1, 0), h(2, 0), h(3, 0)};
  for (PoolMode mode : kAllModes) {
    const PoolConfig c = config(mode, 4);
    const PoolParams pp = init_pool_params(c, rng);
    const Pooled p = pool_forward(h, c, &pp);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p.h_cm[j], col[j]) << to_string(mode);
    if (mode == PoolMode::kTsp || mode == PoolMode::kAsp) {
      for (std::size_t j = 4; j < 8; ++j) EXPECT_NEAR(p.h_cm[j], 1e-4, 1e-12);
    }
  }
}

TEST(Pool, IdenticalColumnsGiveFlooredDeviation) {
  const Mat h = Mat::from_rows({{2, 2, 2}, {-1, -1, -1}});
  const Pooled p = pool_forward(h, config(PoolMode::kTsp, 2), nullptr);
  EXPECT_NEAR(p.h_cm[0], 2.0, 1e-15);
  EXPECT_NEAR(p.h_cm[2], std::sqrt(1e-8), 1e-15);
  EXPECT_TRUE(std::isfinite(p.h_cm[3]));
}

TEST(Pool, AverageIsPermutationInvariant) {
  Rng rng(4);
  const Mat h = random_h(rng, 3, 4);
  Mat swapped = h;
  for (std::size_t j = 0; j < 3; ++j) std::swap(swapped(j, 0), swapped(j, 3));
  for (PoolMode mode : {PoolMode::kTap, PoolMode::kTsp, PoolMode::kSap, PoolMode::kAsp}) {
    const PoolConfig c = config(mode, 3);
    const PoolParams pp = init_pool_params(c, rng);
    const Pooled a = pool_forward(h, c, &pp), b = pool_forward(swapped, c, &pp);
    for (std::size_t k = 0; k < a.h_cm.size(); ++k) EXPECT_NEAR(a.h_cm[k], b.h_cm[k], 1e-12);
  }
}

TEST(Pool, AttentionWeightsFormADistribution) {
  Rng rng(5);
  const PoolConfig c = config(PoolMode::kAsp, 4);
  for (int inst = 0; inst < 20; ++inst) {
    const PoolParams pp = init_pool_params(c, rng);
    const Pooled p = pool_forward(random_h(rng, 4, 5), c, &pp);
    double s = 0.0;
    for (double a : p.alpha) {
      EXPECT_GT(a, 0.0);
      s += a;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Pool, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  for (PoolMode mode : kAllModes) {
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t n = 1 + rng.below(4);
      const PoolConfig c = config(mode, 4);
      const PoolParams pp = init_pool_params(c, rng);
      const Mat h = random_h(rng, 4, n);
      Vec g(c.out_dim(n));
      for (double& x : g) x = rng.uniform(-1, 1);
      const auto gc = testing::check_pool_gradients(h, c, uses_attention(mode) ? &pp : nullptr, g);
      worst = std::max(worst, gc.max_rel_error);
      checked += gc.checked;
      skipped += gc.skipped_near_floor + gc.skipped_kinks;
    }
    EXPECT_LT(worst, 1e-5) << to_string(mode);
    EXPECT_LT(skipped, checked / 20) << to_string(mode);
  }
}

TEST(Pool, Errors) {
  const Mat h(3, 2);
  EXPECT_THROW(pool_forward(Mat(3, 0), config(PoolMode::kTap, 3), nullptr),
               DegenerateInputError);
  EXPECT_THROW(pool_forward(h, config(PoolMode::kTap, 4), nullptr), ConfigError);
  EXPECT_THROW(pool_forward(h, config(PoolMode::kSap, 3), nullptr), ConfigError);
  PoolConfig bad = config(PoolMode::kSap, 3);
  bad.d_r = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_FALSE(parse_pool_mode("max").has_value());
  for (PoolMode m : kAllModes) EXPECT_EQ(parse_pool_mode(to_string(m)), m);
}

}  // namespace
}  // namespace sasv
