/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "mmuq/error.hpp"
#include "mmuq/metrics.hpp"
#include "test_support.hpp"

namespace mmuq {
namespace {

using testing::aurac_enumerate;
using testing::auroc_pairwise;
using testing::random_records;

std::vector<DetectionRecord> records(const std::vector<double>& u, const std::vector<int>& h) {
  std::vector<DetectionRecord> r;
  for (std::size_t i = 0; i < u.size(); ++i) {
    r.push_back({"r" + std::to_string(i), u[i], h[i] == 1, ""});
  }
  return r;
}

TEST(AurocTest, Examples) {
  EXPECT_EQ(auroc(records({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})), 1.0);
  EXPECT_EQ(auroc(records({0.5, 0.5}, {1, 0})), 0.5);
  EXPECT_EQ(auroc(records({0.1, 0.9}, {1, 0})), 0.0);
}

TEST(AurocTest, DegenerateLabels) {
  try {
    auroc(records({0.1, 0.2}, {1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
  EXPECT_THROW(auroc(records({0.1}, {0})), Error);
  EXPECT_FALSE(metric_report(records({0.1, 0.3}, {0, 0})).auroc.has_value());
}

TEST(AurocTest, MatchesPairwiseOracle) {
  std::mt19937_64 g(17);
  for (int t = 0; t < 300; ++t) {
    const auto r = random_records(g, 200, t % 2 == 0);
    EXPECT_NEAR(auroc(r), auroc_pairwise(r), 1e-12);
  }
}

TEST(AurocTest, MonotoneTransformsAndFlips) {
  std::mt19937_64 g(23);
  for (int t = 0; t < 100; ++t) {
    auto r = random_records(g, 100, false);
    const double base = auroc(r);
    const double p = std::uniform_real_distribution<double>(0.2, 5.0)(g);
    auto warped = r;
    for (auto& x : warped) x.u = std::pow(x.u, p);
    EXPECT_NEAR(auroc(warped), base, 1e-12);
    auto flipped = r;
    for (auto& x : flipped) x.hallucination = !x.hallucination;
    EXPECT_NEAR(auroc(flipped), 1.0 - base, 1e-12);
  }
}

TEST(AuracTest, Examples) {
  EXPECT_NEAR(aurac(records({0.1, 0.2, 0.9}, {0, 0, 1})), 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(aurac(records({0.1, 0.2, 0.9}, {0, 0, 1})), 0.888889, 1e-6);
  EXPECT_EQ(aurac(records({0.3, 0.1, 0.2}, {0, 0, 0})), 1.0);
  EXPECT_EQ(aurac(records({0.3, 0.1, 0.2}, {1, 1, 1})), 0.0);
}

TEST(AuracTest, TiesBreakById) {
  // Equal u: "a" is rejected first, so rejecting one leaves the wrong "b".
  std::vector<DetectionRecord> r{{"b", 0.5, true, ""}, {"a", 0.5, false, ""}};
  EXPECT_EQ(aurac(r), (0.5 + 0.0) / 2.0);
}

TEST(AuracTest, MatchesEnumerationExactly) {
  std::mt19937_64 g(31);
  for (int t = 0; t < 300; ++t) {
    const auto r = random_records(g, 200, t % 2 == 1);
    EXPECT_EQ(aurac(r), aurac_enumerate(r));
  }
}

TEST(AuracTest, ConstantUncertainty) {
  auto r = records({0.4, 0.4, 0.4, 0.4}, {1, 0, 0, 1});
  EXPECT_EQ(aurac(r), aurac_enumerate(r));
}

TEST(EceTest, TrivialCases) {
  std::vector<DetectionRecord> seventy;
  for (int i = 0; i < 10; ++i) seventy.push_back({"r" + std::to_string(i), 0.3, i >= 7, ""});
  EXPECT_NEAR(ece(seventy), 0.0, 1e-12);
  auto half = records({0.0, 0.0, 0.0, 0.0}, {0, 1, 0, 1});
  EXPECT_NEAR(ece(half), 0.5, 1e-15);
}

TEST(EceTest, ThreeBinFixture) {
  // Confidences 0.95, 0.95, 0.55, 0.52, 0.15 with labels ok, wrong, ok, ok, wrong.
  const auto r = records({0.05, 0.05, 0.45, 0.48, 0.85}, {0, 1, 0, 0, 1});
  const double expected = 2.0 / 5 * std::abs(0.5 - 0.95) + 2.0 / 5 * std::abs(1.0 - 0.535) +
                          1.0 / 5 * std::abs(0.0 - 0.15);
  EXPECT_NEAR(ece(r), expected, 1e-12);
}

TEST(EceTest, MatchesDirectFormula) {
  std::mt19937_64 g(37);
  for (int t = 0; t < 300; ++t) {
    const auto r = random_records(g, 200, t % 3 == 0);
    for (std::size_t b : {1u, 3u, 10u, 15u}) {
      const double e = ece(r, b);
      EXPECT_NEAR(e, testing::ece_direct(r, b), 1e-12);
      EXPECT_GE(e, 0.0);
      EXPECT_LE(e, 1.0);
    }
  }
}

TEST(BinsTest, EdgesAndEmptyBins) {
  EXPECT_EQ(confidence_bin(0.0, 10), 0u);
  EXPECT_EQ(confidence_bin(0.1, 10), 1u);
  EXPECT_EQ(confidence_bin(0.95, 10), 9u);
  EXPECT_EQ(confidence_bin(1.0, 10), 9u);
  const auto bins = reliability_bins(records({0.05}, {0}), 10);
  ASSERT_EQ(bins.size(), 10u);
  EXPECT_EQ(bins[9].count, 1u);
  EXPECT_DOUBLE_EQ(*bins[9].mean_confidence, 0.95);
  EXPECT_EQ(*bins[9].accuracy, 1.0);
  EXPECT_EQ(bins[0].count, 0u);
  EXPECT_FALSE(bins[0].mean_confidence.has_value());
  EXPECT_FALSE(bins[0].accuracy.has_value());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    EXPECT_DOUBLE_EQ(bins[b].lo, b / 10.0);
    EXPECT_DOUBLE_EQ(bins[b].hi, (b + 1) / 10.0);
  }
}

TEST(BinsTest, MatchesHistogramOracle) {
  std::mt19937_64 g(41);
  std::vector<DetectionRecord> r(100);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = {"r" + std::to_string(i), std::uniform_int_distribution<int>(0, 20)(g) / 20.0,
            i % 3 == 0, ""};
  }
  std::vector<std::size_t> hist(10, 0);
  for (const auto& x : r) ++hist[testing::bin_of(1.0 - x.u, 10)];
  const auto bins = reliability_bins(r, 10);
  std::size_t total = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    EXPECT_EQ(bins[b].count, hist[b]) << b;
    total += bins[b].count;
  }
  EXPECT_EQ(total, r.size());
}

TEST(ReportTest, PermutationInvariant) {
  std::mt19937_64 g(43);
  for (int t = 0; t < 50; ++t) {
    auto r = random_records(g, 60, true);
    const auto a = metric_report(r);
    std::shuffle(r.begin(), r.end(), g);
    const auto b = metric_report(r);
    EXPECT_EQ(*a.auroc, *b.auroc);
    EXPECT_EQ(a.aurac, b.aurac);
    EXPECT_NEAR(a.ece, b.ece, 1e-15);
    EXPECT_EQ(a.n, r.size());
  }
}

}  // namespace
}  // namespace mmuq
