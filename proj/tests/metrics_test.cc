// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dpens/error.h"
#include "dpens/metrics.h"
#include "testing.h"

namespace dpens {
namespace {

using testing::MakeRecord;

PatientRecord Timeline(int steps, std::optional<int> onset) {
  return MakeRecord("p", Eigen::MatrixXd::Zero(steps, 1), std::vector<int>(static_cast<size_t>(steps), 0), onset);
}

double BruteForceAuroc(const std::vector<double>& s, const std::vector<int>& y) {
  double count2 = 0, p = 0, n = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) ++p; else ++n;
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      count2 += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
    }
  }
  return count2 / (2.0 * p * n);
}

TEST(Horizon, NamesAndSteps) {
  const auto hs = StandardHorizons();
  ASSERT_EQ(hs.size(), 5u);
  const std::vector<std::string> names = {"4h", "8h", "12h", "12h-8h", "24h-12h"};
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(hs[i].Name(), names[i]);
    EXPECT_EQ(ParseHorizon(names[i]).Name(), names[i]);
  }
  EXPECT_EQ(hs[0].FarSteps(), 8);
  EXPECT_EQ(hs[0].NearSteps(), 0);
  EXPECT_EQ(hs[3].NearSteps(), 16);
  EXPECT_EQ(hs[3].FarSteps(), 24);
  EXPECT_THROW(HorizonSpec::Interval(12, 8), Error);
  EXPECT_THROW(HorizonSpec::Point(0), Error);
  EXPECT_THROW(ParseHorizon("4"), Error);
}

TEST(HorizonLabels, NonSepsisAllNegative) {
  const auto sel = HorizonLabels(Timeline(10, std::nullopt), HorizonSpec::Point(4));
  ASSERT_TRUE(sel);
  EXPECT_EQ(sel->steps.size(), 10u);
  EXPECT_EQ(std::count(sel->labels.begin(), sel->labels.end(), 1), 0);
}

TEST(HorizonLabels, PointFourHours) {
  const auto sel = HorizonLabels(Timeline(150, 100), HorizonSpec::Point(4));
  ASSERT_TRUE(sel);
  ASSERT_EQ(sel->steps.size(), 100u);
  for (int t = 0; t < 100; ++t) {
    EXPECT_EQ(sel->steps[static_cast<size_t>(t)], t);
    EXPECT_EQ(sel->labels[static_cast<size_t>(t)], t >= 92 ? 1 : 0) << t;
  }
}

TEST(HorizonLabels, IntervalTwelveToEight) {
  const auto sel = HorizonLabels(Timeline(150, 100), HorizonSpec::Interval(8, 12));
  ASSERT_TRUE(sel);
  ASSERT_EQ(sel->steps.size(), 84u);
  for (int t = 0; t < 84; ++t) EXPECT_EQ(sel->labels[static_cast<size_t>(t)], t >= 76 ? 1 : 0) << t;
}

TEST(HorizonLabels, InsufficientHistorySkipped) {
  EXPECT_FALSE(HorizonLabels(Timeline(150, 40), HorizonSpec::Interval(12, 24)));
  EXPECT_TRUE(HorizonLabels(Timeline(150, 48), HorizonSpec::Interval(12, 24)));
  const std::vector<PatientRecord> recs = {Timeline(150, 40), Timeline(150, 100), Timeline(20, std::nullopt)};
  std::vector<std::vector<double>> preds;
  for (const auto& r : recs) preds.emplace_back(static_cast<size_t>(r.steps()), 1.0);
  const PooledScores pooled = PoolHorizon(recs, preds, HorizonSpec::Interval(12, 24));
  EXPECT_EQ(pooled.skipped, 1);
  EXPECT_EQ(pooled.scores.size(), 76u + 20u);
  EXPECT_EQ(std::count(pooled.labels.begin(), pooled.labels.end(), 1), 24);
}

TEST(Auroc, Examples) {
  EXPECT_EQ(Auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(Auroc(std::vector<double>{1, 1, 1, 1, 1}, std::vector<int>{0, 1, 0, 1, 1}), 0.5);
  EXPECT_EQ(Auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(Auroc, Errors) {
  try {
    Auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
  EXPECT_THROW(Auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), Error);
  EXPECT_THROW(Auroc(std::vector<double>{0.1}, std::vector<int>{0, 1}), Error);
}

TEST(Auroc, EqualsBruteForceWithTies) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::uniform_int_distribution<int> size(2, 200), levels(1, 12);
    const int n = size(gen), k = levels(gen);
    std::uniform_int_distribution<int> q(0, k);
    std::vector<double> s(static_cast<size_t>(n));
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<size_t>(i)] = q(gen) / static_cast<double>(k);
      y[static_cast<size_t>(i)] = static_cast<int>(gen() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(Auroc(s, y), BruteForceAuroc(s, y));
  }
}

TEST(Auroc, MonotoneTransformAndReflection) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10 + trial;
    std::vector<double> s(static_cast<size_t>(n)), t(s), neg(s);
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<size_t>(i)] = i % 3 == 0;
      s[static_cast<size_t>(i)] = d(gen) + 0.7 * y[static_cast<size_t>(i)];
      t[static_cast<size_t>(i)] = std::exp(3 * s[static_cast<size_t>(i)]) + 1;
      neg[static_cast<size_t>(i)] = -s[static_cast<size_t>(i)];
    }
    const double a = Auroc(s, y);
    EXPECT_EQ(Auroc(t, y), a);
    EXPECT_NEAR(a + Auroc(neg, y), 1.0, 1e-12);
  }
}

TEST(Roc, TrapezoidMatchesRankStatistic) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + trial % 60;
    std::vector<double> s(static_cast<size_t>(n));
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<size_t>(i)] = static_cast<double>(gen() % 7);
      y[static_cast<size_t>(i)] = static_cast<int>(gen() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    const RocCurve roc = ComputeRoc(s, y);
    EXPECT_NEAR(roc.auroc, Auroc(s, y), 1e-12);
    EXPECT_EQ(roc.thresholds.front(), INFINITY);
    EXPECT_EQ(roc.tpr.front(), 0.0);
    EXPECT_EQ(roc.tpr.back(), 1.0);
    EXPECT_EQ(roc.fpr.back(), 1.0);
    for (size_t i = 1; i < roc.tpr.size(); ++i) {
      EXPECT_GE(roc.tpr[i], roc.tpr[i - 1]);
      EXPECT_GE(roc.fpr[i], roc.fpr[i - 1]);
      EXPECT_LT(roc.thresholds[i], roc.thresholds[i - 1]);
    }
  }
}

TEST(AccuracyLoss, Examples) {
  EXPECT_EQ(AccuracyLoss(0.8, 0.8), 0.0);
  EXPECT_EQ(AccuracyLoss(0.5, 0.9), 1.0);
  EXPECT_NEAR(AccuracyLoss(0.625, 0.75), 0.5, 1e-15);
  try {
    AccuracyLoss(0.6, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
}

TEST(AccuracyLoss, DecreasingInPrivateAuroc) {
  for (double base : {0.55, 0.7, 0.95}) {
    double prev = INFINITY;
    for (int k = 0; k <= 100; ++k) {
      const double v = AccuracyLoss(k / 100.0, base);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(WelchTTest, IdenticalSamples) {
  const std::vector<double> a = {0.81, 0.84, 0.80, 0.86};
  EXPECT_NEAR(WelchTTest(a, a).p_value, 1.0, 1e-9);
  const std::vector<double> c = {0.5, 0.5};
  EXPECT_EQ(WelchTTest(c, c).p_value, 1.0);
}

TEST(WelchTTest, ReferenceValues) {
  // Values from an independent Welch implementation.
  const TTestResult r1 = WelchTTest(std::vector<double>{1, 2, 3, 4}, std::vector<double>{3, 4, 5, 6});
  EXPECT_NEAR(r1.t, -2.1908902300206647, 1e-12);
  EXPECT_NEAR(r1.df, 6.0, 1e-12);
  EXPECT_NEAR(r1.p_value, 0.07098765432098755, 1e-10);
  const TTestResult r2 =
      WelchTTest(std::vector<double>{0.81, 0.84, 0.80, 0.86}, std::vector<double>{0.78, 0.79, 0.77, 0.81});
  EXPECT_NEAR(r2.t, 2.4688535993934746, 1e-10);
  EXPECT_NEAR(r2.df, 5.010309278350521, 1e-9);
  EXPECT_NEAR(r2.p_value, 0.056508927686142095, 1e-10);
  const TTestResult r3 = WelchTTest(std::vector<double>{0, 0, 0, 0}, std::vector<double>{10, 10, 10, 10.0001});
  EXPECT_LT(r3.p_value, 1e-6);
  EXPECT_NEAR(r3.df, 3.0, 1e-9);
  EXPECT_NEAR(r3.t, -400001.0000009323, 1e-3);
}

TEST(WelchTTest, Degenerate) {
  const TTestResult r = WelchTTest(std::vector<double>{1, 1, 1}, std::vector<double>{2, 2});
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_EQ(r.t, -INFINITY);
  EXPECT_THROW(WelchTTest(std::vector<double>{1}, std::vector<double>{2, 3}), Error);
  EXPECT_EQ(kSignificanceLevel, 0.05);
}

TEST(ResultsTable, MeanSdCellsAndMarks) {
  const std::vector<HorizonSpec> hs = {HorizonSpec::Point(4), HorizonSpec::Interval(8, 12)};
  const std::vector<ResultRow> rows = {
      {"full", {{0.81, 0.84, 0.80, 0.86}, {0.70, 0.71, 0.69, 0.70}}},
      {"ensemble_uniform", {{0.80, 0.85, 0.81, 0.85}, {0.80, 0.81, 0.80, 0.79}}},
  };
  const auto dir = testing::TempDir("results_table");
  WriteResultsTable(dir / "r.csv", hs, rows, "full");
  EXPECT_EQ(testing::ReadFile(dir / "r.csv"),
            "model,4h,12h-8h,significant_vs_full\n"
            "full,82.8 (2.8),70.0 (0.8),\n"
            "ensemble_uniform,82.8 (2.6),80.0 (0.8),12h-8h\n");
}

TEST(FirstCrossing, LogInterpolation) {
  const std::vector<double> eps = {0.01, 0.1, 1, 10};
  EXPECT_NEAR(*FirstCrossing(eps, std::vector<double>{1.0, 0.9, 0.3, 0.0}, 0.5), std::pow(10.0, -1 + 2.0 / 3), 1e-12);
  EXPECT_EQ(*FirstCrossing(eps, std::vector<double>{0.2, 0.1, 0.0, 0.0}, 0.5), 0.01);
  EXPECT_FALSE(FirstCrossing(eps, std::vector<double>{1.0, 0.9, 0.8, 0.6}, 0.5));
  EXPECT_EQ(*FirstCrossing(eps, std::vector<double>{NAN, NAN, 0.4, 0.1}, 0.5), 1.0);
  EXPECT_THROW(FirstCrossing(eps, std::vector<double>{1.0}, 0.5), Error);
}

}  // namespace
}  // namespace dpens
