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


#include <cmath>
#include <memory>
#include <random>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "dpens/attack.h"
#include "dpens/ensemble.h"
#include "dpens/error.h"
#include "dpens/privacy.h"
#include "testing.h"

namespace dpens {
namespace {

using testing::RandomRecord;

std::vector<PatientRecord> Group(const std::string& prefix, int n, std::mt19937_64& gen) {
  std::vector<PatientRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(RandomRecord(prefix + std::to_string(i), 20 + i % 7, 2, gen));
  return out;
}

TEST(MembershipInfer, StrictThreshold) {
  EXPECT_TRUE(MembershipInfer(0.1, 0.5));
  EXPECT_FALSE(MembershipInfer(0.5, 0.5));
  EXPECT_TRUE(MembershipInfer(0.0, 1e-9));
  EXPECT_FALSE(MembershipInfer(0.0, 0.0));
}

TEST(AttackSample, PerStepSquaredErrorMean) {
  const PatientRecord r = testing::MakeRecord("p", Eigen::MatrixXd::Zero(4, 1), {0, 1, 2, 3});
  AttackTarget t{"const", 1.0, [](const PatientRecord& rec) { return std::vector<double>(rec.steps(), 1.0); }};
  const AttackSample s = MakeAttackSample(t, r, true);
  EXPECT_EQ(s.losses, (std::vector<double>{1, 0, 1, 4}));
  EXPECT_EQ(s.mean_loss, 1.5);
  EXPECT_TRUE(s.is_member);
  AttackTarget bad{"bad", 1.0, [](const PatientRecord&) { return std::vector<double>(2, 0.0); }};
  EXPECT_THROW(MakeAttackSample(bad, r, false), Error);
}

TEST(PrivacyLeakage, PureNoiseTargetLeaksNothing) {
  std::mt19937_64 gen(1);
  // Leakage here is the gap between two sampled rates, sd ~ 0.5 sqrt(1/k + 1/K).
  const auto members = Group("m", 2400, gen), nonmembers = Group("n", 2000, gen);
  auto noise = std::make_shared<Rng>(2);
  AttackTarget t{"noise", 0.0, [noise](const PatientRecord& rec) {
                   std::vector<double> out(static_cast<size_t>(rec.steps()));
                   for (double& v : out) v = noise->Uniform(0.0, 4.0);
                   return out;
                 }};
  // Threshold at the typical loss so both rates sit near one half.
  std::vector<double> losses;
  for (const auto& r : members) losses.push_back(MakeAttackSample(t, r, true).mean_loss);
  t.avg_train_loss = Quantile(losses, 0.5);
  Rng rng(3);
  const LeakageReport rep = PrivacyLeakage(t, members, nonmembers, kDefaultResamples, rng);
  EXPECT_EQ(rep.resample_leakage.size(), 1000u);
  EXPECT_NEAR(rep.leakage, 0.0, 0.05);
  EXPECT_GT(rep.tpr, 0.2);
  EXPECT_GT(rep.fpr, 0.2);
  EXPECT_LE(rep.q25, rep.median);
  EXPECT_LE(rep.median, rep.q75);
}

TEST(PrivacyLeakage, MemorizingTargetLeaksFully) {
  std::mt19937_64 gen(4);
  const auto members = Group("m", 50, gen), nonmembers = Group("n", 40, gen);
  std::set<std::string> seen;
  for (const auto& r : members) seen.insert(r.patient_id);
  AttackTarget t{"memo", 0.25, [seen](const PatientRecord& rec) {
                   std::vector<double> out(rec.labels.begin(), rec.labels.end());
                   if (!seen.count(rec.patient_id)) {
                     for (double& v : out) v = v >= 2 ? 0.0 : 4.0;
                   }
                   return out;
                 }};
  Rng rng(5);
  const LeakageReport rep = PrivacyLeakage(t, members, nonmembers, 100, rng);
  EXPECT_EQ(rep.tpr, 1.0);
  EXPECT_EQ(rep.fpr, 0.0);
  EXPECT_EQ(rep.leakage, 1.0);
}

TEST(PrivacyLeakage, Errors) {
  std::mt19937_64 gen(6);
  const auto g = Group("m", 3, gen);
  AttackTarget t{"c", 1.0, [](const PatientRecord& rec) { return std::vector<double>(rec.steps(), 1.0); }};
  Rng rng(1);
  try {
    PrivacyLeakage(t, g, g, 0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  EXPECT_THROW(PrivacyLeakage(t, g, std::vector<PatientRecord>{}, 10, rng), Error);
}

std::vector<AttackSample> Samples(int n, double shift, std::mt19937_64& gen, bool member) {
  std::gamma_distribution<double> loss(2.0, 0.5);  // identically distributed up to `shift`
  std::vector<AttackSample> out;
  for (int i = 0; i < n; ++i) {
    AttackSample s;
    s.patient_id = std::to_string(i);
    s.mean_loss = loss(gen) + shift;
    s.is_member = member;
    out.push_back(s);
  }
  return out;
}

TEST(LeakageFromSamples, FixesSmallerGroup) {
  std::mt19937_64 gen(7);
  const auto big = Samples(200, 0.0, gen, true), small = Samples(50, 0.0, gen, false);
  Rng rng(8);
  const LeakageReport a = LeakageFromSamples(big, small, 1.0, 300, rng);
  EXPECT_EQ(std::set<double>(a.resample_fpr.begin(), a.resample_fpr.end()).size(), 1u);
  EXPECT_GT(std::set<double>(a.resample_tpr.begin(), a.resample_tpr.end()).size(), 1u);
  for (double v : a.resample_tpr) EXPECT_NEAR(v * 50, std::round(v * 50), 1e-9);  // rates over 50 draws
  const LeakageReport b = LeakageFromSamples(small, big, 1.0, 300, rng);
  EXPECT_EQ(std::set<double>(b.resample_tpr.begin(), b.resample_tpr.end()).size(), 1u);
  EXPECT_GT(std::set<double>(b.resample_fpr.begin(), b.resample_fpr.end()).size(), 1u);
}

TEST(LeakageFromSamples, AntisymmetricForIdenticalGroups) {
  std::mt19937_64 gen(9);
  double total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = Samples(150, 0.0, gen, true), b = Samples(100, 0.0, gen, false);
    Rng r1(10 + trial), r2(10 + trial);
    const double threshold = 1.0;
    const LeakageReport ab = LeakageFromSamples(a, b, threshold, 1000, r1);
    const LeakageReport ba = LeakageFromSamples(b, a, threshold, 1000, r2);
    EXPECT_NEAR(ab.leakage, 0.0, 0.15);
    EXPECT_NEAR(ab.leakage + ba.leakage, 0.0, 0.05);
    total += ab.leakage;
  }
  EXPECT_NEAR(total / 20, 0.0, 0.05);
}

TEST(LeakageFromSamples, Reproducible) {
  std::mt19937_64 gen(11);
  const auto a = Samples(80, -0.2, gen, true), b = Samples(30, 0.0, gen, false);
  Rng r1(4), r2(4);
  const LeakageReport x = LeakageFromSamples(a, b, 0.9, 200, r1);
  const LeakageReport y = LeakageFromSamples(a, b, 0.9, 200, r2);
  EXPECT_EQ(x.resample_leakage, y.resample_leakage);
  EXPECT_EQ(x.leakage, y.leakage);
  EXPECT_EQ(x.q25, y.q25);
}

TEST(PrivacyLeakage, NoisedEnsembleDrawsFreshNoise) {
  std::mt19937_64 gen(12);
  const auto members = Group("m", 30, gen), nonmembers = Group("n", 30, gen);
  const WeightVector w = UniformWeights(4);
  auto acc = std::make_shared<PrivacyAccountant>();
  auto noise = std::make_shared<Rng>(13);
  AttackTarget t{"ensemble", 1.0, [=](const PatientRecord& rec) {
                   std::vector<double> out;
                   for (int s = 0; s < rec.steps(); ++s) {
                     out.push_back(PrivatePredict(std::vector<double>(4, 1.0), w, {1.0, 4.0}, *acc, *noise));
                   }
                   return out;
                 }};
  Rng rng(14);
  PrivacyLeakage(t, members, nonmembers, 10, rng);
  size_t steps = 0;
  for (const auto& r : members) steps += static_cast<size_t>(r.steps());
  for (const auto& r : nonmembers) steps += static_cast<size_t>(r.steps());
  EXPECT_EQ(acc->queries(), steps);
  const auto a = t.predict(members[0]), b = t.predict(members[0]);
  EXPECT_NE(a, b);
}

TEST(Quantile, Type7) {
  EXPECT_EQ(Quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(Quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_EQ(Quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_EQ(Quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_EQ(Quantile({7}, 0.75), 7.0);
  EXPECT_THROW(Quantile({}, 0.5), Error);
}

TEST(EpsilonGrid, HalfDecadesFromMilliToKilo) {
  const auto g = EpsilonGrid();
  ASSERT_EQ(g.size(), 13u);
  EXPECT_NEAR(g.front(), 1e-3, 1e-18);
  EXPECT_EQ(g[6], 1.0);
  EXPECT_NEAR(g.back(), 1e3, 1e-12);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::sqrt(10.0), 1e-12);
}

TEST(LeakageCsv, RoundTrip) {
  std::vector<LeakageRow> rows;
  for (int fold = -1; fold < 2; ++fold) {
    for (double eps : {0.001, 1.0, std::numeric_limits<double>::infinity()}) {
      LeakageRow r;
      r.target_kind = fold < 0 ? "full" : "ensemble";
      r.fold = fold;
      r.report.epsilon = eps;
      r.report.tpr = 0.625;
      r.report.fpr = 0.5;
      r.report.q25 = 0.1;
      r.report.median = 0.125;
      r.report.leakage = 0.125;
      r.report.q75 = 0.2;
      rows.push_back(r);
    }
  }
  const auto dir = testing::TempDir("leakage_csv");
  WriteLeakageCsv(dir / "l.csv", rows);
  WriteLeakageFoldsCsv(dir / "lf.csv", rows);
  const auto back = ReadLeakageCsv(dir / "l.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].report.epsilon, INFINITY);
  EXPECT_EQ(back[0].report.epsilon, 0.001);
  EXPECT_EQ(back[1].report.leakage, 0.125);
  EXPECT_EQ(back[1].target_kind, "full");
  const std::string folds = testing::ReadFile(dir / "lf.csv");
  EXPECT_EQ(folds.rfind("fold,epsilon,tpr_median,fpr,leakage_q25,leakage_median,leakage_q75,target_kind\n", 0), 0u);
  EXPECT_EQ(std::count(folds.begin(), folds.end(), '\n'), 7);
}

}  // namespace
}  // namespace dpens
