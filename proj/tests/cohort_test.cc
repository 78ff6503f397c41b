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
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dpens/cohort.h"
#include "dpens/error.h"
#include "testing.h"

namespace dpens {
namespace {

using testing::MakeRecord;
using testing::TempDir;

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

FeatureCatalog TwoFeatures() { return FeatureCatalog({{0, "hr", 80.0}, {1, "temp", 37.0}}); }

constexpr const char* kTimelineHeader = "patient_id,timestamp_min,feature_id,value\n";
constexpr const char* kLabelHeader = "patient_id,window_start_min,window_end_min,label\n";

TEST(IngestCsv, HeaderOnlyGivesEmptyCohort) {
  const auto dir = TempDir("ingest_empty");
  WriteText(dir / "t.csv", kTimelineHeader);
  WriteText(dir / "l.csv", kLabelHeader);
  EXPECT_TRUE(IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures()).empty());
}

TEST(IngestCsv, SortsEventsByTimestamp) {
  const auto dir = TempDir("ingest_sort");
  WriteText(dir / "t.csv", std::string(kTimelineHeader) + "p1,90,0,70\np1,10,1,36.5\n");
  WriteText(dir / "l.csv", std::string(kLabelHeader) + "p1,0,120,0\n");
  const auto cohort = IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures());
  ASSERT_EQ(cohort.size(), 1u);
  ASSERT_EQ(cohort[0].events.size(), 2u);
  EXPECT_EQ(cohort[0].events[0].timestamp_min, 10.0);
  EXPECT_EQ(cohort[0].events[1].timestamp_min, 90.0);
  EXPECT_EQ(cohort[0].admission_len_min, 120.0);
}

TEST(IngestCsv, RejectsLabelOutsideScale) {
  const auto dir = TempDir("ingest_label5");
  WriteText(dir / "t.csv", std::string(kTimelineHeader) + "p1,10,0,70\n");
  WriteText(dir / "l.csv", std::string(kLabelHeader) + "p1,0,120,5\n");
  try {
    IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures());
    FAIL() << "label 5 accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
}

TEST(IngestCsv, MalformedRowReportsLine) {
  const auto dir = TempDir("ingest_malformed");
  WriteText(dir / "t.csv", std::string(kTimelineHeader) + "p1,10,0,70\np1,abc,0,70\n");
  WriteText(dir / "l.csv", kLabelHeader);
  try {
    IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures());
    FAIL() << "malformed row accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
}

TEST(IngestCsv, UnknownFeatureIsCatalogError) {
  const auto dir = TempDir("ingest_catalog");
  WriteText(dir / "t.csv", std::string(kTimelineHeader) + "p1,10,7,70\n");
  WriteText(dir / "l.csv", kLabelHeader);
  try {
    IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures());
    FAIL() << "unknown feature accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCatalog);
  }
}

TEST(IngestCsv, RejectsOverlappingWindows) {
  const auto dir = TempDir("ingest_overlap");
  WriteText(dir / "t.csv", std::string(kTimelineHeader) + "p1,10,0,70\n");
  WriteText(dir / "l.csv", std::string(kLabelHeader) + "p1,0,120,0\np1,60,180,1\n");
  EXPECT_THROW(IngestCsv(dir / "t.csv", dir / "l.csv", TwoFeatures()), Error);
}

TEST(IngestCsv, WritersRoundTrip) {
  CohortSpec spec;
  spec.n_sepsis = 3;
  spec.n_nonsepsis = 4;
  spec.n_features = 5;
  const auto cohort = SynthesizeCohort(spec, 11);
  const auto dir = TempDir("ingest_roundtrip");
  WriteTimelinesCsv(dir / "t.csv", cohort);
  WriteLabelsCsv(dir / "l.csv", cohort);
  SynthCatalog(spec).Save(dir / "c.csv");
  const FeatureCatalog catalog = FeatureCatalog::Load(dir / "c.csv");
  ASSERT_EQ(catalog.size(), 5u);
  const auto back = IngestCsv(dir / "t.csv", dir / "l.csv", catalog);
  ASSERT_EQ(back.size(), cohort.size());
  std::map<std::string, const RawTimeline*> by_id;
  for (const auto& r : cohort) by_id[r.patient_id] = &r;
  for (const auto& r : back) {
    const RawTimeline& orig = *by_id.at(r.patient_id);
    ASSERT_EQ(r.events.size(), orig.events.size());
    for (size_t i = 0; i < r.events.size(); ++i) {
      EXPECT_EQ(r.events[i].timestamp_min, orig.events[i].timestamp_min);
      EXPECT_EQ(r.events[i].feature_id, orig.events[i].feature_id);
      EXPECT_EQ(r.events[i].value, orig.events[i].value);
    }
    ASSERT_EQ(r.label_windows.size(), orig.label_windows.size());
    for (size_t i = 0; i < r.label_windows.size(); ++i) {
      EXPECT_EQ(r.label_windows[i].label, orig.label_windows[i].label);
      EXPECT_EQ(r.label_windows[i].end_min, orig.label_windows[i].end_min);
    }
  }
}

TEST(Synthesize, NonSepsisOnlyCohort) {
  CohortSpec spec;
  spec.n_sepsis = 0;
  spec.n_nonsepsis = 3;
  const auto cohort = SynthesizeCohort(spec, 7);
  ASSERT_EQ(cohort.size(), 3u);
  const FeatureCatalog catalog = SynthCatalog(spec);
  for (const RawTimeline& raw : cohort) {
    const PatientRecord rec = BuildRecord(raw, catalog);
    EXPECT_FALSE(rec.is_sepsis);
    EXPECT_FALSE(rec.onset_step.has_value());
    for (const LabelWindow& w : raw.label_windows) EXPECT_LE(w.label, 1);
  }
}

TEST(Synthesize, DeterministicInSeed) {
  CohortSpec spec;
  spec.n_sepsis = 5;
  spec.n_nonsepsis = 5;
  const auto dir = TempDir("synth_det");
  for (int run = 0; run < 2; ++run) {
    const auto cohort = SynthesizeCohort(spec, 3);
    WriteTimelinesCsv(dir / ("t" + std::to_string(run) + ".csv"), cohort);
    WriteLabelsCsv(dir / ("l" + std::to_string(run) + ".csv"), cohort);
  }
  EXPECT_EQ(testing::ReadFile(dir / "t0.csv"), testing::ReadFile(dir / "t1.csv"));
  EXPECT_EQ(testing::ReadFile(dir / "l0.csv"), testing::ReadFile(dir / "l1.csv"));
  const auto other = SynthesizeCohort(spec, 4);
  WriteTimelinesCsv(dir / "t2.csv", other);
  EXPECT_NE(testing::ReadFile(dir / "t0.csv"), testing::ReadFile(dir / "t2.csv"));
}

TEST(Synthesize, RejectsNonPositiveCounts) {
  CohortSpec spec;
  spec.n_sepsis = 0;
  spec.n_nonsepsis = 0;
  EXPECT_THROW(SynthesizeCohort(spec, 1), Error);
  spec.n_nonsepsis = -1;
  spec.n_sepsis = 4;
  EXPECT_THROW(SynthesizeCohort(spec, 1), Error);
}

TEST(Synthesize, SepsisLabelsEscalateNearOnset) {
  CohortSpec spec;
  spec.n_sepsis = 20;
  spec.n_nonsepsis = 0;
  spec.n_features = 6;
  const FeatureCatalog catalog = SynthCatalog(spec);
  for (const RawTimeline& raw : SynthesizeCohort(spec, 5)) {
    const PatientRecord rec = BuildRecord(raw, catalog);
    ASSERT_TRUE(rec.is_sepsis) << rec.patient_id;
    ASSERT_TRUE(rec.onset_step.has_value());
    const LabelWindow* first = nullptr;
    for (const LabelWindow& w : raw.label_windows) {
      if (w.label >= kFirstSepsisLabel) {
        first = &w;
        break;
      }
    }
    ASSERT_NE(first, nullptr);
    EXPECT_EQ(*rec.onset_min, ResolveOnset(*first));
    EXPECT_GE(rec.labels[static_cast<size_t>(*rec.onset_step)], kFirstSepsisLabel);
    for (int t = 0; (t + 0.5) * kStepMinutes < first->start_min; ++t) {
      EXPECT_LT(rec.labels[static_cast<size_t>(t)], kFirstSepsisLabel);
    }
    EXPECT_GT(*rec.onset_min, kOnAdmissionHours * 60.0);
  }
}

TEST(Synthesize, TableTwoProportions) {
  CohortSpec spec;  // default cohort counts
  spec.n_features = 4;
  const auto cohort = SynthesizeCohort(spec, 1);
  const FeatureCatalog catalog = SynthCatalog(spec);
  std::vector<PatientRecord> records;
  for (const auto& raw : cohort) records.push_back(BuildRecord(raw, catalog));
  records = FilterCohort(std::move(records));
  int sepsis = 0;
  for (const auto& r : records) sepsis += r.is_sepsis;
  const int nonsepsis = static_cast<int>(records.size()) - sepsis;
  EXPECT_EQ(records.size(), 1275u);
  EXPECT_EQ(nonsepsis, 979);
  EXPECT_EQ(sepsis, 296);
  EXPECT_NEAR(static_cast<double>(nonsepsis) / sepsis, 3.3, 0.05);
}

TEST(CarryForward, ValueAtStepZeroPersists) {
  Eigen::MatrixXd binned = Eigen::MatrixXd::Constant(6, 1, std::nan(""));
  binned(0, 0) = 3.0;
  const Eigen::MatrixXd out = CarryForwardFill(binned, std::vector<double>{9.0});
  for (int t = 0; t < 6; ++t) EXPECT_EQ(out(t, 0), 3.0);
}

TEST(CarryForward, UnobservedFeatureUsesDefault) {
  RawTimeline raw;
  raw.admission_len_min = 300;
  raw.events = {{15.0, 0, 1.0}};
  const Eigen::MatrixXd out = CarryForwardFill(raw, std::vector<double>{0.0, 37.0});
  ASSERT_EQ(out.rows(), 10);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(out(t, 1), 37.0);
}

TEST(CarryForward, HoldsUntilNextObservation) {
  RawTimeline raw;
  raw.admission_len_min = 8 * kStepMinutes;
  raw.events = {{2 * kStepMinutes + 1, 0, 1.0}, {5 * kStepMinutes, 0, 4.0}};
  const Eigen::MatrixXd out = CarryForwardFill(raw, std::vector<double>{-1.0});
  const std::vector<double> expect = {-1, -1, 1, 1, 1, 4, 4, 4};
  for (int t = 0; t < 8; ++t) EXPECT_EQ(out(t, 0), expect[static_cast<size_t>(t)]) << t;
}

TEST(CarryForward, Idempotent) {
  std::mt19937_64 gen(3);
  std::bernoulli_distribution observed(0.2);
  std::normal_distribution<double> value;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd binned(30, 4);
    for (int t = 0; t < 30; ++t)
      for (int f = 0; f < 4; ++f) binned(t, f) = observed(gen) ? value(gen) : std::nan("");
    const std::vector<double> defaults = {0.5, 1.5, 2.5, 3.5};
    const Eigen::MatrixXd once = CarryForwardFill(binned, defaults);
    EXPECT_FALSE(once.hasNaN());
    EXPECT_EQ(CarryForwardFill(once, defaults), once);
  }
}

TEST(Standardize, ExamplesAndInverse) {
  FeatureStats stats{{80.0, 0.0}, {10.0, 2.0}};
  Eigen::MatrixXd x(3, 2);
  x << 80, 0, 90, 2, 95, -3;
  const Eigen::MatrixXd z = Standardize(x, stats);
  EXPECT_EQ(z(0, 0), 0.0);
  EXPECT_EQ(z(1, 0), 1.0);
  EXPECT_NEAR(z(2, 0), 1.5, 1e-15);
  EXPECT_EQ(z(1, 1), 1.0);

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-100, 100);
  Eigen::MatrixXd big(20, 2);
  for (int i = 0; i < big.size(); ++i) big.data()[i] = u(gen);
  const Eigen::MatrixXd zb = Standardize(big, stats);
  for (int t = 0; t < 20; ++t) {
    for (int f = 0; f < 2; ++f) {
      EXPECT_NEAR(zb(t, f) * stats.stddev[static_cast<size_t>(f)] + stats.mean[static_cast<size_t>(f)],
                  big(t, f), 1e-12);
    }
  }
}

TEST(Standardize, ConstantFeatureUsesUnitScale) {
  SetWarningsEnabled(false);
  FeatureStats stats{{5.0}, {0.0}};
  Eigen::MatrixXd x(2, 1);
  x << 5, 7;
  const Eigen::MatrixXd z = Standardize(x, stats);
  SetWarningsEnabled(true);
  EXPECT_EQ(z(0, 0), 0.0);
  EXPECT_EQ(z(1, 0), 2.0);
}

// Onsets are minutes since admission; admission clock times are chosen so the
// window bounds land on the listed wall-clock hours.
TEST(ResolveOnset, WindowMidpoints) {
  const double h = 60.0;
  // Admitted at 2 p.m.: 24h window 2 p.m. -> 2 p.m. the next day.
  EXPECT_EQ(std::fmod(14 * h + ResolveOnset({0, 24 * h, 2}), 24 * h), 2 * h);
  // Admitted at midnight: 6h window 2 a.m. -> 8 a.m.
  EXPECT_EQ(ResolveOnset({2 * h, 8 * h, 2}), 5 * h);
  // Admitted at midnight: 6h window 8 p.m. -> 2 a.m.
  EXPECT_EQ(ResolveOnset({20 * h, 26 * h, 2}), 23 * h);
}

TEST(BuildRecord, OnsetFromFirstSepsisWindow) {
  RawTimeline raw;
  raw.patient_id = "p";
  raw.admission_len_min = 100 * 60;
  raw.events = {{0, 0, 70}};
  raw.label_windows = {{0, 24 * 60, 0}, {24 * 60, 48 * 60, 1}, {50 * 60, 56 * 60, 2}, {56 * 60, 62 * 60, 3}};
  const PatientRecord rec = BuildRecord(raw, TwoFeatures());
  EXPECT_TRUE(rec.is_sepsis);
  ASSERT_TRUE(rec.onset_min.has_value());
  EXPECT_EQ(*rec.onset_min, 53 * 60.0);
  EXPECT_EQ(*rec.onset_step, 106);
  EXPECT_EQ(rec.steps(), 200);
  EXPECT_EQ(rec.labels[0], 0);
  EXPECT_EQ(rec.labels[60], 1);
  EXPECT_EQ(rec.labels[110], 2);
  EXPECT_EQ(rec.labels[115], 3);
  EXPECT_EQ(rec.grid(199, 1), 37.0);
}

PatientRecord Stub(std::string id, double stay_h, std::optional<double> onset_h) {
  PatientRecord r;
  r.patient_id = std::move(id);
  r.stay_hours = stay_h;
  r.is_sepsis = onset_h.has_value();
  if (onset_h) {
    r.onset_min = *onset_h * 60.0;
    r.onset_step = static_cast<int>(*onset_h * 2);
  }
  r.grid = Eigen::MatrixXd::Zero(std::max(1, static_cast<int>(stay_h * 2)), 1);
  r.labels.assign(static_cast<size_t>(r.grid.rows()), 0);
  return r;
}

TEST(FilterCohort, Examples) {
  std::vector<PatientRecord> in = {Stub("early", 100, 40), Stub("short", 12, std::nullopt),
                                   Stub("kept", 100, 50), Stub("boundary", 100, 48),
                                   Stub("stay16", 16, std::nullopt), Stub("stay15.5", 15.5, std::nullopt)};
  const auto out = FilterCohort(in);
  std::set<std::string> ids;
  for (const auto& r : out) ids.insert(r.patient_id);
  EXPECT_EQ(ids, (std::set<std::string>{"kept", "stay16"}));
}

TEST(FilterCohort, MonotoneSubset) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> stay(5, 200), onset(10, 150);
  std::bernoulli_distribution sepsis(0.3);
  std::vector<PatientRecord> in;
  for (int i = 0; i < 300; ++i) {
    in.push_back(Stub("p" + std::to_string(i), stay(gen),
                      sepsis(gen) ? std::optional<double>(onset(gen)) : std::nullopt));
  }
  const auto out = FilterCohort(in);
  std::set<std::string> input_ids;
  for (const auto& r : in) input_ids.insert(r.patient_id);
  for (const auto& r : out) {
    EXPECT_TRUE(input_ids.count(r.patient_id));
    EXPECT_GE(r.stay_hours, kMinStayHours);
    if (r.is_sepsis) {
      EXPECT_GT(*r.onset_min, kOnAdmissionHours * 60.0);
    }
  }
}

TEST(Partition, EightNonSepsisSplitEvenly) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 8; ++i) recs.push_back(Stub("n" + std::to_string(i), 20 + i, std::nullopt));
  const auto sizes = AssignPartitions(recs, 1).Sizes();
  for (size_t s : sizes) EXPECT_EQ(s, 2u);
}

TEST(Partition, GroupOfFourDependsOnlyOnSeed) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(Stub("s" + std::to_string(i), 200, 50 + 10 * i));
  const auto a = AssignPartitions(recs, 5);
  const auto b = AssignPartitions(recs, 5);
  EXPECT_EQ(a.by_patient, b.by_patient);
  std::set<Partition> used;
  for (const auto& [id, p] : a.by_patient) used.insert(p);
  EXPECT_EQ(used.size(), 4u);
  std::vector<PatientRecord> reversed(recs.rbegin(), recs.rend());
  EXPECT_EQ(AssignPartitions(reversed, 5).by_patient, a.by_patient);
  bool differs = false;
  for (uint64_t seed = 6; seed < 30 && !differs; ++seed) differs = AssignPartitions(recs, seed).by_patient != a.by_patient;
  EXPECT_TRUE(differs);
}

TEST(Partition, TableTwoSizes) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 979; ++i) recs.push_back(Stub("n" + std::to_string(i), 16 + 0.5 * i, std::nullopt));
  for (int i = 0; i < 296; ++i) recs.push_back(Stub("s" + std::to_string(i), 300, 48.5 + 0.5 * i));
  const PartitionAssignment a = AssignPartitions(recs, 1);
  const auto sizes = a.Sizes();
  EXPECT_EQ(sizes, (std::array<size_t, 4>{319, 319, 319, 318}));
  std::array<int, 4> nonsepsis{}, sepsis{};
  for (const auto& r : recs) {
    const size_t p = static_cast<size_t>(*a.Find(r.patient_id));
    (r.is_sepsis ? sepsis : nonsepsis)[p]++;
  }
  EXPECT_EQ(nonsepsis, (std::array<int, 4>{245, 245, 245, 244}));
  EXPECT_EQ(sepsis, (std::array<int, 4>{74, 74, 74, 74}));
}

TEST(Partition, FoldLayout) {
  using P = Partition;
  const std::array<std::array<P, 4>, 4> expect = {{{P::kA, P::kB, P::kC, P::kD},
                                                    {P::kB, P::kC, P::kD, P::kA},
                                                    {P::kC, P::kD, P::kA, P::kB},
                                                    {P::kD, P::kA, P::kB, P::kC}}};
  for (int k = 0; k < 4; ++k) {
    const Fold f = FoldLayout(k);
    EXPECT_EQ(f.train[0], expect[k][0]);
    EXPECT_EQ(f.train[1], expect[k][1]);
    EXPECT_EQ(f.validation, expect[k][2]);
    EXPECT_EQ(f.test, expect[k][3]);
  }
  EXPECT_THROW(FoldLayout(4), Error);
}

TEST(Partition, CountsPreservedAndSepsisBalanced) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> count(0, 60);
    std::uniform_real_distribution<double> stay(16, 400), onset(49, 300);
    const int n_non = count(gen), n_sep = count(gen);
    std::vector<PatientRecord> recs;
    for (int i = 0; i < n_non; ++i) recs.push_back(Stub("n" + std::to_string(i), stay(gen), std::nullopt));
    for (int i = 0; i < n_sep; ++i) recs.push_back(Stub("s" + std::to_string(i), 400, onset(gen)));
    const PartitionAssignment a = AssignPartitions(recs, static_cast<uint64_t>(trial));
    const auto sizes = a.Sizes();
    EXPECT_EQ(sizes[0] + sizes[1] + sizes[2] + sizes[3], recs.size());
    EXPECT_EQ(a.by_patient.size(), recs.size());
    std::array<int, 4> sep{};
    for (const auto& r : recs) {
      if (r.is_sepsis) sep[static_cast<size_t>(*a.Find(r.patient_id))]++;
    }
    EXPECT_LE(*std::max_element(sep.begin(), sep.end()) - *std::min_element(sep.begin(), sep.end()), 1);
  }
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TEST(Partition, MedianStaySkewBoundedByGroupSpan) {
  std::mt19937_64 gen(23);
  std::lognormal_distribution<double> stay(std::log(56.0), 0.6);
  std::vector<PatientRecord> recs;
  std::vector<double> stays;
  for (int i = 0; i < 1001; ++i) {
    const double s = 16 + stay(gen);
    stays.push_back(s);
    recs.push_back(Stub("n" + std::to_string(i), s, std::nullopt));
  }
  std::vector<double> sorted = stays;
  std::sort(sorted.begin(), sorted.end());
  double span = 0;
  for (size_t g = 0; g + 3 < sorted.size(); g += 4) span = std::max(span, sorted[g + 3] - sorted[g]);
  const double global = Median(stays);
  const PartitionAssignment a = AssignPartitions(recs, 2);
  std::array<std::vector<double>, 4> parts;
  for (const auto& r : recs) parts[static_cast<size_t>(*a.Find(r.patient_id))].push_back(r.stay_hours);
  for (const auto& p : parts) EXPECT_LE(std::abs(Median(p) - global), span);
}

TEST(Partition, CsvRoundTrip) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 11; ++i) recs.push_back(Stub("n" + std::to_string(i), 20 + i, std::nullopt));
  const PartitionAssignment a = AssignPartitions(recs, 3);
  const auto dir = TempDir("partition_csv");
  WritePartitionsCsv(dir / "p.csv", a);
  EXPECT_EQ(ReadPartitionsCsv(dir / "p.csv").by_patient, a.by_patient);
}

TEST(MakeFold, StandardizesWithTrainStatistics) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 16; ++i) {
    Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(40, 2, static_cast<double>(i));
    grid.col(1).setConstant(100.0 + i * i);
    recs.push_back(MakeRecord("p" + std::to_string(i), grid, std::vector<int>(40, 0)));
  }
  const PartitionAssignment a = AssignPartitions(recs, 4);
  for (int k = 0; k < 4; ++k) {
    const FoldData fd = MakeFold(recs, a, k);
    EXPECT_EQ(fd.train.size(), 8u);
    EXPECT_EQ(fd.validation.size(), 4u);
    EXPECT_EQ(fd.test.size(), 4u);
    for (const auto& r : fd.train) {
      const Partition p = *a.Find(r.patient_id);
      EXPECT_TRUE(p == fd.layout.train[0] || p == fd.layout.train[1]);
    }
    for (const auto& r : fd.test) EXPECT_EQ(*a.Find(r.patient_id), fd.layout.test);
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(2), sq = Eigen::ArrayXd::Zero(2);
    double n = 0;
    for (const auto& r : fd.train) {
      sum += r.grid.colwise().sum().transpose().array();
      sq += r.grid.array().square().colwise().sum().transpose();
      n += r.grid.rows();
    }
    for (int f = 0; f < 2; ++f) {
      EXPECT_NEAR(sum(f) / n, 0.0, 1e-12);
      EXPECT_NEAR(sq(f) / n, 1.0, 1e-12);
    }
    // Raw value = z * sd + mean, with the fold's train statistics.
    const PatientRecord& t = fd.test.front();
    const int id = std::stoi(t.patient_id.substr(1));
    EXPECT_NEAR(t.grid(0, 0) * fd.stats.stddev[0] + fd.stats.mean[0], id, 1e-9);
  }
}

}  // namespace
}  // namespace dpens
