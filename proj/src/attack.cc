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

#include "dpens/attack.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpens/csv.h"
#include "dpens/error.h"

namespace dpens {
namespace {

constexpr std::string_view kLeakageHeader =
    "epsilon,tpr_median,fpr,leakage_q25,leakage_median,leakage_q75,target_kind";

double PositiveRate(std::span<const AttackSample> samples, std::span<const size_t> pick, double threshold) {
  size_t hits = 0;
  for (size_t i : pick) hits += MembershipInfer(samples[i].mean_loss, threshold) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pick.size());
}

void WriteRow(CsvWriter& out, const LeakageRow& row) {
  const LeakageReport& r = row.report;
  out << r.epsilon << r.tpr << r.fpr << r.q25 << r.median << r.q75 << row.target_kind;
  out.EndRow();
}

}  // namespace

AttackSample MakeAttackSample(const AttackTarget& target, const PatientRecord& record, bool is_member) {
  AttackSample s;
  s.patient_id = record.patient_id;
  s.is_member = is_member;
  const std::vector<double> pred = target.predict(record);
  if (pred.size() != static_cast<size_t>(record.steps())) {
    throw Error(ErrorCode::kShape, "target returned the wrong number of steps");
  }
  s.losses.resize(pred.size());
  double sum = 0.0;
  for (size_t t = 0; t < pred.size(); ++t) {
    const double d = pred[t] - record.labels[t];
    s.losses[t] = d * d;
    sum += s.losses[t];
  }
  s.mean_loss = sum / static_cast<double>(pred.size());
  return s;
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kEmpty, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

LeakageReport LeakageFromSamples(std::span<const AttackSample> members, std::span<const AttackSample> nonmembers,
                                 double threshold, int resamples, Rng& rng) {
  if (resamples < 1) throw Error(ErrorCode::kInvalidArgument, "resamples must be >= 1");
  if (members.empty() || nonmembers.empty()) {
    throw Error(ErrorCode::kEmpty, "membership attack needs members and non-members");
  }
  const bool resample_members = members.size() >= nonmembers.size();
  std::span<const AttackSample> fixed = resample_members ? nonmembers : members;
  std::span<const AttackSample> pooled = resample_members ? members : nonmembers;

  std::vector<size_t> fixed_idx(fixed.size());
  std::iota(fixed_idx.begin(), fixed_idx.end(), size_t{0});
  const double fixed_rate = PositiveRate(fixed, fixed_idx, threshold);

  LeakageReport r;
  std::vector<size_t> idx(pooled.size());
  const size_t k = fixed.size();
  for (int s = 0; s < resamples; ++s) {
    std::iota(idx.begin(), idx.end(), size_t{0});
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + static_cast<size_t>(rng.UniformInt(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    const double rate = PositiveRate(pooled, std::span<const size_t>(idx.data(), k), threshold);
    const double tpr = resample_members ? rate : fixed_rate;
    const double fpr = resample_members ? fixed_rate : rate;
    r.resample_tpr.push_back(tpr);
    r.resample_fpr.push_back(fpr);
    r.resample_leakage.push_back(tpr - fpr);
  }
  r.tpr = Quantile(r.resample_tpr, 0.5);
  r.fpr = Quantile(r.resample_fpr, 0.5);
  r.q25 = Quantile(r.resample_leakage, 0.25);
  r.median = Quantile(r.resample_leakage, 0.5);
  r.q75 = Quantile(r.resample_leakage, 0.75);
  r.leakage = r.median;
  return r;
}

LeakageReport PrivacyLeakage(const AttackTarget& target, std::span<const PatientRecord> members,
                             std::span<const PatientRecord> nonmembers, int resamples, Rng& rng) {
  if (resamples < 1) throw Error(ErrorCode::kInvalidArgument, "resamples must be >= 1");
  std::vector<AttackSample> in, out;
  in.reserve(members.size());
  out.reserve(nonmembers.size());
  for (const PatientRecord& r : members) in.push_back(MakeAttackSample(target, r, true));
  for (const PatientRecord& r : nonmembers) out.push_back(MakeAttackSample(target, r, false));
  return LeakageFromSamples(in, out, target.avg_train_loss, resamples, rng);
}

std::vector<double> EpsilonGrid() {
  std::vector<double> grid;
  for (int k = -6; k <= 6; ++k) grid.push_back(std::pow(10.0, k / 2.0));
  return grid;
}

void WriteLeakageCsv(const std::filesystem::path& path, std::span<const LeakageRow> rows) {
  CsvWriter out(path, kLeakageHeader);
  for (const LeakageRow& row : rows) {
    if (row.fold < 0) WriteRow(out, row);
  }
}

void WriteLeakageFoldsCsv(const std::filesystem::path& path, std::span<const LeakageRow> rows) {
  CsvWriter out(path, "fold," + std::string(kLeakageHeader));
  for (const LeakageRow& row : rows) {
    if (row.fold < 0) continue;
    out << row.fold;
    WriteRow(out, row);
  }
}

std::vector<LeakageRow> ReadLeakageCsv(const std::filesystem::path& path) {
  std::vector<LeakageRow> rows;
  for (const CsvRow& row : ReadCsv(path, kLeakageHeader)) {
    LeakageRow r;
    r.report.epsilon = ParseDouble(row.fields[0], row.line);
    r.report.tpr = ParseDouble(row.fields[1], row.line);
    r.report.fpr = ParseDouble(row.fields[2], row.line);
    r.report.q25 = ParseDouble(row.fields[3], row.line);
    r.report.median = ParseDouble(row.fields[4], row.line);
    r.report.q75 = ParseDouble(row.fields[5], row.line);
    r.report.leakage = r.report.median;
    r.target_kind = row.fields[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dpens
