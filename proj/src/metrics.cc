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

#include "dpens/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "dpens/csv.h"
#include "dpens/error.h"

namespace dpens {
namespace {

constexpr int kStepsPerHour = 60 / kStepMinutes;

std::string HoursName(double h) {
  std::string s = FormatDouble(h);
  return s + "h";
}

void CheckBinary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShape, "scores and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
}

double Mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double SampleVariance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

HorizonSpec HorizonSpec::Point(double hours) {
  HorizonSpec s{HorizonKind::kPoint, 0.0, hours};
  s.Validate();
  return s;
}

HorizonSpec HorizonSpec::Interval(double near_hours, double far_hours) {
  HorizonSpec s{HorizonKind::kInterval, near_hours, far_hours};
  s.Validate();
  return s;
}

void HorizonSpec::Validate() const {
  if (!(far_hours > 0.0)) throw Error(ErrorCode::kInvalidArgument, "horizon hours must be positive");
  if (kind == HorizonKind::kPoint && near_hours != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "point horizon has no near edge");
  }
  if (kind == HorizonKind::kInterval && !(near_hours > 0.0 && near_hours < far_hours)) {
    throw Error(ErrorCode::kInvalidArgument, "interval horizon needs 0 < near < far");
  }
}

std::string HorizonSpec::Name() const {
  if (kind == HorizonKind::kPoint) return HoursName(far_hours);
  return HoursName(far_hours) + "-" + HoursName(near_hours);
}

int HorizonSpec::NearSteps() const { return static_cast<int>(std::lround(near_hours * kStepsPerHour)); }
int HorizonSpec::FarSteps() const { return static_cast<int>(std::lround(far_hours * kStepsPerHour)); }

std::vector<HorizonSpec> StandardHorizons() {
  return {HorizonSpec::Point(4), HorizonSpec::Point(8), HorizonSpec::Point(12), HorizonSpec::Interval(8, 12),
          HorizonSpec::Interval(12, 24)};
}

HorizonSpec ParseHorizon(std::string_view name) {
  auto hours = [&](std::string_view s) {
    if (s.empty() || s.back() != 'h') throw Error(ErrorCode::kInvalidArgument, "bad horizon: " + std::string(name));
    return ParseDouble(s.substr(0, s.size() - 1), 0);
  };
  const size_t dash = name.find('-');
  if (dash == std::string_view::npos) return HorizonSpec::Point(hours(name));
  return HorizonSpec::Interval(hours(name.substr(dash + 1)), hours(name.substr(0, dash)));
}

std::optional<HorizonSelection> HorizonLabels(const PatientRecord& record, const HorizonSpec& spec) {
  HorizonSelection sel;
  if (!record.is_sepsis || !record.onset_step) {
    sel.steps.resize(record.steps());
    std::iota(sel.steps.begin(), sel.steps.end(), 0);
    sel.labels.assign(record.steps(), 0);
    return sel;
  }
  const int onset = std::min(*record.onset_step, record.steps());
  const int start = onset - spec.FarSteps();
  const int end = onset - spec.NearSteps();
  if (start < 0) return std::nullopt;
  for (int t = 0; t < end; ++t) {
    sel.steps.push_back(t);
    sel.labels.push_back(t >= start ? 1 : 0);
  }
  return sel;
}

PooledScores PoolHorizon(std::span<const PatientRecord> records, std::span<const std::vector<double>> predictions,
                         const HorizonSpec& spec) {
  if (records.size() != predictions.size()) throw Error(ErrorCode::kShape, "one prediction series per record");
  PooledScores pooled;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto sel = HorizonLabels(records[i], spec);
    if (!sel) {
      ++pooled.skipped;
      continue;
    }
    for (size_t k = 0; k < sel->steps.size(); ++k) {
      pooled.scores.push_back(predictions[i][sel->steps[k]]);
      pooled.labels.push_back(sel->labels[k]);
    }
  }
  return pooled;
}

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  CheckBinary(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps midranks integral.
  double rank2_pos = 0.0;
  size_t n_pos = 0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank2 = static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        rank2_pos += midrank2;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::kUndefined, "AUROC needs both classes");
  const double p = static_cast<double>(n_pos);
  const double u2 = rank2_pos - p * (p + 1.0);
  return u2 / (2.0 * p * static_cast<double>(n_neg));
}

RocCurve ComputeRoc(std::span<const double> scores, std::span<const int> labels) {
  CheckBinary(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::kUndefined, "ROC needs both classes");

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);
  double tp = 0, fp = 0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    roc.thresholds.push_back(scores[order[i]]);
    roc.tpr.push_back(tp / n_pos);
    roc.fpr.push_back(fp / n_neg);
    const size_t k = roc.tpr.size() - 1;
    roc.auroc += (roc.fpr[k] - roc.fpr[k - 1]) * (roc.tpr[k] + roc.tpr[k - 1]) / 2.0;
    i = j;
  }
  return roc;
}

double AccuracyLoss(double auroc_private, double auroc_nonprivate) {
  if (!(auroc_nonprivate > 0.5)) {
    throw Error(ErrorCode::kUndefined, "accuracy loss needs a non-private AUROC above 0.5");
  }
  return 1.0 - (2.0 * auroc_private - 1.0) / (2.0 * auroc_nonprivate - 1.0);
}

TTestResult WelchTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::kInvalidArgument, "t-test needs two values per sample");
  const double ma = Mean(a), mb = Mean(b);
  const double va = SampleVariance(a, ma) / a.size();
  const double vb = SampleVariance(b, mb) / b.size();
  TTestResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.df = static_cast<double>(a.size() + b.size() - 2);
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

void WriteResultsTable(const std::filesystem::path& path, std::span<const HorizonSpec> horizons,
                       std::span<const ResultRow> rows, std::string_view reference_model) {
  std::string header = "model";
  for (const HorizonSpec& h : horizons) header += "," + h.Name();
  header += ",significant_vs_" + std::string(reference_model);
  const ResultRow* ref = nullptr;
  for (const ResultRow& r : rows) {
    if (r.model == reference_model) ref = &r;
  }
  CsvWriter out(path, header);
  for (const ResultRow& row : rows) {
    if (row.per_horizon.size() != horizons.size()) throw Error(ErrorCode::kShape, "one entry per horizon");
    out << row.model;
    std::string marks;
    for (size_t h = 0; h < horizons.size(); ++h) {
      const std::vector<double>& v = row.per_horizon[h];
      char cell[64];
      if (v.empty()) {
        out << "nan";
      } else {
        const double m = Mean(v);
        const double sd = v.size() > 1 ? std::sqrt(SampleVariance(v, m)) : 0.0;
        std::snprintf(cell, sizeof cell, "%.1f (%.1f)", 100.0 * m, 100.0 * sd);
        out << std::string_view(cell);
      }
      if (ref != nullptr && ref != &row && v.size() >= 2 && ref->per_horizon[h].size() >= 2 &&
          WelchTTest(v, ref->per_horizon[h]).p_value < kSignificanceLevel) {
        if (!marks.empty()) marks += ';';
        marks += horizons[h].Name();
      }
    }
    out << std::string_view(marks);
    out.EndRow();
  }
}

std::optional<double> FirstCrossing(std::span<const double> epsilons, std::span<const double> values, double level) {
  if (epsilons.size() != values.size()) throw Error(ErrorCode::kShape, "one value per epsilon");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] < level)) continue;
    if (i == 0 || !std::isfinite(values[i - 1])) return epsilons[i];
    const double l0 = std::log10(epsilons[i - 1]), l1 = std::log10(epsilons[i]);
    const double f = (values[i - 1] - level) / (values[i - 1] - values[i]);
    return std::pow(10.0, l0 + f * (l1 - l0));
  }
  return std::nullopt;
}

}  // namespace dpens
