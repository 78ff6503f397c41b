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

#ifndef DPENS_METRICS_H_
#define DPENS_METRICS_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpens/cohort.h"

namespace dpens {

enum class HorizonKind { kPoint, kInterval };

// Point(h): the h hours right before onset. Interval(near, far): from `far` to
// `near` hours before onset.
struct HorizonSpec {
  HorizonKind kind = HorizonKind::kPoint;
  double near_hours = 0.0;
  double far_hours = 4.0;

  static HorizonSpec Point(double hours);
  static HorizonSpec Interval(double near_hours, double far_hours);

  void Validate() const;
  std::string Name() const;  // "4h", "12h-8h"
  int NearSteps() const;
  int FarSteps() const;
};

// 4h, 8h, 12h, 12h-8h, 24h-12h.
std::vector<HorizonSpec> StandardHorizons();
HorizonSpec ParseHorizon(std::string_view name);

struct HorizonSelection {
  std::vector<int> steps;
  std::vector<int> labels;  // 1 inside the horizon window, 0 before it
};

// Non-sepsis records give every step as a negative. For sepsis records the
// steps at and after onset are dropped. Returns nullopt (caller warns) when
// the window reaches before the first step.
std::optional<HorizonSelection> HorizonLabels(const PatientRecord& record, const HorizonSpec& spec);

struct PooledScores {
  std::vector<double> scores;
  std::vector<int> labels;
  int skipped = 0;
};

// Micro-averaged pool over records; predictions[i] scores records[i].
PooledScores PoolHorizon(std::span<const PatientRecord> records, std::span<const std::vector<double>> predictions,
                         const HorizonSpec& spec);

// Mann-Whitney statistic with midranks. Throws kUndefined without both classes.
double Auroc(std::span<const double> scores, std::span<const int> labels);

struct RocCurve {
  std::vector<double> thresholds;  // descending; the first point is +inf
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auroc = 0.0;  // trapezoidal area
};

RocCurve ComputeRoc(std::span<const double> scores, std::span<const int> labels);

// 1 - (2 private - 1) / (2 nonprivate - 1). Throws when nonprivate <= 0.5.
double AccuracyLoss(double auroc_private, double auroc_nonprivate);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Welch's unequal-variance test, two-sided. Needs at least two values each.
TTestResult WelchTTest(std::span<const double> a, std::span<const double> b);

inline constexpr double kSignificanceLevel = 0.05;

struct ResultRow {
  std::string model;
  // per_horizon[h][fold] = AUROC
  std::vector<std::vector<double>> per_horizon;
};

// Cells "mean (sd)" in percent over folds; the last column lists horizons
// where the row differs from `reference_model` at the 0.05 level.
void WriteResultsTable(const std::filesystem::path& path, std::span<const HorizonSpec> horizons,
                       std::span<const ResultRow> rows, std::string_view reference_model);

// First grid point where `values` falls below `level`, refined by linear
// interpolation in log10(epsilon) against the previous point. NaN values
// never count as below. nullopt if the curve never gets there.
std::optional<double> FirstCrossing(std::span<const double> epsilons, std::span<const double> values, double level);

}  // namespace dpens

#endif  // DPENS_METRICS_H_
