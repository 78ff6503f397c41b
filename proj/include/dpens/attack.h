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

#ifndef DPENS_ATTACK_H_
#define DPENS_ATTACK_H_

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpens/cohort.h"
#include "dpens/random.h"

namespace dpens {

inline constexpr int kDefaultResamples = 1000;

// Loss-threshold membership inference: a sample is declared a training member
// iff its loss is strictly below the model's average training loss.
inline bool MembershipInfer(double sample_loss, double avg_train_loss) {
  return sample_loss < avg_train_loss;
}

// A black-box predictor. `predict` may add fresh privacy noise on every call;
// the attacker only ever sees its outputs.
struct AttackTarget {
  std::string kind;
  double avg_train_loss = 0.0;
  std::function<std::vector<double>(const PatientRecord&)> predict;
};

struct AttackSample {
  std::string patient_id;
  std::vector<double> losses;  // squared error per step
  double mean_loss = 0.0;
  bool is_member = false;
};

AttackSample MakeAttackSample(const AttackTarget& target, const PatientRecord& record, bool is_member);

struct LeakageReport {
  double epsilon = 0.0;  // +inf for a non-private target
  double tpr = 0.0;      // median over resamples
  double fpr = 0.0;      // median over resamples
  double leakage = 0.0;  // median of (tpr - fpr) over resamples
  double q25 = 0.0, median = 0.0, q75 = 0.0;
  std::vector<double> resample_tpr, resample_fpr, resample_leakage;
};

// The smaller of the two groups is kept fixed; `resamples` subsets of the
// same size are drawn without replacement from the larger one.
LeakageReport LeakageFromSamples(std::span<const AttackSample> members, std::span<const AttackSample> nonmembers,
                                 double threshold, int resamples, Rng& rng);

// Runs the attack against `target` with its avg_train_loss as threshold.
// Every record is queried exactly once.
LeakageReport PrivacyLeakage(const AttackTarget& target, std::span<const PatientRecord> members,
                             std::span<const PatientRecord> nonmembers, int resamples, Rng& rng);

// Linear-interpolation quantile (type 7). Requires a non-empty sample.
double Quantile(std::vector<double> values, double q);

// 13 points, 10^-3 ... 10^3 in half-decade steps.
std::vector<double> EpsilonGrid();

struct LeakageRow {
  std::string target_kind;
  int fold = -1;  // -1: pooled over folds
  LeakageReport report;
};

// `epsilon,tpr_median,fpr,leakage_q25,leakage_median,leakage_q75,target_kind`
void WriteLeakageCsv(const std::filesystem::path& path, std::span<const LeakageRow> rows);
// Same columns with a leading fold column.
void WriteLeakageFoldsCsv(const std::filesystem::path& path, std::span<const LeakageRow> rows);
std::vector<LeakageRow> ReadLeakageCsv(const std::filesystem::path& path);

}  // namespace dpens

#endif  // DPENS_ATTACK_H_
