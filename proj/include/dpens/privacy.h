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

#ifndef DPENS_PRIVACY_H_
#define DPENS_PRIVACY_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <mutex>
#include <span>
#include <vector>

#include "dpens/ensemble.h"
#include "dpens/random.h"

namespace dpens {

// Pure epsilon-DP (delta is always 0).
struct PrivacyParams {
  double epsilon = 1.0;
  double bound = kDefaultBound;

  static constexpr double kDelta = 0.0;
  void Validate() const;
};

// l1-sensitivity of weighted averaging of outputs in [0, bound]:
// bound * max_i w_i. Negative weights are refused.
double Sensitivity(const WeightVector& w, double bound);

// Laplace(0, scale) by inverse CDF of u ~ U(-1/2, 1/2):
// -scale * sign(u) * ln(1 - 2|u|).
double LaplaceFromUniform(double u, double scale);
double LaplaceSample(double scale, Rng& rng);

struct QueryRecord {
  uint64_t sequence = 0;  // logical clock: 0, 1, 2, ... per accountant
  double epsilon = 0.0;
  double scale = 0.0;
};

// Sequential-composition budget ledger. Charge() is atomic with the decision
// to release: a charge that would exceed the budget throws and records
// nothing.
class PrivacyAccountant {
 public:
  explicit PrivacyAccountant(double total_budget = std::numeric_limits<double>::infinity(),
                             bool keep_log = true);

  void Charge(double epsilon, double scale);

  double total_budget() const { return total_; }
  double spent() const;
  double remaining() const;
  uint64_t queries() const;
  std::vector<QueryRecord> log() const;

  // Writes `timestamp,epsilon,scale` rows.
  void ExportLog(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mu_;
  double total_;
  double spent_ = 0.0;
  uint64_t queries_ = 0;
  bool keep_log_;
  std::vector<QueryRecord> log_;
};

struct ReleaseOptions {
  // Clamp the noised value back to [0, bound]. Post-processing: the guarantee
  // is unchanged but the error distribution is not that of the plain
  // mechanism. Off by default.
  bool clip_release = false;
};

// Private weighted average: clips outputs to [0, B], combines them, charges
// epsilon, then adds Lap(B max w / epsilon).
double PrivatePredict(std::span<const double> outputs, const WeightVector& w, const PrivacyParams& params,
                      PrivacyAccountant& accountant, Rng& rng, ReleaseOptions options = {});

}  // namespace dpens

#endif  // DPENS_PRIVACY_H_
