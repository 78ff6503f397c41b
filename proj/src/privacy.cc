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

#include "dpens/privacy.h"

#include <algorithm>
#include <cmath>

#include "dpens/csv.h"
#include "dpens/error.h"

namespace dpens {

void PrivacyParams::Validate() const {
  if (!(epsilon > 0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  if (!(bound > 0) || !std::isfinite(bound)) {
    throw Error(ErrorCode::kInvalidArgument, "output bound must be positive and finite");
  }
}

double Sensitivity(const WeightVector& w, double bound) {
  if (w.size() == 0) throw Error(ErrorCode::kEmpty, "sensitivity of an empty ensemble");
  if (w.w.minCoeff() < 0) {
    throw Error(ErrorCode::kNegativeWeight, "negative ensemble weights are not allowed on the private path");
  }
  return bound * w.w.maxCoeff();
}

double LaplaceFromUniform(double u, double scale) {
  if (!(scale > 0)) throw Error(ErrorCode::kInvalidArgument, "Laplace scale must be positive");
  if (u == 0.0) return 0.0;
  const double sign = u < 0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

double LaplaceSample(double scale, Rng& rng) {
  if (!(scale > 0)) throw Error(ErrorCode::kInvalidArgument, "Laplace scale must be positive");
  double u;
  do {
    u = rng.Uniform01() - 0.5;
  } while (u == -0.5);  // keep |u| < 1/2
  return LaplaceFromUniform(u, scale);
}

PrivacyAccountant::PrivacyAccountant(double total_budget, bool keep_log)
    : total_(total_budget), keep_log_(keep_log) {
  if (!(total_budget > 0)) throw Error(ErrorCode::kInvalidArgument, "total budget must be positive");
}

void PrivacyAccountant::Charge(double epsilon, double scale) {
  if (!(epsilon > 0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  std::lock_guard<std::mutex> lock(mu_);
  if (spent_ + epsilon > total_) {
    throw Error(ErrorCode::kBudgetExhausted, "privacy budget exhausted: spent " + FormatDouble(spent_) +
                                                 " of " + FormatDouble(total_) + ", query needs " +
                                                 FormatDouble(epsilon));
  }
  spent_ += epsilon;
  if (keep_log_) log_.push_back({queries_, epsilon, scale});
  ++queries_;
}

double PrivacyAccountant::spent() const {
  std::lock_guard<std::mutex> lock(mu_);
  return spent_;
}

double PrivacyAccountant::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_ - spent_;
}

uint64_t PrivacyAccountant::queries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queries_;
}

std::vector<QueryRecord> PrivacyAccountant::log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

void PrivacyAccountant::ExportLog(const std::filesystem::path& path) const {
  CsvWriter out(path, "timestamp,epsilon,scale");
  for (const QueryRecord& q : log()) {
    out << static_cast<long long>(q.sequence) << q.epsilon << q.scale;
    out.EndRow();
  }
}

double PrivatePredict(std::span<const double> outputs, const WeightVector& w, const PrivacyParams& params,
                      PrivacyAccountant& accountant, Rng& rng, ReleaseOptions options) {
  params.Validate();
  const double sensitivity = Sensitivity(w, params.bound);
  std::vector<double> clipped(outputs.begin(), outputs.end());
  for (double& v : clipped) v = std::clamp(v, 0.0, params.bound);
  const double exact = Combine(clipped, w);
  const double scale = sensitivity / params.epsilon;
  accountant.Charge(params.epsilon, scale);
  double released = exact + LaplaceSample(scale, rng);
  if (options.clip_release) released = std::clamp(released, 0.0, params.bound);
  return released;
}

}  // namespace dpens
