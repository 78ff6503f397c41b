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

#ifndef DPENS_GROWING_H_
#define DPENS_GROWING_H_

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpens/ensemble.h"
#include "dpens/models.h"

namespace dpens {

struct Candidate {
  std::shared_ptr<const ComponentModel> model;
  MisfitVector misfit;  // on the validation set
  double mse = 0.0;     // validation MSE, |m|^2 / n
  bool is_sepsis = false;
};

// Two lists sorted non-decreasing by validation MSE (model id breaks ties).
struct CandidatePool {
  std::vector<Candidate> sepsis;
  std::vector<Candidate> nonsepsis;

  static CandidatePool Make(std::vector<Candidate> candidates);
  size_t size() const { return sepsis.size() + nonsepsis.size(); }
  bool empty() const { return size() == 0; }
};

// Builds a candidate from a model's misfits; mse is computed from them.
Candidate MakeCandidate(std::shared_ptr<const ComponentModel> model, MisfitVector misfit, bool is_sepsis);

struct AdmissionResult {
  bool admitted = false;
  double lhs = 0.0;  // (2N + 1) MSE[ensemble]
  double rhs = 0.0;  // 2 sum_i E[m_new m_i] + E[m_new^2]
};

// Admission inequality for adding `candidate` to an ensemble of `members`
// (uniform weights) whose current MSE is `ensemble_mse`. Expectations are
// sample means over the shared validation points. Strict: ties reject.
AdmissionResult AdmissionTest(const MisfitVector& candidate, std::span<const MisfitVector> members,
                              double ensemble_mse);

struct GrowthStep {
  int step = 0;
  std::string model_id;
  bool is_sepsis = false;
  double candidate_mse = 0.0;
  double ensemble_mse_before = 0.0;  // NaN for the initial member
  double ensemble_mse_after = 0.0;
  double lhs = 0.0;                  // NaN for the initial member
  double rhs = 0.0;
};

struct GrowthResult {
  Ensemble ensemble;  // uniform weights
  std::vector<GrowthStep> log;
  std::vector<MisfitVector> member_misfits;
};

// Greedy ensemble growing. Starts from the best sepsis model (best overall
// when there is none), then repeatedly scans the sepsis list followed by the
// non-sepsis list and admits the first candidate passing the admission test,
// restarting the scan after each admission. Stops when a full scan admits
// nothing. Throws kInvariant if an admission ever increases the validation
// MSE.
GrowthResult Grow(CandidatePool pool, const SampleIndex& validation);

void WriteGrowthLog(const std::filesystem::path& path, std::span<const GrowthStep> log);
std::vector<GrowthStep> ReadGrowthLog(const std::filesystem::path& path);

}  // namespace dpens

#endif  // DPENS_GROWING_H_
