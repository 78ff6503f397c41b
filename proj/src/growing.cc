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

#include "dpens/growing.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpens/csv.h"
#include "dpens/error.h"

namespace dpens {
namespace {

constexpr std::string_view kGrowthHeader =
    "step,model_id,is_sepsis,candidate_mse,ensemble_mse_before,ensemble_mse_after,lhs,rhs";

bool ByMse(const Candidate& a, const Candidate& b) {
  if (a.mse != b.mse) return a.mse < b.mse;
  return a.model->model_id < b.model->model_id;
}

void CheckIndex(const MisfitVector& m, const SampleIndex& index) {
  if (!(m.sample_index == index) || static_cast<size_t>(m.values.size()) != index.size) {
    throw Error(ErrorCode::kAlignment, "misfits of " + m.model_id + " are not on the validation set");
  }
}

// Uniform-weight ensemble state: the sum of member misfits and its size.
struct Running {
  Eigen::VectorXd sum;
  int n = 0;
  double samples = 0;

  double Mse() const {
    const double nn = static_cast<double>(n);
    return sum.squaredNorm() / (nn * nn) / samples;
  }

  // Both sides are compared before dividing by the sample count so that a
  // duplicate of a single member ties exactly (3a vs 2a + a).
  AdmissionResult Test(const Eigen::VectorXd& m) const {
    const double nn = static_cast<double>(n);
    const double lhs = static_cast<double>(2 * n + 1) * (sum.squaredNorm() / (nn * nn));
    const double rhs = 2.0 * m.dot(sum) + m.squaredNorm();
    return AdmissionResult{lhs > rhs, lhs / samples, rhs / samples};
  }
};

}  // namespace

CandidatePool CandidatePool::Make(std::vector<Candidate> candidates) {
  CandidatePool pool;
  for (Candidate& c : candidates) (c.is_sepsis ? pool.sepsis : pool.nonsepsis).push_back(std::move(c));
  std::stable_sort(pool.sepsis.begin(), pool.sepsis.end(), ByMse);
  std::stable_sort(pool.nonsepsis.begin(), pool.nonsepsis.end(), ByMse);
  return pool;
}

Candidate MakeCandidate(std::shared_ptr<const ComponentModel> model, MisfitVector misfit, bool is_sepsis) {
  if (misfit.values.size() == 0) throw Error(ErrorCode::kEmpty, "empty misfit vector");
  Candidate c;
  c.mse = misfit.values.squaredNorm() / static_cast<double>(misfit.values.size());
  c.model = std::move(model);
  c.misfit = std::move(misfit);
  c.is_sepsis = is_sepsis;
  return c;
}

AdmissionResult AdmissionTest(const MisfitVector& candidate, std::span<const MisfitVector> members,
                              double ensemble_mse) {
  if (members.empty()) throw Error(ErrorCode::kEmpty, "admission test needs at least one member");
  const double n = static_cast<double>(candidate.values.size());
  double cross = 0.0;
  for (const MisfitVector& m : members) {
    if (!(m.sample_index == candidate.sample_index) || m.values.size() != candidate.values.size()) {
      throw Error(ErrorCode::kAlignment, "candidate and member misfits are not aligned");
    }
    cross += candidate.values.dot(m.values) / n;
  }
  AdmissionResult r;
  r.lhs = static_cast<double>(2 * members.size() + 1) * ensemble_mse;
  r.rhs = 2.0 * cross + candidate.values.squaredNorm() / n;
  r.admitted = r.lhs > r.rhs;
  return r;
}

GrowthResult Grow(CandidatePool pool, const SampleIndex& validation) {
  if (pool.empty()) throw Error(ErrorCode::kEmpty, "candidate pool is empty");
  for (const auto* list : {&pool.sepsis, &pool.nonsepsis}) {
    for (const Candidate& c : *list) CheckIndex(c.misfit, validation);
  }

  GrowthResult result;
  Running state;
  state.samples = static_cast<double>(validation.size);
  auto admit = [&](std::vector<Candidate>& list, size_t pos, const AdmissionResult* test) {
    Candidate c = std::move(list[pos]);
    list.erase(list.begin() + static_cast<std::ptrdiff_t>(pos));
    GrowthStep step;
    step.step = static_cast<int>(result.log.size());
    step.model_id = c.model->model_id;
    step.is_sepsis = c.is_sepsis;
    step.candidate_mse = c.mse;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    step.ensemble_mse_before = state.n == 0 ? nan : state.Mse();
    step.lhs = test ? test->lhs : nan;
    step.rhs = test ? test->rhs : nan;
    if (state.n == 0) {
      state.sum = c.misfit.values;
    } else {
      state.sum += c.misfit.values;
    }
    ++state.n;
    step.ensemble_mse_after = state.Mse();
    if (state.n > 1) {
      const double before = step.ensemble_mse_before;
      if (step.ensemble_mse_after > before + 1e-12 * std::max(1.0, std::abs(before))) {
        throw Error(ErrorCode::kInvariant, "admitting " + step.model_id +
                                               " increased the validation MSE from " + FormatDouble(before) +
                                               " to " + FormatDouble(step.ensemble_mse_after));
      }
    }
    result.log.push_back(step);
    result.member_misfits.push_back(std::move(c.misfit));
    result.ensemble.members.push_back(std::move(c.model));
  };

  admit(pool.sepsis.empty() ? pool.nonsepsis : pool.sepsis, 0, nullptr);

  bool grew = true;
  while (grew) {
    grew = false;
    for (auto* list : {&pool.sepsis, &pool.nonsepsis}) {
      for (size_t i = 0; i < list->size(); ++i) {
        const AdmissionResult test = state.Test((*list)[i].misfit.values);
        if (test.admitted) {
          admit(*list, i, &test);
          grew = true;
          break;
        }
      }
      if (grew) break;
    }
  }

  result.ensemble.weights = UniformWeights(result.ensemble.members.size());
  result.ensemble.bound = result.ensemble.members.front()->output_bound;
  for (const auto& m : result.ensemble.members) {
    if (m->output_bound != result.ensemble.bound) {
      throw Error(ErrorCode::kInvariant, "ensemble members disagree on the output bound");
    }
  }
  return result;
}

void WriteGrowthLog(const std::filesystem::path& path, std::span<const GrowthStep> log) {
  CsvWriter out(path, kGrowthHeader);
  for (const GrowthStep& s : log) {
    out << s.step << s.model_id << (s.is_sepsis ? 1 : 0) << s.candidate_mse << s.ensemble_mse_before
        << s.ensemble_mse_after << s.lhs << s.rhs;
    out.EndRow();
  }
}

std::vector<GrowthStep> ReadGrowthLog(const std::filesystem::path& path) {
  std::vector<GrowthStep> log;
  for (const CsvRow& row : ReadCsv(path, kGrowthHeader)) {
    GrowthStep s;
    s.step = static_cast<int>(ParseInt(row.fields[0], row.line));
    s.model_id = row.fields[1];
    s.is_sepsis = ParseInt(row.fields[2], row.line) != 0;
    s.candidate_mse = ParseDouble(row.fields[3], row.line);
    s.ensemble_mse_before = ParseDouble(row.fields[4], row.line);
    s.ensemble_mse_after = ParseDouble(row.fields[5], row.line);
    s.lhs = ParseDouble(row.fields[6], row.line);
    s.rhs = ParseDouble(row.fields[7], row.line);
    log.push_back(std::move(s));
  }
  return log;
}

}  // namespace dpens
