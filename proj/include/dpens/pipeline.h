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

#ifndef DPENS_PIPELINE_H_
#define DPENS_PIPELINE_H_

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpens/attack.h"
#include "dpens/cohort.h"
#include "dpens/ensemble.h"
#include "dpens/models.h"

namespace dpens {

struct RunConfig {
  std::filesystem::path out = "dpens_out";
  uint64_t seed = 1;
  int workers = 1;

  // Input: CSV files when `timelines` is set, otherwise a synthetic cohort.
  std::optional<std::filesystem::path> timelines;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> catalog;
  CohortSpec synth;

  std::vector<int> folds = {0, 1, 2, 3};
  RegressorConfig component;  // per-patient models
  RegressorConfig full;       // the pooled baseline
  WeightScheme scheme = WeightScheme::kUniform;
  std::optional<double> optimal_ridge;

  double bound = kDefaultBound;
  std::vector<double> epsilons = EpsilonGrid();
  double total_budget = std::numeric_limits<double>::infinity();
  bool clip_release = false;
  std::optional<std::filesystem::path> query_log;

  int resamples = kDefaultResamples;
  bool macro_auroc = false;
  bool plots = true;
  bool force = false;  // ignore stage caches

  // Desk-scale defaults: 480 patients, shorter stays, and an over-parameterized
  // full model.
  RunConfig();
  void Validate() const;
};

nlohmann::json ToJson(const RunConfig& config);
RunConfig RunConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const CohortSpec& spec);
CohortSpec CohortSpecFromJson(const nlohmann::json& j);

// Ingests CSVs, builds per-step records and applies the cohort filter.
std::vector<PatientRecord> LoadCohortRecords(const std::filesystem::path& timelines,
                                             const std::filesystem::path& labels,
                                             const FeatureCatalog& catalog);

// Stage orchestration. Every stage persists its outputs under
// `out/<stage>/` together with a stamp holding the key of its inputs; a
// stage whose stamp matches is skipped. Calling a stage runs (or reuses) its
// upstream stages first.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  void Synth();
  void Preprocess();
  void Train();
  void Grow();
  void Evaluate();
  void DpSweep();
  void Attack();
  void Run();

  // Names of stages that did real work (not cache hits), in order.
  const std::vector<std::string>& executed() const { return executed_; }
  const RunConfig& config() const { return config_; }

  std::filesystem::path StageDir(std::string_view stage) const;

 private:
  using Body = void (Pipeline::*)(const std::filesystem::path&);

  bool Cached(std::string_view stage, const std::string& key, const std::vector<std::string>& outputs) const;
  void RunStage(std::string_view stage, const std::string& key, const std::vector<std::string>& outputs, Body body);
  void Stamp(std::string_view stage, const std::string& key) const;

  std::string CohortKey();
  std::string PreprocessKey();
  std::string TrainKey();
  std::string GrowKey();

  void DoSynth(const std::filesystem::path& dir);
  void DoPreprocess(const std::filesystem::path& dir);
  void DoTrain(const std::filesystem::path& dir);
  void DoGrow(const std::filesystem::path& dir);
  void DoEvaluate(const std::filesystem::path& dir);
  void DoDpSweep(const std::filesystem::path& dir);
  void DoAttack(const std::filesystem::path& dir);

  FeatureCatalog Catalog();
  const std::vector<PatientRecord>& Records();
  FoldData LoadFold(int fold);
  std::vector<std::shared_ptr<const ComponentModel>> LoadComponents(int fold);
  std::shared_ptr<const ComponentModel> LoadFull(int fold);
  Ensemble LoadEnsemble(int fold, std::span<const std::shared_ptr<const ComponentModel>> components);

  RunConfig config_;
  std::map<std::string, std::string, std::less<>> keys_;
  std::optional<std::vector<PatientRecord>> records_;
  std::optional<PartitionAssignment> assignment_;
  std::vector<std::string> executed_;
};

// Concatenates the per-stage query logs of the privacy stages into one CSV
// with a continuous logical clock.
void MergeQueryLogs(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& out);

}  // namespace dpens

#endif  // DPENS_PIPELINE_H_
