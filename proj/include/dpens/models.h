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

#ifndef DPENS_MODELS_H_
#define DPENS_MODELS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dpens/cohort.h"
#include "json.hpp"

namespace dpens {

inline constexpr double kDefaultBound = 4.0;

enum class RegressorKind {
  kBaseline,   // constant prediction: the mean training label
  kRidge,      // ridge regression over a lagged window of feature rows
  kRecurrent,  // single-layer tanh recurrent cell trained by Adam/BPTT
};

std::string_view RegressorKindName(RegressorKind kind);
RegressorKind ParseRegressorKind(std::string_view name);

struct RegressorConfig {
  RegressorKind kind = RegressorKind::kRidge;
  double bound = kDefaultBound;

  // Ridge: the prediction at step t sees rows t, t-1, ..., t-lags+1 (rows
  // before the first step repeat the first row). The penalty is applied to
  // the mean squared error, so duplicated training data does not change the
  // fit.
  int lags = 8;
  double ridge = 1.0;

  // Recurrent cell. Training uses windows of `window_steps` with
  // `window_overlap` steps shared between neighbours.
  int hidden = 16;
  int epochs = 40;
  int batch_windows = 20;
  double learning_rate = 0.01;
  int window_steps = 48;
  int window_overlap = 24;
  double clip_norm = 5.0;

  void Validate() const;
  // Minimum timeline length a training record must have.
  int MinSteps() const;
};

nlohmann::json ToJson(const RegressorConfig& config);
RegressorConfig RegressorConfigFromJson(const nlohmann::json& j);

struct ComponentModel {
  std::string model_id;
  RegressorConfig config;
  int n_features = 0;
  std::vector<double> parameters;
  double output_bound = kDefaultBound;
  double avg_train_loss = 0.0;  // per-step MSE of the clipped output on the training data
  std::vector<std::string> trained_on;

  RegressorKind kind() const { return config.kind; }
};

// Fits one regressor on the given records. A single record gives a patient
// model (id "m:<patient_id>"); several give a pooled model (id "full").
ComponentModel TrainComponent(std::span<const PatientRecord> records, const RegressorConfig& config,
                              uint64_t seed, std::string model_id = {});

// One score per step, clipped to [0, output_bound].
std::vector<double> Predict(const ComponentModel& model, const PatientRecord& record);

// Identifies the (patient, step) evaluation points of an evaluation set.
struct SampleIndex {
  uint64_t fingerprint = 0;
  size_t size = 0;

  bool operator==(const SampleIndex&) const = default;
};

SampleIndex MakeSampleIndex(std::span<const PatientRecord> eval_set);

struct MisfitVector {
  std::string model_id;
  Eigen::VectorXd values;  // prediction - label, (patient, step) order
  SampleIndex sample_index;
};

MisfitVector Misfits(const ComponentModel& model, std::span<const PatientRecord> eval_set);

// Misfits of precomputed per-record predictions.
MisfitVector MisfitsFromPredictions(std::string model_id, std::span<const std::vector<double>> predictions,
                                    std::span<const PatientRecord> eval_set);

nlohmann::json ToJson(const ComponentModel& model);
ComponentModel ComponentModelFromJson(const nlohmann::json& j);

void SaveModels(const std::filesystem::path& path, std::span<const ComponentModel> models);
std::vector<ComponentModel> LoadModels(const std::filesystem::path& path);

namespace internal {

// Recurrent regressor, implemented in recurrent.cc.
std::vector<double> TrainRecurrent(std::span<const PatientRecord> records, const RegressorConfig& config,
                                   uint64_t seed);
std::vector<double> PredictRecurrentRaw(const std::vector<double>& params, const RegressorConfig& config,
                                        const Eigen::MatrixXd& grid);

}  // namespace internal

}  // namespace dpens

#endif  // DPENS_MODELS_H_
