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

#ifndef DPENS_ENSEMBLE_H_
#define DPENS_ENSEMBLE_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dpens/models.h"

namespace dpens {

// Error covariance of a set of models on a shared evaluation set:
// C_ij = (1/n) m_i . m_j, with the model MSEs on the diagonal.
struct CovarianceMatrix {
  Eigen::MatrixXd c;
  size_t n_samples = 0;
  std::vector<std::string> model_ids;

  Eigen::Index size() const { return c.rows(); }
};

enum class WeightScheme { kUniform, kOptimal, kHistory };

std::string_view WeightSchemeName(WeightScheme scheme);
WeightScheme ParseWeightScheme(std::string_view name);

struct WeightVector {
  Eigen::VectorXd w;
  WeightScheme scheme = WeightScheme::kUniform;

  Eigen::Index size() const { return w.size(); }
};

struct Ensemble {
  std::vector<std::shared_ptr<const ComponentModel>> members;
  WeightVector weights;  // for kHistory: the weights used before any history exists
  double bound = kDefaultBound;
};

// Requires aligned misfits (same sample index, n >= 1). The upper triangle is
// computed and mirrored, so the result is exactly symmetric.
CovarianceMatrix EstimateCovariance(std::span<const MisfitVector> misfits);

// w' C w.
double EnsembleMse(const CovarianceMatrix& cov, const WeightVector& w);
double EnsembleMse(const Eigen::MatrixXd& c, const Eigen::VectorXd& w);

// 1e-8 * trace(C) / N.
double DefaultRidge(const CovarianceMatrix& cov);

// w* = (C + ridge I)^-1 1 / (1' (C + ridge I)^-1 1). Entries can be negative.
// Throws kSingular when the regularized matrix is not safely invertible.
WeightVector OptimalWeights(const CovarianceMatrix& cov, std::optional<double> ridge = std::nullopt);

WeightVector UniformWeights(size_t n);

// Weights proportional to sum_t 1 / (1 + (y_t^(i) - label_t)^2) over the
// history; an empty history gives uniform weights. past_predictions[i] is the
// history of model i.
WeightVector HistoryWeights(std::span<const std::vector<double>> past_predictions,
                            std::span<const double> past_labels);

double Combine(std::span<const double> outputs, const WeightVector& w);

// Member outputs for every step of a record (steps x members).
Eigen::MatrixXd MemberOutputs(const Ensemble& ensemble, const PatientRecord& record);

// Per-step weights for a record: fixed weights for uniform/optimal; for the
// history scheme, step T uses the member accuracy on the record's expert
// labels at steps < T.
std::vector<WeightVector> StepWeights(const Ensemble& ensemble, const Eigen::MatrixXd& member_outputs,
                                      const PatientRecord& record);

// Non-private ensemble prediction, one value per step.
std::vector<double> PredictEnsemble(const Ensemble& ensemble, const PatientRecord& record);

// Manifest: ordered member ids, scheme, weights, bound and the fingerprint of
// the evaluation set the covariance came from.
struct EnsembleManifest {
  std::vector<std::string> member_ids;
  WeightVector weights;
  double bound = kDefaultBound;
  SampleIndex covariance_source;
};

nlohmann::json ToJson(const EnsembleManifest& manifest);
EnsembleManifest EnsembleManifestFromJson(const nlohmann::json& j);
void SaveManifest(const std::filesystem::path& path, const EnsembleManifest& manifest);
EnsembleManifest LoadManifest(const std::filesystem::path& path);

// Resolves manifest member ids against a model collection.
Ensemble MaterializeEnsemble(const EnsembleManifest& manifest,
                             std::span<const std::shared_ptr<const ComponentModel>> models);

}  // namespace dpens

#endif  // DPENS_ENSEMBLE_H_
