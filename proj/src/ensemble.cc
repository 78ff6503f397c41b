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

#include "dpens/ensemble.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dpens/error.h"

namespace dpens {
namespace {

constexpr double kMaxCondition = 1e12;

void CheckWeightsFor(Eigen::Index n, const Eigen::VectorXd& w) {
  if (w.size() != n) {
    throw Error(ErrorCode::kShape, "weight vector has " + std::to_string(w.size()) + " entries, expected " +
                                       std::to_string(n));
  }
}

}  // namespace

std::string_view WeightSchemeName(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::kUniform: return "uniform";
    case WeightScheme::kOptimal: return "optimal";
    case WeightScheme::kHistory: return "history";
  }
  return "unknown";
}

WeightScheme ParseWeightScheme(std::string_view name) {
  if (name == "uniform") return WeightScheme::kUniform;
  if (name == "optimal") return WeightScheme::kOptimal;
  if (name == "history") return WeightScheme::kHistory;
  throw Error(ErrorCode::kInvalidArgument, "unknown weight scheme '" + std::string(name) + "'");
}

CovarianceMatrix EstimateCovariance(std::span<const MisfitVector> misfits) {
  if (misfits.empty()) throw Error(ErrorCode::kEmpty, "no misfit vectors");
  const SampleIndex& index = misfits.front().sample_index;
  const Eigen::Index n = misfits.front().values.size();
  if (n < 1) throw Error(ErrorCode::kEmpty, "misfit vectors are empty");
  const Eigen::Index models = static_cast<Eigen::Index>(misfits.size());
  Eigen::MatrixXd stacked(n, models);
  CovarianceMatrix cov;
  for (Eigen::Index i = 0; i < models; ++i) {
    const MisfitVector& m = misfits[static_cast<size_t>(i)];
    if (!(m.sample_index == index) || m.values.size() != n) {
      throw Error(ErrorCode::kAlignment, "misfits of " + m.model_id + " use a different sample index");
    }
    stacked.col(i) = m.values;
    cov.model_ids.push_back(m.model_id);
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(models, models);
  c.triangularView<Eigen::Upper>() = stacked.transpose() * stacked;
  c /= static_cast<double>(n);
  c.triangularView<Eigen::StrictlyLower>() = c.transpose();
  cov.c = std::move(c);
  cov.n_samples = static_cast<size_t>(n);
  return cov;
}

double EnsembleMse(const Eigen::MatrixXd& c, const Eigen::VectorXd& w) {
  if (c.rows() != c.cols()) throw Error(ErrorCode::kShape, "covariance must be square");
  CheckWeightsFor(c.rows(), w);
  return w.dot(c * w);
}

double EnsembleMse(const CovarianceMatrix& cov, const WeightVector& w) { return EnsembleMse(cov.c, w.w); }

double DefaultRidge(const CovarianceMatrix& cov) {
  if (cov.size() == 0) return 0.0;
  return 1e-8 * cov.c.trace() / static_cast<double>(cov.size());
}

WeightVector OptimalWeights(const CovarianceMatrix& cov, std::optional<double> ridge) {
  const Eigen::Index n = cov.size();
  if (n == 0 || cov.c.cols() != n) throw Error(ErrorCode::kShape, "covariance must be square and non-empty");
  const double lambda = ridge.value_or(DefaultRidge(cov));
  if (!(lambda >= 0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be non-negative");

  Eigen::MatrixXd a = cov.c;
  a.diagonal().array() += lambda;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo > kMaxCondition) {
    throw Error(ErrorCode::kSingular, "covariance is numerically singular (condition " +
                                          std::to_string(lo > 0 ? hi / lo : INFINITY) +
                                          "); use a larger ridge");
  }
  const Eigen::VectorXd x = a.ldlt().solve(Eigen::VectorXd::Ones(n));
  const double total = x.sum();
  if (!(std::abs(total) > 0) || !std::isfinite(total)) {
    throw Error(ErrorCode::kSingular, "optimal weights are undefined (1' C^-1 1 = 0)");
  }
  return WeightVector{x / total, WeightScheme::kOptimal};
}

WeightVector UniformWeights(size_t n) {
  if (n == 0) throw Error(ErrorCode::kEmpty, "uniform weights for an empty ensemble");
  return WeightVector{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)),
                      WeightScheme::kUniform};
}

WeightVector HistoryWeights(std::span<const std::vector<double>> past_predictions,
                            std::span<const double> past_labels) {
  const size_t n = past_predictions.size();
  if (n == 0) throw Error(ErrorCode::kEmpty, "history weights for an empty ensemble");
  for (const auto& p : past_predictions) {
    if (p.size() != past_labels.size()) {
      throw Error(ErrorCode::kShape, "every model needs a prediction for each past label");
    }
  }
  if (past_labels.empty()) {
    WeightVector w = UniformWeights(n);
    w.scheme = WeightScheme::kHistory;
    return w;
  }
  Eigen::VectorXd score(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t t = 0; t < past_labels.size(); ++t) {
      const double d = past_predictions[i][t] - past_labels[t];
      s += 1.0 / (1.0 + d * d);
    }
    score(static_cast<Eigen::Index>(i)) = s;
  }
  return WeightVector{score / score.sum(), WeightScheme::kHistory};
}

double Combine(std::span<const double> outputs, const WeightVector& w) {
  CheckWeightsFor(static_cast<Eigen::Index>(outputs.size()), w.w);
  double s = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) s += w.w(static_cast<Eigen::Index>(i)) * outputs[i];
  return s;
}

Eigen::MatrixXd MemberOutputs(const Ensemble& ensemble, const PatientRecord& record) {
  if (ensemble.members.empty()) throw Error(ErrorCode::kEmpty, "ensemble has no members");
  Eigen::MatrixXd out(record.steps(), static_cast<Eigen::Index>(ensemble.members.size()));
  for (size_t i = 0; i < ensemble.members.size(); ++i) {
    const std::vector<double> p = Predict(*ensemble.members[i], record);
    out.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(p.data(), record.steps());
  }
  return out;
}

std::vector<WeightVector> StepWeights(const Ensemble& ensemble, const Eigen::MatrixXd& outputs,
                                      const PatientRecord& record) {
  const Eigen::Index n = static_cast<Eigen::Index>(ensemble.members.size());
  const int steps = record.steps();
  if (outputs.rows() != steps || outputs.cols() != n) {
    throw Error(ErrorCode::kShape, "member outputs do not match the ensemble and record");
  }
  if (ensemble.weights.scheme != WeightScheme::kHistory) {
    CheckWeightsFor(n, ensemble.weights.w);
    return std::vector<WeightVector>(static_cast<size_t>(steps), ensemble.weights);
  }
  std::vector<WeightVector> out;
  out.reserve(static_cast<size_t>(steps));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < steps; ++t) {
    if (t == 0) {
      out.push_back(WeightVector{Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)),
                                 WeightScheme::kHistory});
    } else {
      out.push_back(WeightVector{acc / acc.sum(), WeightScheme::kHistory});
    }
    const double label = record.labels[static_cast<size_t>(t)];
    acc.array() += 1.0 / (1.0 + (outputs.row(t).transpose().array() - label).square());
  }
  return out;
}

std::vector<double> PredictEnsemble(const Ensemble& ensemble, const PatientRecord& record) {
  const Eigen::MatrixXd outputs = MemberOutputs(ensemble, record);
  const std::vector<WeightVector> weights = StepWeights(ensemble, outputs, record);
  std::vector<double> out(static_cast<size_t>(record.steps()));
  for (int t = 0; t < record.steps(); ++t) {
    out[static_cast<size_t>(t)] = outputs.row(t).dot(weights[static_cast<size_t>(t)].w);
  }
  return out;
}

nlohmann::json ToJson(const EnsembleManifest& m) {
  return nlohmann::json{
      {"members", m.member_ids},
      {"scheme", WeightSchemeName(m.weights.scheme)},
      {"weights", std::vector<double>(m.weights.w.data(), m.weights.w.data() + m.weights.w.size())},
      {"bound", m.bound},
      {"covariance_source",
       {{"fingerprint", m.covariance_source.fingerprint}, {"n_samples", m.covariance_source.size}}}};
}

EnsembleManifest EnsembleManifestFromJson(const nlohmann::json& j) {
  try {
    EnsembleManifest m;
    m.member_ids = j.at("members").get<std::vector<std::string>>();
    m.weights.scheme = ParseWeightScheme(j.at("scheme").get<std::string>());
    const std::vector<double> w = j.at("weights").get<std::vector<double>>();
    m.weights.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.bound = j.at("bound").get<double>();
    m.covariance_source.fingerprint = j.at("covariance_source").at("fingerprint").get<uint64_t>();
    m.covariance_source.size = j.at("covariance_source").at("n_samples").get<size_t>();
    if (m.member_ids.size() != w.size()) throw Error(ErrorCode::kParse, "manifest weights/members mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed ensemble manifest: ") + e.what());
  }
}

void SaveManifest(const std::filesystem::path& path, const EnsembleManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << ToJson(manifest).dump(2) << '\n';
}

EnsembleManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return EnsembleManifestFromJson(j);
}

Ensemble MaterializeEnsemble(const EnsembleManifest& manifest,
                             std::span<const std::shared_ptr<const ComponentModel>> models) {
  std::map<std::string, std::shared_ptr<const ComponentModel>> by_id;
  for (const auto& m : models) by_id[m->model_id] = m;
  Ensemble e;
  e.bound = manifest.bound;
  e.weights = manifest.weights;
  for (const std::string& id : manifest.member_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kAlignment, "ensemble member " + id + " not found");
    if (it->second->output_bound != manifest.bound) {
      throw Error(ErrorCode::kInvariant, "member " + id + " has a different output bound");
    }
    e.members.push_back(it->second);
  }
  return e;
}

}  // namespace dpens
