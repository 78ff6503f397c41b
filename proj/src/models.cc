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

#include "dpens/models.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dpens/error.h"
#include "dpens/random.h"

namespace dpens {
namespace {

constexpr int kModelFormatVersion = 1;

// Row t holds [x_t, x_{t-1}, ..., x_{t-lags+1}]; indices below zero clamp to
// the first row.
Eigen::MatrixXd LaggedDesign(const Eigen::MatrixXd& grid, int lags) {
  const Eigen::Index steps = grid.rows(), f = grid.cols();
  Eigen::MatrixXd design(steps, lags * f);
  for (int l = 0; l < lags; ++l) {
    for (Eigen::Index t = 0; t < steps; ++t) {
      design.block(t, l * f, 1, f) = grid.row(std::max<Eigen::Index>(0, t - l));
    }
  }
  return design;
}

Eigen::VectorXd LabelVector(const PatientRecord& r) {
  Eigen::VectorXd y(r.steps());
  for (int t = 0; t < r.steps(); ++t) y(t) = r.labels[static_cast<size_t>(t)];
  return y;
}

std::vector<double> FitRidge(std::span<const PatientRecord> records, const RegressorConfig& cfg) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.lags) * records.front().features();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd sum_x = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_xy = Eigen::VectorXd::Zero(dim);
  double sum_y = 0.0, n = 0.0;
  for (const PatientRecord& r : records) {
    const Eigen::MatrixXd design = LaggedDesign(r.grid, cfg.lags);
    const Eigen::VectorXd y = LabelVector(r);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    sum_x += design.colwise().sum().transpose();
    sum_xy += design.transpose() * y;
    sum_y += y.sum();
    n += static_cast<double>(r.steps());
  }
  const Eigen::VectorXd mean_x = sum_x / n;
  const double mean_y = sum_y / n;
  Eigen::MatrixXd cov = gram.selfadjointView<Eigen::Lower>();
  cov /= n;
  cov -= mean_x * mean_x.transpose();
  cov.diagonal().array() += cfg.ridge;
  const Eigen::VectorXd rhs = sum_xy / n - mean_x * mean_y;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (cfg.ridge == 0.0 && ldlt.rcond() < 1e-14)) {
    throw Error(ErrorCode::kSingular, "ridge normal equations are singular; increase the ridge penalty");
  }
  const Eigen::VectorXd theta = ldlt.solve(rhs);
  std::vector<double> params(static_cast<size_t>(dim) + 1);
  params[0] = mean_y - mean_x.dot(theta);
  std::copy(theta.data(), theta.data() + dim, params.begin() + 1);
  return params;
}

std::vector<double> RawRidge(const ComponentModel& m, const Eigen::MatrixXd& grid) {
  const Eigen::MatrixXd design = LaggedDesign(grid, m.config.lags);
  Eigen::Map<const Eigen::VectorXd> theta(m.parameters.data() + 1, design.cols());
  Eigen::VectorXd y = (design * theta).array() + m.parameters[0];
  return std::vector<double>(y.data(), y.data() + y.size());
}

void CheckShape(const ComponentModel& m, const PatientRecord& r) {
  if (r.features() != m.n_features) {
    throw Error(ErrorCode::kShape, "record " + r.patient_id + " has " + std::to_string(r.features()) +
                                       " features, model " + m.model_id + " expects " +
                                       std::to_string(m.n_features));
  }
}

}  // namespace

std::string_view RegressorKindName(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::kBaseline: return "baseline";
    case RegressorKind::kRidge: return "ridge";
    case RegressorKind::kRecurrent: return "recurrent";
  }
  return "unknown";
}

RegressorKind ParseRegressorKind(std::string_view name) {
  if (name == "baseline") return RegressorKind::kBaseline;
  if (name == "ridge") return RegressorKind::kRidge;
  if (name == "recurrent") return RegressorKind::kRecurrent;
  throw Error(ErrorCode::kInvalidArgument, "unknown regressor kind '" + std::string(name) + "'");
}

void RegressorConfig::Validate() const {
  if (!(bound > 0)) throw Error(ErrorCode::kInvalidArgument, "output bound must be positive");
  if (kind == RegressorKind::kRidge) {
    if (lags < 1) throw Error(ErrorCode::kInvalidArgument, "lags must be >= 1");
    if (!(ridge >= 0)) throw Error(ErrorCode::kInvalidArgument, "ridge penalty must be >= 0");
  }
  if (kind == RegressorKind::kRecurrent) {
    if (hidden < 1 || epochs < 0 || batch_windows < 1 || window_steps < 2 || window_overlap < 0 ||
        window_overlap >= window_steps || !(learning_rate > 0) || !(clip_norm > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "invalid recurrent regressor settings");
    }
  }
}

int RegressorConfig::MinSteps() const {
  switch (kind) {
    case RegressorKind::kRidge: return lags;
    case RegressorKind::kRecurrent: return 2;
    case RegressorKind::kBaseline: return 1;
  }
  return 1;
}

nlohmann::json ToJson(const RegressorConfig& c) {
  return nlohmann::json{{"kind", RegressorKindName(c.kind)},
                        {"bound", c.bound},
                        {"lags", c.lags},
                        {"ridge", c.ridge},
                        {"hidden", c.hidden},
                        {"epochs", c.epochs},
                        {"batch_windows", c.batch_windows},
                        {"learning_rate", c.learning_rate},
                        {"window_steps", c.window_steps},
                        {"window_overlap", c.window_overlap},
                        {"clip_norm", c.clip_norm}};
}

RegressorConfig RegressorConfigFromJson(const nlohmann::json& j) {
  RegressorConfig c;
  c.kind = ParseRegressorKind(j.at("kind").get<std::string>());
  c.bound = j.at("bound").get<double>();
  c.lags = j.at("lags").get<int>();
  c.ridge = j.at("ridge").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_windows = j.at("batch_windows").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.window_steps = j.at("window_steps").get<int>();
  c.window_overlap = j.at("window_overlap").get<int>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.Validate();
  return c;
}

ComponentModel TrainComponent(std::span<const PatientRecord> records, const RegressorConfig& config,
                              uint64_t seed, std::string model_id) {
  config.Validate();
  if (records.empty()) throw Error(ErrorCode::kEmpty, "no training records");
  const int f = records.front().features();
  for (const PatientRecord& r : records) {
    if (r.features() != f) throw Error(ErrorCode::kShape, "training records differ in feature count");
    if (r.steps() < config.MinSteps()) {
      throw Error(ErrorCode::kInsufficientData, "record " + r.patient_id + " has " +
                                                    std::to_string(r.steps()) + " steps, need " +
                                                    std::to_string(config.MinSteps()));
    }
  }

  ComponentModel m;
  m.config = config;
  m.n_features = f;
  m.output_bound = config.bound;
  m.model_id = !model_id.empty() ? std::move(model_id)
               : records.size() == 1 ? "m:" + records.front().patient_id
                                     : std::string("full");
  for (const PatientRecord& r : records) m.trained_on.push_back(r.patient_id);

  switch (config.kind) {
    case RegressorKind::kBaseline: {
      double sum = 0, n = 0;
      for (const PatientRecord& r : records) {
        for (int l : r.labels) sum += l;
        n += r.steps();
      }
      m.parameters = {sum / n};
      break;
    }
    case RegressorKind::kRidge:
      m.parameters = FitRidge(records, config);
      break;
    case RegressorKind::kRecurrent:
      m.parameters = internal::TrainRecurrent(records, config, seed);
      break;
  }

  double sq = 0, n = 0;
  for (const PatientRecord& r : records) {
    const std::vector<double> pred = Predict(m, r);
    for (int t = 0; t < r.steps(); ++t) {
      const double d = pred[static_cast<size_t>(t)] - r.labels[static_cast<size_t>(t)];
      sq += d * d;
    }
    n += r.steps();
  }
  m.avg_train_loss = sq / n;
  return m;
}

std::vector<double> Predict(const ComponentModel& model, const PatientRecord& record) {
  CheckShape(model, record);
  std::vector<double> out;
  switch (model.kind()) {
    case RegressorKind::kBaseline:
      out.assign(static_cast<size_t>(record.steps()), model.parameters.at(0));
      break;
    case RegressorKind::kRidge:
      out = RawRidge(model, record.grid);
      break;
    case RegressorKind::kRecurrent:
      out = internal::PredictRecurrentRaw(model.parameters, model.config, record.grid);
      break;
  }
  for (double& v : out) v = std::clamp(v, 0.0, model.output_bound);
  return out;
}

SampleIndex MakeSampleIndex(std::span<const PatientRecord> eval_set) {
  SampleIndex idx;
  uint64_t h = Fnv1a("sample-index");
  for (const PatientRecord& r : eval_set) {
    h = Fnv1a(r.patient_id, h);
    const std::string steps = ":" + std::to_string(r.steps()) + ";";
    h = Fnv1a(steps, h);
    idx.size += static_cast<size_t>(r.steps());
  }
  idx.fingerprint = h;
  return idx;
}

MisfitVector MisfitsFromPredictions(std::string model_id, std::span<const std::vector<double>> predictions,
                                    std::span<const PatientRecord> eval_set) {
  if (predictions.size() != eval_set.size()) {
    throw Error(ErrorCode::kShape, "one prediction series per evaluation record required");
  }
  MisfitVector mv;
  mv.model_id = std::move(model_id);
  mv.sample_index = MakeSampleIndex(eval_set);
  mv.values.resize(static_cast<Eigen::Index>(mv.sample_index.size));
  Eigen::Index k = 0;
  for (size_t i = 0; i < eval_set.size(); ++i) {
    const PatientRecord& r = eval_set[i];
    if (predictions[i].size() != static_cast<size_t>(r.steps())) {
      throw Error(ErrorCode::kShape, "prediction length differs from record " + r.patient_id);
    }
    for (int t = 0; t < r.steps(); ++t) {
      mv.values(k++) = predictions[i][static_cast<size_t>(t)] - r.labels[static_cast<size_t>(t)];
    }
  }
  return mv;
}

MisfitVector Misfits(const ComponentModel& model, std::span<const PatientRecord> eval_set) {
  if (eval_set.empty()) throw Error(ErrorCode::kEmpty, "empty evaluation set");
  std::vector<std::vector<double>> preds;
  preds.reserve(eval_set.size());
  for (const PatientRecord& r : eval_set) preds.push_back(Predict(model, r));
  return MisfitsFromPredictions(model.model_id, preds, eval_set);
}

nlohmann::json ToJson(const ComponentModel& m) {
  return nlohmann::json{{"model_id", m.model_id},
                        {"kind", RegressorKindName(m.kind())},
                        {"version", kModelFormatVersion},
                        {"bound", m.output_bound},
                        {"n_features", m.n_features},
                        {"avg_train_loss", m.avg_train_loss},
                        {"trained_on", m.trained_on},
                        {"config", ToJson(m.config)},
                        {"parameters", m.parameters}};
}

ComponentModel ComponentModelFromJson(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported model format version");
    }
    ComponentModel m;
    m.model_id = j.at("model_id").get<std::string>();
    m.config = RegressorConfigFromJson(j.at("config"));
    if (RegressorKindName(m.config.kind) != j.at("kind").get<std::string>()) {
      throw Error(ErrorCode::kParse, "model kind does not match its config");
    }
    m.output_bound = j.at("bound").get<double>();
    m.n_features = j.at("n_features").get<int>();
    m.avg_train_loss = j.at("avg_train_loss").get<double>();
    m.trained_on = j.at("trained_on").get<std::vector<std::string>>();
    m.parameters = j.at("parameters").get<std::vector<double>>();
    if (m.trained_on.empty()) throw Error(ErrorCode::kParse, "model without training patients");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed model: ") + e.what());
  }
}

void SaveModels(const std::filesystem::path& path, std::span<const ComponentModel> models) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ComponentModel& m : models) arr.push_back(ToJson(m));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << nlohmann::json{{"models", arr}}.dump() << '\n';
}

std::vector<ComponentModel> LoadModels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  std::vector<ComponentModel> models;
  for (const auto& item : j.at("models")) models.push_back(ComponentModelFromJson(item));
  return models;
}

}  // namespace dpens
