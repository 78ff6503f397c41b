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

#include "dpens/pipeline.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "dpens/csv.h"
#include "dpens/error.h"
#include "dpens/growing.h"
#include "dpens/metrics.h"
#include "dpens/parallel.h"
#include "dpens/privacy.h"
#include "dpens/random.h"
#include "dpens/svg_plot.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dpens {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAccuracyLossLevel = 0.5;
constexpr std::string_view kQueryLogHeader = "timestamp,epsilon,scale";

void Info(const std::string& message) { std::cerr << "[dpens] " << message << "\n"; }

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string KeyOf(const json& j) { return Hex(Fnv1a(j.dump())); }

std::string FileDigest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Hex(Fnv1a(buf.str()));
}

json NumberOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double NumberOr(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).is_null() ? kInf : j.at(key).get<double>();
}

std::string FoldDir(int fold) { return "fold" + std::to_string(fold); }

// Transposed member outputs (members x steps) so that each step is a
// contiguous column.
struct RecordOutputs {
  Eigen::MatrixXd by_step;
  std::vector<WeightVector> weights;
};

RecordOutputs ComputeOutputs(const Ensemble& ensemble, const PatientRecord& record) {
  const Eigen::MatrixXd outputs = MemberOutputs(ensemble, record);
  RecordOutputs r;
  r.weights = StepWeights(ensemble, outputs, record);
  r.by_step = outputs.transpose();
  return r;
}

std::span<const double> StepOutputs(const RecordOutputs& r, int t) {
  return {r.by_step.col(t).data(), static_cast<size_t>(r.by_step.rows())};
}

std::vector<double> ExactSeries(const RecordOutputs& r) {
  std::vector<double> y(r.by_step.cols());
  for (Eigen::Index t = 0; t < r.by_step.cols(); ++t) y[t] = Combine(StepOutputs(r, t), r.weights[t]);
  return y;
}

std::vector<double> NoisySeries(const RecordOutputs& r, const PrivacyParams& params, PrivacyAccountant& accountant,
                                Rng& rng, const ReleaseOptions& options) {
  std::vector<double> y(r.by_step.cols());
  for (Eigen::Index t = 0; t < r.by_step.cols(); ++t) {
    y[t] = PrivatePredict(StepOutputs(r, t), r.weights[t], params, accountant, rng, options);
  }
  return y;
}

std::vector<RecordOutputs> OutputsFor(const Ensemble& ensemble, std::span<const PatientRecord> records, int workers) {
  std::vector<RecordOutputs> out(records.size());
  ParallelFor(records.size(), workers, [&](size_t i) { out[i] = ComputeOutputs(ensemble, records[i]); });
  return out;
}

Ensemble SingleModel(std::shared_ptr<const ComponentModel> model, double bound) {
  Ensemble e;
  e.members.push_back(std::move(model));
  e.weights = UniformWeights(1);
  e.bound = bound;
  return e;
}

double PooledMse(std::span<const std::vector<double>> predictions, std::span<const PatientRecord> records) {
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    for (int t = 0; t < records[i].steps(); ++t) {
      const double d = predictions[i][t] - records[i].labels[t];
      sum += d * d;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// NaN when the horizon has a single class on this set.
double HorizonAuroc(std::span<const PatientRecord> records, std::span<const std::vector<double>> predictions,
                    const HorizonSpec& h, bool macro, int* skipped) {
  if (!macro) {
    const PooledScores pooled = PoolHorizon(records, predictions, h);
    if (skipped != nullptr) *skipped += pooled.skipped;
    try {
      return Auroc(pooled.scores, pooled.labels);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
      return std::nan("");
    }
  }
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto sel = HorizonLabels(records[i], h);
    if (!sel) {
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    std::vector<double> s;
    for (int t : sel->steps) s.push_back(predictions[i][t]);
    const int pos = static_cast<int>(std::count(sel->labels.begin(), sel->labels.end(), 1));
    if (pos == 0 || pos == static_cast<int>(sel->labels.size())) continue;
    sum += Auroc(s, sel->labels);
    ++n;
  }
  return n == 0 ? std::nan("") : sum / n;
}

struct QueryLogChunk {
  std::vector<QueryRecord> records;
};

void WriteQueryLog(const fs::path& path, const std::vector<QueryLogChunk>& chunks) {
  CsvWriter out(path, kQueryLogHeader);
  uint64_t clock = 0;
  for (const QueryLogChunk& c : chunks) {
    for (const QueryRecord& q : c.records) {
      out << static_cast<long long>(clock++) << q.epsilon << q.scale;
      out.EndRow();
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

RunConfig::RunConfig() {
  synth.n_nonsepsis = 240;
  synth.n_sepsis = 240;
  synth.stay_median_h = 40.0;
  synth.onset_median_h = 70.0;
  synth.post_onset_max_h = 48.0;
  synth.n_subgroups = 1;
  synth.heterogeneity = 2.0;
  synth.noise = 0.3;
  synth.patient_offset = 4.0;
  component.ridge = 0.01;
  full.kind = RegressorKind::kRecurrent;
  full.hidden = 32;
  full.epochs = 20;
}

void RunConfig::Validate() const {
  if (workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  if (timelines.has_value() != labels.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "timelines and labels must be given together");
  }
  if (!timelines) synth.Validate();
  if (folds.empty()) throw Error(ErrorCode::kInvalidArgument, "no folds selected");
  for (int f : folds) {
    if (f < 0 || f > 3) throw Error(ErrorCode::kInvalidArgument, "fold index must be 0..3");
  }
  component.Validate();
  full.Validate();
  if (!(bound > 0) || !std::isfinite(bound)) throw Error(ErrorCode::kInvalidArgument, "bound must be positive");
  if (epsilons.empty()) throw Error(ErrorCode::kInvalidArgument, "empty epsilon list");
  for (double e : epsilons) PrivacyParams{e, bound}.Validate();
  if (!(total_budget > 0)) throw Error(ErrorCode::kInvalidArgument, "total budget must be positive");
  if (resamples < 1) throw Error(ErrorCode::kInvalidArgument, "resamples must be >= 1");
  if (optimal_ridge && *optimal_ridge < 0) throw Error(ErrorCode::kInvalidArgument, "ridge must be >= 0");
}

json ToJson(const CohortSpec& s) {
  return {{"n_sepsis", s.n_sepsis},
          {"n_nonsepsis", s.n_nonsepsis},
          {"n_features", s.n_features},
          {"n_subgroups", s.n_subgroups},
          {"stay_median_h", s.stay_median_h},
          {"stay_log_sd", s.stay_log_sd},
          {"min_stay_h", s.min_stay_h},
          {"max_stay_h", s.max_stay_h},
          {"onset_median_h", s.onset_median_h},
          {"onset_log_sd", s.onset_log_sd},
          {"min_onset_h", s.min_onset_h},
          {"post_onset_min_h", s.post_onset_min_h},
          {"post_onset_max_h", s.post_onset_max_h},
          {"noise", s.noise},
          {"patient_offset", s.patient_offset},
          {"heterogeneity", s.heterogeneity},
          {"admission_clock_h", s.admission_clock_h}};
}

CohortSpec CohortSpecFromJson(const json& j) {
  CohortSpec s;
  s.n_sepsis = j.value("n_sepsis", s.n_sepsis);
  s.n_nonsepsis = j.value("n_nonsepsis", s.n_nonsepsis);
  s.n_features = j.value("n_features", s.n_features);
  s.n_subgroups = j.value("n_subgroups", s.n_subgroups);
  s.stay_median_h = j.value("stay_median_h", s.stay_median_h);
  s.stay_log_sd = j.value("stay_log_sd", s.stay_log_sd);
  s.min_stay_h = j.value("min_stay_h", s.min_stay_h);
  s.max_stay_h = j.value("max_stay_h", s.max_stay_h);
  s.onset_median_h = j.value("onset_median_h", s.onset_median_h);
  s.onset_log_sd = j.value("onset_log_sd", s.onset_log_sd);
  s.min_onset_h = j.value("min_onset_h", s.min_onset_h);
  s.post_onset_min_h = j.value("post_onset_min_h", s.post_onset_min_h);
  s.post_onset_max_h = j.value("post_onset_max_h", s.post_onset_max_h);
  s.noise = j.value("noise", s.noise);
  s.patient_offset = j.value("patient_offset", s.patient_offset);
  s.heterogeneity = j.value("heterogeneity", s.heterogeneity);
  s.admission_clock_h = j.value("admission_clock_h", s.admission_clock_h);
  return s;
}

json ToJson(const RunConfig& c) {
  json j;
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  if (c.timelines) j["timelines"] = c.timelines->string();
  if (c.labels) j["labels"] = c.labels->string();
  if (c.catalog) j["catalog"] = c.catalog->string();
  j["synth"] = ToJson(c.synth);
  j["folds"] = c.folds;
  j["component"] = ToJson(c.component);
  j["full"] = ToJson(c.full);
  j["scheme"] = std::string(WeightSchemeName(c.scheme));
  j["optimal_ridge"] = c.optimal_ridge ? json(*c.optimal_ridge) : json(nullptr);
  j["bound"] = c.bound;
  j["epsilons"] = c.epsilons;
  j["total_budget"] = NumberOrNull(c.total_budget);
  j["clip_release"] = c.clip_release;
  if (c.query_log) j["query_log"] = c.query_log->string();
  j["resamples"] = c.resamples;
  j["macro_auroc"] = c.macro_auroc;
  j["plots"] = c.plots;
  return j;
}

RunConfig RunConfigFromJson(const json& j) {
  RunConfig c;
  c.out = j.value("out", c.out.string());
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("timelines")) c.timelines = j.at("timelines").get<std::string>();
  if (j.contains("labels")) c.labels = j.at("labels").get<std::string>();
  if (j.contains("catalog")) c.catalog = j.at("catalog").get<std::string>();
  if (j.contains("synth")) {
    json merged = ToJson(c.synth);
    merged.update(j.at("synth"));
    c.synth = CohortSpecFromJson(merged);
  }
  c.folds = j.value("folds", c.folds);
  // Partial regressor blocks override the defaults field by field.
  for (auto [key, target] : {std::pair{"component", &c.component}, std::pair{"full", &c.full}}) {
    if (!j.contains(key)) continue;
    json merged = ToJson(*target);
    merged.update(j.at(key));
    *target = RegressorConfigFromJson(merged);
  }
  if (j.contains("scheme")) c.scheme = ParseWeightScheme(j.at("scheme").get<std::string>());
  if (j.contains("optimal_ridge") && !j.at("optimal_ridge").is_null()) {
    c.optimal_ridge = j.at("optimal_ridge").get<double>();
  }
  c.bound = j.value("bound", c.bound);
  c.epsilons = j.value("epsilons", c.epsilons);
  c.total_budget = NumberOr(j, "total_budget", c.total_budget);
  c.clip_release = j.value("clip_release", c.clip_release);
  if (j.contains("query_log")) c.query_log = j.at("query_log").get<std::string>();
  c.resamples = j.value("resamples", c.resamples);
  c.macro_auroc = j.value("macro_auroc", c.macro_auroc);
  c.plots = j.value("plots", c.plots);
  return c;
}

std::vector<PatientRecord> LoadCohortRecords(const fs::path& timelines, const fs::path& labels,
                                             const FeatureCatalog& catalog) {
  const std::vector<RawTimeline> raw = IngestCsv(timelines, labels, catalog);
  std::vector<PatientRecord> records;
  records.reserve(raw.size());
  for (const RawTimeline& r : raw) records.push_back(BuildRecord(r, catalog));
  return FilterCohort(std::move(records));
}

void MergeQueryLogs(const std::vector<fs::path>& logs, const fs::path& out) {
  std::vector<QueryLogChunk> chunks;
  for (const fs::path& p : logs) {
    if (!fs::exists(p)) continue;
    QueryLogChunk c;
    for (const CsvRow& row : ReadCsv(p, kQueryLogHeader)) {
      c.records.push_back({0, ParseDouble(row.fields[1], row.line), ParseDouble(row.fields[2], row.line)});
    }
    chunks.push_back(std::move(c));
  }
  WriteQueryLog(out, chunks);
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  config_.Validate();
  config_.component.bound = config_.bound;
  config_.full.bound = config_.bound;
}

fs::path Pipeline::StageDir(std::string_view stage) const { return config_.out / std::string(stage); }

bool Pipeline::Cached(std::string_view stage, const std::string& key, const std::vector<std::string>& outputs) const {
  if (config_.force) return false;
  const fs::path dir = StageDir(stage);
  std::ifstream in(dir / "stamp.json");
  if (!in) return false;
  json stamp;
  try {
    in >> stamp;
  } catch (const json::exception&) {
    return false;
  }
  if (stamp.value("key", std::string()) != key) return false;
  for (const std::string& o : outputs) {
    if (!fs::exists(dir / o)) return false;
  }
  return true;
}

void Pipeline::Stamp(std::string_view stage, const std::string& key) const {
  std::ofstream out(StageDir(stage) / "stamp.json");
  out << json{{"stage", stage}, {"key", key}}.dump(2) << "\n";
}

void Pipeline::RunStage(std::string_view stage, const std::string& key, const std::vector<std::string>& outputs,
                        Body body) {
  if (Cached(stage, key, outputs)) {
    Info(std::string(stage) + ": up to date");
    return;
  }
  const fs::path dir = StageDir(stage);
  fs::create_directories(dir);
  fs::remove(dir / "stamp.json");
  Info(std::string(stage) + ": running");
  try {
    (this->*body)(dir);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kIo, std::string(stage) + ": " + e.what());
  }
  Stamp(stage, key);
  executed_.emplace_back(stage);
}

std::string Pipeline::CohortKey() {
  if (auto it = keys_.find("cohort"); it != keys_.end()) return it->second;
  json j;
  if (config_.timelines) {
    j["timelines"] = FileDigest(*config_.timelines);
    j["labels"] = FileDigest(*config_.labels);
    if (config_.catalog) j["catalog"] = FileDigest(*config_.catalog);
  } else {
    j["synth"] = ToJson(config_.synth);
    j["seed"] = config_.seed;
  }
  return keys_["cohort"] = KeyOf(j);
}

std::string Pipeline::PreprocessKey() {
  if (auto it = keys_.find("preprocess"); it != keys_.end()) return it->second;
  return keys_["preprocess"] = KeyOf({{"cohort", CohortKey()}, {"seed", config_.seed}});
}

std::string Pipeline::TrainKey() {
  if (auto it = keys_.find("train"); it != keys_.end()) return it->second;
  return keys_["train"] = KeyOf({{"preprocess", PreprocessKey()},
                                 {"folds", config_.folds},
                                 {"component", ToJson(config_.component)},
                                 {"full", ToJson(config_.full)}});
}

std::string Pipeline::GrowKey() {
  if (auto it = keys_.find("grow"); it != keys_.end()) return it->second;
  return keys_["grow"] = KeyOf({{"train", TrainKey()},
                                {"scheme", WeightSchemeName(config_.scheme)},
                                {"optimal_ridge", config_.optimal_ridge ? json(*config_.optimal_ridge) : json()}});
}

FeatureCatalog Pipeline::Catalog() {
  if (config_.catalog) return FeatureCatalog::Load(*config_.catalog);
  if (config_.timelines) throw Error(ErrorCode::kInvalidArgument, "CSV input needs a feature catalog");
  return FeatureCatalog::Load(StageDir("synth") / "catalog.csv");
}

const std::vector<PatientRecord>& Pipeline::Records() {
  if (!records_) {
    const fs::path timelines = config_.timelines ? *config_.timelines : StageDir("synth") / "timelines.csv";
    const fs::path labels = config_.labels ? *config_.labels : StageDir("synth") / "labels.csv";
    records_ = LoadCohortRecords(timelines, labels, Catalog());
  }
  return *records_;
}

FoldData Pipeline::LoadFold(int fold) {
  if (!assignment_) assignment_ = ReadPartitionsCsv(StageDir("preprocess") / "partitions.csv");
  return MakeFold(Records(), *assignment_, fold);
}

std::vector<std::shared_ptr<const ComponentModel>> Pipeline::LoadComponents(int fold) {
  std::vector<std::shared_ptr<const ComponentModel>> out;
  for (ComponentModel& m : LoadModels(StageDir("train") / FoldDir(fold) / "components.json")) {
    out.push_back(std::make_shared<const ComponentModel>(std::move(m)));
  }
  return out;
}

std::shared_ptr<const ComponentModel> Pipeline::LoadFull(int fold) {
  std::vector<ComponentModel> m = LoadModels(StageDir("train") / FoldDir(fold) / "full.json");
  if (m.size() != 1) throw Error(ErrorCode::kParse, "full.json must hold one model");
  return std::make_shared<const ComponentModel>(std::move(m[0]));
}

Ensemble Pipeline::LoadEnsemble(int fold, std::span<const std::shared_ptr<const ComponentModel>> components) {
  return MaterializeEnsemble(LoadManifest(StageDir("grow") / FoldDir(fold) / "manifest.json"), components);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

void Pipeline::Synth() {
  if (config_.timelines) return;
  RunStage("synth", CohortKey(), {"timelines.csv", "labels.csv", "catalog.csv"}, &Pipeline::DoSynth);
}

void Pipeline::DoSynth(const fs::path& dir) {
  const std::vector<RawTimeline> cohort = SynthesizeCohort(config_.synth, DeriveSeed(config_.seed, "synth"));
  WriteTimelinesCsv(dir / "timelines.csv", cohort);
  WriteLabelsCsv(dir / "labels.csv", cohort);
  SynthCatalog(config_.synth).Save(dir / "catalog.csv");
  records_.reset();
}

void Pipeline::Preprocess() {
  Synth();
  RunStage("preprocess", PreprocessKey(), {"partitions.csv", "cohort.csv", "folds.csv"},
           &Pipeline::DoPreprocess);
}

void Pipeline::DoPreprocess(const fs::path& dir) {
  const std::vector<PatientRecord>& records = Records();
  if (records.empty()) throw Error(ErrorCode::kInsufficientData, "no patients left after filtering");
  const PartitionAssignment assignment = AssignPartitions(records, DeriveSeed(config_.seed, "partition"));
  WritePartitionsCsv(dir / "partitions.csv", assignment);
  assignment_ = assignment;

  CsvWriter cohort(dir / "cohort.csv", "patient_id,is_sepsis,stay_hours,onset_hours,steps,partition");
  for (const PatientRecord& r : records) {
    cohort << r.patient_id << (r.is_sepsis ? 1 : 0) << r.stay_hours
           << (r.onset_min ? *r.onset_min / 60.0 : std::nan("")) << r.steps()
           << std::string_view(std::string(1, PartitionName(*assignment.Find(r.patient_id))));
    cohort.EndRow();
  }

  const std::array<size_t, 4> sizes = assignment.Sizes();
  CsvWriter folds(dir / "folds.csv", "fold,train,validation,test,n_train,n_validation,n_test");
  for (int k = 0; k < 4; ++k) {
    const Fold f = FoldLayout(k);
    const std::string train = {PartitionName(f.train[0]), '+', PartitionName(f.train[1])};
    folds << k << std::string_view(train) << std::string_view(std::string(1, PartitionName(f.validation)))
          << std::string_view(std::string(1, PartitionName(f.test)))
          << sizes[static_cast<int>(f.train[0])] + sizes[static_cast<int>(f.train[1])]
          << sizes[static_cast<int>(f.validation)] << sizes[static_cast<int>(f.test)];
    folds.EndRow();
  }
}

void Pipeline::Train() {
  Preprocess();
  std::vector<std::string> outputs;
  for (int k : config_.folds) {
    outputs.push_back(FoldDir(k) + "/components.json");
    outputs.push_back(FoldDir(k) + "/full.json");
  }
  RunStage("train", TrainKey(), outputs, &Pipeline::DoTrain);
}

void Pipeline::DoTrain(const fs::path& dir) {
  for (int k : config_.folds) {
    const FoldData fd = LoadFold(k);
    fs::create_directories(dir / FoldDir(k));

    std::vector<size_t> eligible;
    for (size_t i = 0; i < fd.train.size(); ++i) {
      if (fd.train[i].steps() >= config_.component.MinSteps()) eligible.push_back(i);
    }
    if (eligible.size() < fd.train.size()) {
      LogWarning("fold " + std::to_string(k) + ": " + std::to_string(fd.train.size() - eligible.size()) +
                 " training patients too short for a patient model");
    }
    if (eligible.empty()) throw Error(ErrorCode::kInsufficientData, "no patient long enough for a patient model");

    const ComponentModel full =
        TrainComponent(fd.train, config_.full, DeriveSeed(config_.seed, "train/full", k), "full");
    const std::string stream = "train/component/" + FoldDir(k);
    std::vector<ComponentModel> components(eligible.size());
    ParallelFor(eligible.size(), config_.workers, [&](size_t j) {
      const PatientRecord& r = fd.train[eligible[j]];
      components[j] = TrainComponent(std::span(&r, 1), config_.component,
                                     DeriveSeed(config_.seed, stream, Fnv1a(r.patient_id)));
    });
    SaveModels(dir / FoldDir(k) / "components.json", components);
    SaveModels(dir / FoldDir(k) / "full.json", std::span(&full, 1));
    Info("train: fold " + std::to_string(k) + " " + std::to_string(components.size()) + " patient models");
  }
}

void Pipeline::Grow() {
  Train();
  std::vector<std::string> outputs;
  for (int k : config_.folds) {
    outputs.push_back(FoldDir(k) + "/manifest.json");
    outputs.push_back(FoldDir(k) + "/growth_log.csv");
  }
  RunStage("grow", GrowKey(), outputs, &Pipeline::DoGrow);
}

void Pipeline::DoGrow(const fs::path& dir) {
  for (int k : config_.folds) {
    const FoldData fd = LoadFold(k);
    const auto components = LoadComponents(k);
    std::map<std::string, bool> sepsis;
    for (const PatientRecord& r : fd.train) sepsis[r.patient_id] = r.is_sepsis;

    std::vector<Candidate> candidates(components.size());
    ParallelFor(components.size(), config_.workers, [&](size_t i) {
      const auto& m = components[i];
      auto it = sepsis.find(m->trained_on.at(0));
      candidates[i] = MakeCandidate(m, Misfits(*m, fd.validation), it != sepsis.end() && it->second);
    });
    const SampleIndex validation = MakeSampleIndex(fd.validation);
    GrowthResult grown = dpens::Grow(CandidatePool::Make(std::move(candidates)), validation);

    EnsembleManifest manifest;
    for (const auto& m : grown.ensemble.members) manifest.member_ids.push_back(m->model_id);
    manifest.bound = config_.bound;
    manifest.covariance_source = validation;
    switch (config_.scheme) {
      case WeightScheme::kUniform:
        manifest.weights = grown.ensemble.weights;
        break;
      case WeightScheme::kOptimal:
        manifest.weights = OptimalWeights(EstimateCovariance(grown.member_misfits), config_.optimal_ridge);
        break;
      case WeightScheme::kHistory:
        manifest.weights = WeightVector{grown.ensemble.weights.w, WeightScheme::kHistory};
        break;
    }
    fs::create_directories(dir / FoldDir(k));
    SaveManifest(dir / FoldDir(k) / "manifest.json", manifest);
    WriteGrowthLog(dir / FoldDir(k) / "growth_log.csv", grown.log);
    Info("grow: fold " + std::to_string(k) + " ensemble of " + std::to_string(manifest.member_ids.size()) +
         " from " + std::to_string(components.size()));
  }
}

void Pipeline::Evaluate() {
  Grow();
  const std::string key = KeyOf({{"grow", GrowKey()}, {"macro", config_.macro_auroc}});
  RunStage("evaluate", key, {"results.csv", "auroc_folds.csv", "summary.csv"}, &Pipeline::DoEvaluate);
}

void Pipeline::DoEvaluate(const fs::path& dir) {
  const std::vector<HorizonSpec> horizons = StandardHorizons();
  const std::string ens_name = "ensemble_" + std::string(WeightSchemeName(config_.scheme));
  ResultRow full_row{"full", std::vector<std::vector<double>>(horizons.size())};
  ResultRow ens_row{ens_name, std::vector<std::vector<double>>(horizons.size())};
  CsvWriter folds(dir / "auroc_folds.csv", "fold,model,horizon,auroc");
  CsvWriter summary(dir / "summary.csv",
                    "fold,pool_size,ensemble_size,ensemble_sepsis_models,full_train_loss,ensemble_train_loss,"
                    "full_test_mse,ensemble_test_mse");
  int skipped = 0;
  for (int k : config_.folds) {
    const FoldData fd = LoadFold(k);
    const auto components = LoadComponents(k);
    const Ensemble ensemble = LoadEnsemble(k, components);
    const Ensemble full = SingleModel(LoadFull(k), config_.bound);

    auto series = [&](const Ensemble& e, std::span<const PatientRecord> records) {
      std::vector<std::vector<double>> out(records.size());
      ParallelFor(records.size(), config_.workers,
                  [&](size_t i) { out[i] = ExactSeries(ComputeOutputs(e, records[i])); });
      return out;
    };
    const auto full_test = series(full, fd.test);
    const auto ens_test = series(ensemble, fd.test);
    const auto ens_train = series(ensemble, fd.train);

    for (size_t h = 0; h < horizons.size(); ++h) {
      const double a_full = HorizonAuroc(fd.test, full_test, horizons[h], config_.macro_auroc, &skipped);
      const double a_ens = HorizonAuroc(fd.test, ens_test, horizons[h], config_.macro_auroc, nullptr);
      if (std::isfinite(a_full)) full_row.per_horizon[h].push_back(a_full);
      if (std::isfinite(a_ens)) ens_row.per_horizon[h].push_back(a_ens);
      folds << k << std::string_view("full") << std::string_view(horizons[h].Name()) << a_full;
      folds.EndRow();
      folds << k << std::string_view(ens_name) << std::string_view(horizons[h].Name()) << a_ens;
      folds.EndRow();
    }
    std::set<std::string> sepsis_ids;
    for (const PatientRecord& r : fd.train) {
      if (r.is_sepsis) sepsis_ids.insert(r.patient_id);
    }
    size_t sepsis_members = 0;
    for (const auto& m : ensemble.members) sepsis_members += sepsis_ids.count(m->trained_on.at(0));
    summary << k << components.size() << ensemble.members.size() << sepsis_members
            << full.members[0]->avg_train_loss
            << PooledMse(ens_train, fd.train) << PooledMse(full_test, fd.test) << PooledMse(ens_test, fd.test);
    summary.EndRow();
  }
  if (skipped > 0) {
    LogWarning(std::to_string(skipped) + " (patient, horizon) pairs skipped: not enough history before onset");
  }
  const std::vector<ResultRow> rows = {full_row, ens_row};
  WriteResultsTable(dir / "results.csv", horizons, rows, "full");
}

void Pipeline::DpSweep() {
  Grow();
  const std::string key = KeyOf({{"grow", GrowKey()},
                                 {"macro", config_.macro_auroc},
                                 {"epsilons", config_.epsilons},
                                 {"bound", config_.bound},
                                 {"budget", NumberOrNull(config_.total_budget)},
                                 {"clip", config_.clip_release},
                                 {"log", config_.query_log.has_value()}});
  std::vector<std::string> outputs = {"accuracy_loss.csv", "accuracy_loss_summary.csv", "crossing.csv"};
  if (config_.query_log) outputs.push_back("query_log.csv");
  RunStage("dp-sweep", key, outputs, &Pipeline::DoDpSweep);
}

void Pipeline::DoDpSweep(const fs::path& dir) {
  const std::vector<HorizonSpec> horizons = StandardHorizons();
  const std::vector<std::string> targets = {"full", "ensemble"};
  const size_t n_eps = config_.epsilons.size();
  const size_t n_folds = config_.folds.size();

  struct FoldTargets {
    std::vector<std::vector<RecordOutputs>> outputs;  // [target][record]
    std::vector<std::vector<double>> exact_auroc;     // [target][horizon]
    std::vector<size_t> sizes;
    FoldData data;
  };
  std::vector<FoldTargets> per_fold(n_folds);
  for (size_t f = 0; f < n_folds; ++f) {
    FoldTargets& ft = per_fold[f];
    const int k = config_.folds[f];
    ft.data = LoadFold(k);
    const auto components = LoadComponents(k);
    const std::vector<Ensemble> ens = {SingleModel(LoadFull(k), config_.bound), LoadEnsemble(k, components)};
    for (const Ensemble& e : ens) {
      ft.sizes.push_back(e.members.size());
      ft.outputs.push_back(OutputsFor(e, ft.data.test, config_.workers));
      std::vector<std::vector<double>> exact;
      for (const RecordOutputs& r : ft.outputs.back()) exact.push_back(ExactSeries(r));
      std::vector<double> a;
      for (const HorizonSpec& h : horizons) a.push_back(HorizonAuroc(ft.data.test, exact, h, config_.macro_auroc, nullptr));
      ft.exact_auroc.push_back(std::move(a));
    }
  }

  // [fold][target][epsilon][horizon]
  const size_t n_tasks = n_folds * targets.size() * n_eps;
  std::vector<std::vector<double>> private_auroc(n_tasks);
  std::vector<QueryLogChunk> logs(n_tasks);
  ParallelFor(n_tasks, config_.workers, [&](size_t task) {
    const size_t f = task / (targets.size() * n_eps);
    const size_t t = (task / n_eps) % targets.size();
    const size_t e = task % n_eps;
    const FoldTargets& ft = per_fold[f];
    const PrivacyParams params{config_.epsilons[e], config_.bound};
    PrivacyAccountant accountant(config_.total_budget, config_.query_log.has_value());
    Rng rng(DeriveSeed(config_.seed, "dp-sweep/" + targets[t], config_.folds[f] * 1000 + e));
    const ReleaseOptions options{config_.clip_release};
    std::vector<std::vector<double>> noisy;
    for (const RecordOutputs& r : ft.outputs[t]) noisy.push_back(NoisySeries(r, params, accountant, rng, options));
    for (const HorizonSpec& h : horizons) {
      private_auroc[task].push_back(HorizonAuroc(ft.data.test, noisy, h, config_.macro_auroc, nullptr));
    }
    logs[task].records = accountant.log();
  });

  CsvWriter out(dir / "accuracy_loss.csv",
                "epsilon,horizon,target_kind,fold,auroc_private,auroc_nonprivate,accuracy_loss");
  CsvWriter summary(dir / "accuracy_loss_summary.csv",
                    "epsilon,horizon,target_kind,loss_q25,loss_median,loss_q75,auroc_nonprivate_median");
  // Fold quartiles, [target][horizon][epsilon].
  using Curve = std::vector<std::vector<std::vector<double>>>;
  Curve q25(targets.size(), std::vector<std::vector<double>>(horizons.size(), std::vector<double>(n_eps)));
  Curve median = q25, q75 = q25;
  bool degenerate = false;
  for (size_t t = 0; t < targets.size(); ++t) {
    for (size_t h = 0; h < horizons.size(); ++h) {
      for (size_t e = 0; e < n_eps; ++e) {
        std::vector<double> exact, loss;
        for (size_t f = 0; f < n_folds; ++f) {
          const size_t task = (f * targets.size() + t) * n_eps + e;
          const double a_priv = private_auroc[task][h];
          const double a_exact = per_fold[f].exact_auroc[t][h];
          double l = std::nan("");
          if (std::isfinite(a_exact) && a_exact > 0.5) {
            l = AccuracyLoss(a_priv, a_exact);
            loss.push_back(l);
          } else {
            degenerate = true;
          }
          if (std::isfinite(a_exact)) exact.push_back(a_exact);
          out << config_.epsilons[e] << std::string_view(horizons[h].Name()) << std::string_view(targets[t])
              << config_.folds[f] << a_priv << a_exact << l;
          out.EndRow();
        }
        const double nan = std::nan("");
        q25[t][h][e] = loss.empty() ? nan : Quantile(loss, 0.25);
        median[t][h][e] = loss.empty() ? nan : Quantile(loss, 0.5);
        q75[t][h][e] = loss.empty() ? nan : Quantile(loss, 0.75);
        summary << config_.epsilons[e] << std::string_view(horizons[h].Name()) << std::string_view(targets[t])
                << q25[t][h][e] << median[t][h][e] << q75[t][h][e]
                << (exact.empty() ? nan : Quantile(exact, 0.5));
        summary.EndRow();
      }
    }
  }
  if (degenerate) LogWarning("accuracy loss undefined where the non-private AUROC is not above 0.5");

  double mean_size = 0.0;
  for (const FoldTargets& ft : per_fold) mean_size += static_cast<double>(ft.sizes[1]) / n_folds;
  CsvWriter crossing(dir / "crossing.csv", "horizon,full_epsilon,ensemble_epsilon,ratio,ensemble_size");
  for (size_t h = 0; h < horizons.size(); ++h) {
    const auto full_eps = FirstCrossing(config_.epsilons, median[0][h], kAccuracyLossLevel);
    const auto ens_eps = FirstCrossing(config_.epsilons, median[1][h], kAccuracyLossLevel);
    const double a = full_eps.value_or(std::nan("")), b = ens_eps.value_or(std::nan(""));
    crossing << std::string_view(horizons[h].Name()) << a << b << a / b << mean_size;
    crossing.EndRow();
  }

  if (config_.plots) {
    for (size_t h = 0; h < horizons.size(); ++h) {
      std::vector<PlotSeries> series;
      for (size_t t = 0; t < targets.size(); ++t) {
        series.push_back({targets[t], config_.epsilons, median[t][h], q25[t][h], q75[t][h]});
      }
      WriteSvgPlot(dir / ("accuracy_loss_" + horizons[h].Name() + ".svg"),
                   {"Accuracy loss (" + horizons[h].Name() + ")", "epsilon", "accuracy loss", true, -0.2, 1.2},
                   series);
    }
  }
  if (config_.query_log) WriteQueryLog(dir / "query_log.csv", logs);
}

void Pipeline::Attack() {
  Grow();
  const std::string key = KeyOf({{"grow", GrowKey()},
                                 {"epsilons", config_.epsilons},
                                 {"bound", config_.bound},
                                 {"resamples", config_.resamples},
                                 {"budget", NumberOrNull(config_.total_budget)},
                                 {"clip", config_.clip_release},
                                 {"log", config_.query_log.has_value()}});
  std::vector<std::string> outputs = {"leakage.csv", "leakage_folds.csv"};
  if (config_.query_log) outputs.push_back("query_log.csv");
  RunStage("attack", key, outputs, &Pipeline::DoAttack);
}

void Pipeline::DoAttack(const fs::path& dir) {
  const std::vector<std::string> targets = {"full", "ensemble"};
  std::vector<double> grid = config_.epsilons;
  grid.push_back(kInf);
  const size_t n_eps = grid.size();
  const size_t n_folds = config_.folds.size();

  struct FoldTargets {
    FoldData data;
    std::vector<std::vector<RecordOutputs>> train, test;  // [target][record]
    std::vector<double> threshold;
  };
  std::vector<FoldTargets> per_fold(n_folds);
  for (size_t f = 0; f < n_folds; ++f) {
    FoldTargets& ft = per_fold[f];
    const int k = config_.folds[f];
    ft.data = LoadFold(k);
    const auto components = LoadComponents(k);
    const auto full = LoadFull(k);
    const std::vector<Ensemble> ens = {SingleModel(full, config_.bound), LoadEnsemble(k, components)};
    for (size_t t = 0; t < ens.size(); ++t) {
      ft.train.push_back(OutputsFor(ens[t], ft.data.train, config_.workers));
      ft.test.push_back(OutputsFor(ens[t], ft.data.test, config_.workers));
      if (t == 0) {
        ft.threshold.push_back(full->avg_train_loss);
      } else {
        std::vector<std::vector<double>> exact;
        for (const RecordOutputs& r : ft.train.back()) exact.push_back(ExactSeries(r));
        ft.threshold.push_back(PooledMse(exact, ft.data.train));
      }
    }
  }

  const size_t n_tasks = n_folds * targets.size() * n_eps;
  std::vector<LeakageReport> reports(n_tasks);
  std::vector<QueryLogChunk> logs(n_tasks);
  ParallelFor(n_tasks, config_.workers, [&](size_t task) {
    const size_t f = task / (targets.size() * n_eps);
    const size_t t = (task / n_eps) % targets.size();
    const size_t e = task % n_eps;
    const FoldTargets& ft = per_fold[f];
    const uint64_t index = config_.folds[f] * 1000 + e;
    const bool exact = !std::isfinite(grid[e]);
    const PrivacyParams params{exact ? 1.0 : grid[e], config_.bound};
    PrivacyAccountant accountant(config_.total_budget, config_.query_log.has_value());
    Rng noise(DeriveSeed(config_.seed, "attack/noise/" + targets[t], index));
    const ReleaseOptions options{config_.clip_release};

    std::map<std::string, const RecordOutputs*> lookup;
    for (size_t i = 0; i < ft.data.train.size(); ++i) lookup[ft.data.train[i].patient_id] = &ft.train[t][i];
    for (size_t i = 0; i < ft.data.test.size(); ++i) lookup[ft.data.test[i].patient_id] = &ft.test[t][i];
    AttackTarget target;
    target.kind = targets[t];
    target.avg_train_loss = ft.threshold[t];
    target.predict = [&](const PatientRecord& r) {
      const RecordOutputs& o = *lookup.at(r.patient_id);
      return exact ? ExactSeries(o) : NoisySeries(o, params, accountant, noise, options);
    };
    Rng resample(DeriveSeed(config_.seed, "attack/resample/" + targets[t], index));
    reports[task] = PrivacyLeakage(target, ft.data.train, ft.data.test, config_.resamples, resample);
    reports[task].epsilon = grid[e];
    logs[task].records = accountant.log();
  });

  std::vector<LeakageRow> rows;
  for (size_t t = 0; t < targets.size(); ++t) {
    for (size_t e = 0; e < n_eps; ++e) {
      LeakageReport pooled;
      pooled.epsilon = grid[e];
      for (size_t f = 0; f < n_folds; ++f) {
        const LeakageReport& r = reports[(f * targets.size() + t) * n_eps + e];
        rows.push_back({targets[t], config_.folds[f], r});
        pooled.resample_tpr.insert(pooled.resample_tpr.end(), r.resample_tpr.begin(), r.resample_tpr.end());
        pooled.resample_fpr.insert(pooled.resample_fpr.end(), r.resample_fpr.begin(), r.resample_fpr.end());
        pooled.resample_leakage.insert(pooled.resample_leakage.end(), r.resample_leakage.begin(),
                                       r.resample_leakage.end());
      }
      pooled.tpr = Quantile(pooled.resample_tpr, 0.5);
      pooled.fpr = Quantile(pooled.resample_fpr, 0.5);
      pooled.q25 = Quantile(pooled.resample_leakage, 0.25);
      pooled.median = Quantile(pooled.resample_leakage, 0.5);
      pooled.q75 = Quantile(pooled.resample_leakage, 0.75);
      pooled.leakage = pooled.median;
      rows.push_back({targets[t], -1, std::move(pooled)});
    }
  }
  WriteLeakageCsv(dir / "leakage.csv", rows);
  WriteLeakageFoldsCsv(dir / "leakage_folds.csv", rows);

  if (config_.plots) {
    std::vector<PlotSeries> series;
    for (const std::string& kind : targets) {
      PlotSeries s{kind, {}, {}, {}, {}};
      for (const LeakageRow& r : rows) {
        if (r.fold != -1 || r.target_kind != kind || !std::isfinite(r.report.epsilon)) continue;
        s.x.push_back(r.report.epsilon);
        s.y.push_back(r.report.median);
        s.y_low.push_back(r.report.q25);
        s.y_high.push_back(r.report.q75);
      }
      series.push_back(std::move(s));
    }
    WriteSvgPlot(dir / "leakage.svg", {"Privacy leakage", "epsilon", "TPR - FPR", true, -0.2, 1.0}, series);
  }
  if (config_.query_log) WriteQueryLog(dir / "query_log.csv", logs);
}

void Pipeline::Run() {
  Evaluate();
  DpSweep();
  Attack();
}

}  // namespace dpens
