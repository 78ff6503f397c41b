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

#include "dpens/cohort.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dpens/csv.h"
#include "dpens/error.h"
#include "dpens/random.h"

namespace dpens {
namespace {

constexpr std::string_view kTimelineHeader = "patient_id,timestamp_min,feature_id,value";
constexpr std::string_view kLabelHeader = "patient_id,window_start_min,window_end_min,label";
constexpr std::string_view kCatalogHeader = "feature_id,name,default_value";
constexpr std::string_view kPartitionHeader = "patient_id,partition";

std::string LineRef(const std::filesystem::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

FeatureCatalog::FeatureCatalog(std::vector<FeatureInfo> features) {
  std::sort(features.begin(), features.end(),
            [](const FeatureInfo& a, const FeatureInfo& b) { return a.id < b.id; });
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i].id != static_cast<int>(i)) {
      throw Error(ErrorCode::kCatalog, "feature ids must be 0.." +
                                           std::to_string(features.size() - 1) + " without gaps");
    }
  }
  features_ = std::move(features);
}

FeatureCatalog FeatureCatalog::Load(const std::filesystem::path& path) {
  std::vector<FeatureInfo> features;
  for (const CsvRow& row : ReadCsv(path, kCatalogHeader)) {
    FeatureInfo info;
    info.id = static_cast<int>(ParseInt(row.fields[0], row.line));
    info.name = row.fields[1];
    info.default_value = row.fields[2].empty() ? 0.0 : ParseDouble(row.fields[2], row.line);
    features.push_back(std::move(info));
  }
  return FeatureCatalog(std::move(features));
}

void FeatureCatalog::Save(const std::filesystem::path& path) const {
  CsvWriter out(path, kCatalogHeader);
  for (const FeatureInfo& f : features_) {
    out << f.id << f.name << f.default_value;
    out.EndRow();
  }
}

const FeatureInfo& FeatureCatalog::at(int id) const {
  if (!Contains(id)) throw Error(ErrorCode::kCatalog, "unknown feature_id " + std::to_string(id));
  return features_[static_cast<size_t>(id)];
}

std::vector<double> FeatureCatalog::Defaults() const {
  std::vector<double> d;
  d.reserve(features_.size());
  for (const FeatureInfo& f : features_) d.push_back(f.default_value);
  return d;
}

std::vector<RawTimeline> IngestCsv(const std::filesystem::path& timelines,
                                   const std::filesystem::path& labels,
                                   const FeatureCatalog& catalog) {
  std::map<std::string, RawTimeline> by_id;
  auto get = [&](const std::string& id) -> RawTimeline& {
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) it->second.patient_id = id;
    return it->second;
  };

  for (const CsvRow& row : ReadCsv(timelines, kTimelineHeader)) {
    if (row.fields[0].empty()) {
      throw Error(ErrorCode::kParse, LineRef(timelines, row.line) + ": empty patient_id");
    }
    Event e;
    e.timestamp_min = ParseDouble(row.fields[1], row.line);
    e.feature_id = static_cast<int>(ParseInt(row.fields[2], row.line));
    e.value = ParseDouble(row.fields[3], row.line);
    if (!std::isfinite(e.timestamp_min) || e.timestamp_min < 0) {
      throw Error(ErrorCode::kParse, LineRef(timelines, row.line) + ": negative timestamp");
    }
    if (!std::isfinite(e.value)) {
      throw Error(ErrorCode::kParse, LineRef(timelines, row.line) + ": non-finite value");
    }
    if (!catalog.Contains(e.feature_id)) {
      throw Error(ErrorCode::kCatalog, LineRef(timelines, row.line) + ": unknown feature_id " +
                                           std::to_string(e.feature_id));
    }
    get(row.fields[0]).events.push_back(e);
  }

  for (const CsvRow& row : ReadCsv(labels, kLabelHeader)) {
    if (row.fields[0].empty()) {
      throw Error(ErrorCode::kParse, LineRef(labels, row.line) + ": empty patient_id");
    }
    LabelWindow w;
    w.start_min = ParseDouble(row.fields[1], row.line);
    w.end_min = ParseDouble(row.fields[2], row.line);
    long long label = ParseInt(row.fields[3], row.line);
    if (label < 0 || label > kMaxLabel) {
      throw Error(ErrorCode::kParse, LineRef(labels, row.line) + ": label " +
                                         std::to_string(label) + " outside 0..4");
    }
    w.label = static_cast<int>(label);
    if (!(w.start_min >= 0) || !(w.end_min > w.start_min) || !std::isfinite(w.end_min)) {
      throw Error(ErrorCode::kParse, LineRef(labels, row.line) + ": invalid window bounds");
    }
    get(row.fields[0]).label_windows.push_back(w);
  }

  std::vector<RawTimeline> cohort;
  cohort.reserve(by_id.size());
  for (auto& [id, raw] : by_id) {
    std::stable_sort(raw.events.begin(), raw.events.end(), [](const Event& a, const Event& b) {
      return a.timestamp_min < b.timestamp_min;
    });
    std::sort(raw.label_windows.begin(), raw.label_windows.end(),
              [](const LabelWindow& a, const LabelWindow& b) { return a.start_min < b.start_min; });
    for (size_t i = 1; i < raw.label_windows.size(); ++i) {
      if (raw.label_windows[i].start_min < raw.label_windows[i - 1].end_min) {
        throw Error(ErrorCode::kParse, labels.string() + ": overlapping label windows for patient " + id);
      }
    }
    double len = 0.0;
    if (!raw.events.empty()) len = raw.events.back().timestamp_min;
    if (!raw.label_windows.empty()) len = std::max(len, raw.label_windows.back().end_min);
    raw.admission_len_min = len;
    cohort.push_back(std::move(raw));
  }
  return cohort;
}

void WriteTimelinesCsv(const std::filesystem::path& path, std::span<const RawTimeline> cohort) {
  CsvWriter out(path, kTimelineHeader);
  for (const RawTimeline& raw : cohort) {
    for (const Event& e : raw.events) {
      out << raw.patient_id << e.timestamp_min << e.feature_id << e.value;
      out.EndRow();
    }
  }
}

void WriteLabelsCsv(const std::filesystem::path& path, std::span<const RawTimeline> cohort) {
  CsvWriter out(path, kLabelHeader);
  for (const RawTimeline& raw : cohort) {
    for (const LabelWindow& w : raw.label_windows) {
      out << raw.patient_id << w.start_min << w.end_min << w.label;
      out.EndRow();
    }
  }
}

int StepCount(double admission_len_min) {
  return std::max(1, static_cast<int>(std::floor(admission_len_min / kStepMinutes)));
}

Eigen::MatrixXd BinEvents(const RawTimeline& raw, int n_features) {
  const int steps = StepCount(raw.admission_len_min);
  Eigen::MatrixXd grid =
      Eigen::MatrixXd::Constant(steps, n_features, std::numeric_limits<double>::quiet_NaN());
  for (const Event& e : raw.events) {
    if (e.feature_id < 0 || e.feature_id >= n_features) {
      throw Error(ErrorCode::kCatalog, "unknown feature_id " + std::to_string(e.feature_id));
    }
    int step = std::min(steps - 1, static_cast<int>(std::floor(e.timestamp_min / kStepMinutes)));
    grid(step, e.feature_id) = e.value;
  }
  return grid;
}

Eigen::MatrixXd CarryForwardFill(const Eigen::MatrixXd& binned, std::span<const double> defaults) {
  if (defaults.size() != static_cast<size_t>(binned.cols())) {
    throw Error(ErrorCode::kShape, "defaults must cover every feature");
  }
  Eigen::MatrixXd out = binned;
  for (Eigen::Index f = 0; f < out.cols(); ++f) {
    double last = defaults[static_cast<size_t>(f)];
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
      if (std::isnan(out(t, f))) {
        out(t, f) = last;
      } else {
        last = out(t, f);
      }
    }
  }
  return out;
}

Eigen::MatrixXd CarryForwardFill(const RawTimeline& raw, std::span<const double> defaults) {
  return CarryForwardFill(BinEvents(raw, static_cast<int>(defaults.size())), defaults);
}

FeatureStats ComputeFeatureStats(std::span<const PatientRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmpty, "no records for feature statistics");
  const Eigen::Index f = records.front().grid.cols();
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(f);
  double n = 0;
  for (const PatientRecord& r : records) {
    if (r.grid.cols() != f) throw Error(ErrorCode::kShape, "records differ in feature count");
    sum += r.grid.colwise().sum().transpose().array();
    n += static_cast<double>(r.grid.rows());
  }
  Eigen::ArrayXd mean = sum / n;
  Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(f);
  for (const PatientRecord& r : records) {
    sq += (r.grid.array().rowwise() - mean.transpose()).square().colwise().sum().transpose();
  }
  Eigen::ArrayXd sd = (sq / n).sqrt();
  FeatureStats stats;
  stats.mean.assign(mean.data(), mean.data() + f);
  stats.stddev.assign(sd.data(), sd.data() + f);
  return stats;
}

namespace {

std::vector<double> SafeStddev(const FeatureStats& stats) {
  std::vector<double> sd = stats.stddev;
  for (size_t f = 0; f < sd.size(); ++f) {
    if (!(sd[f] > 0.0) || !std::isfinite(sd[f])) {
      LogWarning("feature " + std::to_string(f) + " is constant; using sd = 1");
      sd[f] = 1.0;
    }
  }
  return sd;
}

void ApplyZ(Eigen::MatrixXd& m, const std::vector<double>& mean, const std::vector<double>& sd) {
  if (mean.size() != static_cast<size_t>(m.cols()) || sd.size() != mean.size()) {
    throw Error(ErrorCode::kShape, "feature statistics do not match series width");
  }
  for (Eigen::Index f = 0; f < m.cols(); ++f) {
    m.col(f).array() = (m.col(f).array() - mean[static_cast<size_t>(f)]) / sd[static_cast<size_t>(f)];
  }
}

}  // namespace

Eigen::MatrixXd Standardize(const Eigen::MatrixXd& series, const FeatureStats& stats) {
  Eigen::MatrixXd out = series;
  ApplyZ(out, stats.mean, SafeStddev(stats));
  return out;
}

void StandardizeRecords(std::span<PatientRecord> records, const FeatureStats& stats) {
  const std::vector<double> sd = SafeStddev(stats);
  for (PatientRecord& r : records) ApplyZ(r.grid, stats.mean, sd);
}

double ResolveOnset(const LabelWindow& window) {
  return 0.5 * (window.start_min + window.end_min);
}

PatientRecord BuildRecord(const RawTimeline& raw, const FeatureCatalog& catalog) {
  PatientRecord rec;
  rec.patient_id = raw.patient_id;
  const std::vector<double> defaults = catalog.Defaults();
  rec.grid = CarryForwardFill(raw, defaults);
  rec.stay_hours = raw.admission_len_min / 60.0;

  const int steps = static_cast<int>(rec.grid.rows());
  rec.labels.assign(static_cast<size_t>(steps), 0);
  // Windows are sorted; walk them alongside the step midpoints. Steps not
  // inside any window keep the label of the last window that ended before.
  size_t w = 0;
  int current = 0;
  for (int t = 0; t < steps; ++t) {
    const double mid = (t + 0.5) * kStepMinutes;
    while (w < raw.label_windows.size() && raw.label_windows[w].end_min <= mid) {
      current = raw.label_windows[w].label;
      ++w;
    }
    if (w < raw.label_windows.size() && raw.label_windows[w].start_min <= mid) {
      rec.labels[static_cast<size_t>(t)] = raw.label_windows[w].label;
    } else {
      rec.labels[static_cast<size_t>(t)] = current;
    }
  }

  for (const LabelWindow& window : raw.label_windows) {
    if (window.label >= kFirstSepsisLabel) {
      rec.is_sepsis = true;
      rec.onset_min = ResolveOnset(window);
      rec.onset_step = std::min(steps - 1, static_cast<int>(std::floor(*rec.onset_min / kStepMinutes)));
      break;
    }
  }
  return rec;
}

std::vector<PatientRecord> FilterCohort(std::vector<PatientRecord> records) {
  std::vector<PatientRecord> kept;
  kept.reserve(records.size());
  for (PatientRecord& r : records) {
    if (r.stay_hours < kMinStayHours) continue;
    if (r.is_sepsis && r.onset_min && *r.onset_min <= kOnAdmissionHours * 60.0) continue;
    kept.push_back(std::move(r));
  }
  return kept;
}

char PartitionName(Partition p) { return static_cast<char>('A' + static_cast<int>(p)); }

Partition ParsePartition(std::string_view name) {
  if (name.size() == 1 && name[0] >= 'A' && name[0] <= 'D') {
    return static_cast<Partition>(name[0] - 'A');
  }
  throw Error(ErrorCode::kParse, "unknown partition '" + std::string(name) + "'");
}

Fold FoldLayout(int index) {
  if (index < 0 || index > 3) throw Error(ErrorCode::kInvalidArgument, "fold index must be 0..3");
  auto p = [](int k) { return static_cast<Partition>(k % 4); };
  return Fold{index, {p(index), p(index + 1)}, p(index + 2), p(index + 3)};
}

std::array<size_t, 4> PartitionAssignment::Sizes() const {
  std::array<size_t, 4> sizes{};
  for (const auto& [id, p] : by_patient) ++sizes[static_cast<size_t>(p)];
  return sizes;
}

std::optional<Partition> PartitionAssignment::Find(const std::string& patient_id) const {
  auto it = by_patient.find(patient_id);
  if (it == by_patient.end()) return std::nullopt;
  return it->second;
}

PartitionAssignment AssignPartitions(std::span<const PatientRecord> records, uint64_t seed) {
  std::vector<const PatientRecord*> nonsepsis, sepsis;
  for (const PatientRecord& r : records) (r.is_sepsis ? sepsis : nonsepsis).push_back(&r);

  std::stable_sort(nonsepsis.begin(), nonsepsis.end(), [](const PatientRecord* a, const PatientRecord* b) {
    if (a->stay_hours != b->stay_hours) return a->stay_hours < b->stay_hours;
    return a->patient_id < b->patient_id;
  });
  std::stable_sort(sepsis.begin(), sepsis.end(), [](const PatientRecord* a, const PatientRecord* b) {
    const double oa = a->onset_min.value_or(0.0), ob = b->onset_min.value_or(0.0);
    if (oa != ob) return oa < ob;
    return a->patient_id < b->patient_id;
  });

  PartitionAssignment out;
  std::array<size_t, 4> sizes{};
  Rng rng(seed);
  auto place = [&](const PatientRecord* r, Partition p) {
    if (!out.by_patient.emplace(r->patient_id, p).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate patient_id " + r->patient_id);
    }
    ++sizes[static_cast<size_t>(p)];
  };

  for (const auto* group : {&nonsepsis, &sepsis}) {
    const std::vector<const PatientRecord*>& list = *group;
    const size_t full = list.size() / 4;
    for (size_t g = 0; g < full; ++g) {
      std::array<Partition, 4> order{Partition::kA, Partition::kB, Partition::kC, Partition::kD};
      rng.Shuffle(std::span<Partition>(order));
      for (size_t j = 0; j < 4; ++j) place(list[4 * g + j], order[j]);
    }
    std::array<int, 4> by_size{0, 1, 2, 3};
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](int a, int b) { return sizes[static_cast<size_t>(a)] < sizes[static_cast<size_t>(b)]; });
    for (size_t j = 4 * full; j < list.size(); ++j) {
      place(list[j], static_cast<Partition>(by_size[j - 4 * full]));
    }
  }
  return out;
}

void WritePartitionsCsv(const std::filesystem::path& path, const PartitionAssignment& assignment) {
  CsvWriter out(path, kPartitionHeader);
  for (const auto& [id, p] : assignment.by_patient) {
    out << id << std::string(1, PartitionName(p));
    out.EndRow();
  }
}

PartitionAssignment ReadPartitionsCsv(const std::filesystem::path& path) {
  PartitionAssignment out;
  for (const CsvRow& row : ReadCsv(path, kPartitionHeader)) {
    out.by_patient[row.fields[0]] = ParsePartition(row.fields[1]);
  }
  return out;
}

FoldData MakeFold(std::span<const PatientRecord> records, const PartitionAssignment& assignment,
                  int fold_index) {
  FoldData data;
  data.layout = FoldLayout(fold_index);
  for (const PatientRecord& r : records) {
    auto p = assignment.Find(r.patient_id);
    if (!p) throw Error(ErrorCode::kAlignment, "patient " + r.patient_id + " has no partition");
    if (*p == data.layout.train[0] || *p == data.layout.train[1]) {
      data.train.push_back(r);
    } else if (*p == data.layout.validation) {
      data.validation.push_back(r);
    } else {
      data.test.push_back(r);
    }
  }
  if (data.train.empty()) throw Error(ErrorCode::kEmpty, "fold has no training patients");
  data.stats = ComputeFeatureStats(data.train);
  const std::vector<double> sd = SafeStddev(data.stats);
  for (auto* set : {&data.train, &data.validation, &data.test}) {
    for (PatientRecord& r : *set) ApplyZ(r.grid, data.stats.mean, sd);
  }
  return data;
}

void CohortSpec::Validate() const {
  if (n_sepsis < 0 || n_nonsepsis < 0 || n_sepsis + n_nonsepsis <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "patient counts must be non-negative with a positive total");
  }
  if (n_features <= 0) throw Error(ErrorCode::kInvalidArgument, "n_features must be positive");
  if (n_subgroups <= 0) throw Error(ErrorCode::kInvalidArgument, "n_subgroups must be positive");
  if (!(stay_median_h > 0) || !(onset_median_h > 0) || !(max_stay_h > min_stay_h) ||
      !(post_onset_max_h >= post_onset_min_h) || !(post_onset_min_h > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "cohort durations must be positive and ordered");
  }
  if (noise < 0 || patient_offset < 0 || heterogeneity < 0) {
    throw Error(ErrorCode::kInvalidArgument, "noise levels must be non-negative");
  }
}

}  // namespace dpens
