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

#ifndef DPENS_COHORT_H_
#define DPENS_COHORT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpens {

// Timelines are discretized into 30-minute steps.
inline constexpr double kStepMinutes = 30.0;
inline constexpr int kMaxLabel = 4;        // 0 = neither SIRS nor sepsis ... 4 = septic shock
inline constexpr int kFirstSepsisLabel = 2;

// ---------------------------------------------------------------------------
// Feature catalog
// ---------------------------------------------------------------------------

struct FeatureInfo {
  int id = 0;
  std::string name;
  double default_value = 0.0;
};

// Feature ids are indices into the catalog: a catalog of F features uses the
// ids 0..F-1, each exactly once.
class FeatureCatalog {
 public:
  FeatureCatalog() = default;
  explicit FeatureCatalog(std::vector<FeatureInfo> features);

  // Reads `feature_id,name,default_value`. An empty default falls back to 0.
  static FeatureCatalog Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  size_t size() const { return features_.size(); }
  bool Contains(int id) const { return id >= 0 && static_cast<size_t>(id) < features_.size(); }
  const FeatureInfo& at(int id) const;
  std::vector<double> Defaults() const;
  const std::vector<FeatureInfo>& features() const { return features_; }

 private:
  std::vector<FeatureInfo> features_;
};

// ---------------------------------------------------------------------------
// Raw and preprocessed patient data
// ---------------------------------------------------------------------------

struct Event {
  double timestamp_min = 0.0;
  int feature_id = 0;
  double value = 0.0;
};

struct LabelWindow {
  double start_min = 0.0;
  double end_min = 0.0;
  int label = 0;
};

struct RawTimeline {
  std::string patient_id;
  std::vector<Event> events;  // sorted by timestamp
  double admission_len_min = 0.0;
  std::vector<LabelWindow> label_windows;  // sorted, non-overlapping
};

struct PatientRecord {
  std::string patient_id;
  Eigen::MatrixXd grid;     // steps x features
  std::vector<int> labels;  // one expert label per step
  bool is_sepsis = false;
  std::optional<int> onset_step;
  std::optional<double> onset_min;
  double stay_hours = 0.0;

  int steps() const { return static_cast<int>(grid.rows()); }
  int features() const { return static_cast<int>(grid.cols()); }
};

// Reads the timeline CSV (`patient_id,timestamp_min,feature_id,value`) and the
// label CSV (`patient_id,window_start_min,window_end_min,label`). Patients are
// returned ordered by id; the admission length is the latest event or window
// end seen for the patient.
std::vector<RawTimeline> IngestCsv(const std::filesystem::path& timelines,
                                   const std::filesystem::path& labels,
                                   const FeatureCatalog& catalog);

void WriteTimelinesCsv(const std::filesystem::path& path, std::span<const RawTimeline> cohort);
void WriteLabelsCsv(const std::filesystem::path& path, std::span<const RawTimeline> cohort);

int StepCount(double admission_len_min);

// Places each observation into its 30-minute step (later observations within
// a step win). Cells without an observation are NaN.
Eigen::MatrixXd BinEvents(const RawTimeline& raw, int n_features);

// Replaces every NaN cell by the latest non-NaN value above it in the same
// column, or by the feature default when nothing has been observed yet.
Eigen::MatrixXd CarryForwardFill(const Eigen::MatrixXd& binned, std::span<const double> defaults);
Eigen::MatrixXd CarryForwardFill(const RawTimeline& raw, std::span<const double> defaults);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Pooled population mean/sd over every step of every record.
FeatureStats ComputeFeatureStats(std::span<const PatientRecord> records);

// z = (x - mean) / sd. A zero (or non-finite) sd is replaced by 1 with a
// warning.
Eigen::MatrixXd Standardize(const Eigen::MatrixXd& series, const FeatureStats& stats);
void StandardizeRecords(std::span<PatientRecord> records, const FeatureStats& stats);

// Assumed onset time for a labeling window: its center.
double ResolveOnset(const LabelWindow& window);

// Carry-forward fill, per-step labels and onset resolution. The grid is left
// in raw units; standardization happens per fold.
PatientRecord BuildRecord(const RawTimeline& raw, const FeatureCatalog& catalog);

inline constexpr double kOnAdmissionHours = 48.0;
inline constexpr double kMinStayHours = 16.0;

// Drops on-admission sepsis cases (onset <= 48h) and stays shorter than 16h.
std::vector<PatientRecord> FilterCohort(std::vector<PatientRecord> records);

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

enum class Partition : int { kA = 0, kB = 1, kC = 2, kD = 3 };

char PartitionName(Partition p);
Partition ParsePartition(std::string_view name);

struct Fold {
  int index = 0;
  std::array<Partition, 2> train;
  Partition validation;
  Partition test;
};

// Fold k trains on partitions (k, k+1), validates on k+2 and tests on k+3
// (mod 4): A+B/C/D, B+C/D/A, C+D/A/B, D+A/B/C.
Fold FoldLayout(int index);

struct PartitionAssignment {
  std::map<std::string, Partition> by_patient;

  std::array<size_t, 4> Sizes() const;
  std::optional<Partition> Find(const std::string& patient_id) const;
};

// Sorts non-sepsis patients by stay and sepsis patients by onset (patient id
// breaks ties), then deals each consecutive group of four to A..D in a
// seed-dependent order. A trailing group of fewer than four goes round-robin
// to the currently smallest partitions.
PartitionAssignment AssignPartitions(std::span<const PatientRecord> records, uint64_t seed);

void WritePartitionsCsv(const std::filesystem::path& path, const PartitionAssignment& assignment);
PartitionAssignment ReadPartitionsCsv(const std::filesystem::path& path);

struct FoldData {
  Fold layout;
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> validation;
  std::vector<PatientRecord> test;
  FeatureStats stats;  // computed on `train` before standardization
};

// Splits filtered records by fold and z-scores all three sets with statistics
// from the training partitions.
FoldData MakeFold(std::span<const PatientRecord> records, const PartitionAssignment& assignment,
                  int fold_index);

// ---------------------------------------------------------------------------
// Synthetic cohort
// ---------------------------------------------------------------------------

struct CohortSpec {
  int n_sepsis = 296;
  int n_nonsepsis = 979;
  int n_features = 43;
  int n_subgroups = 4;             // patient groups with distinct latent dynamics
  double stay_median_h = 56.0;     // non-sepsis length of stay (log-normal)
  double stay_log_sd = 0.6;
  double min_stay_h = 16.5;
  double max_stay_h = 480.0;
  double onset_median_h = 160.0;   // sepsis onset (log-normal, shifted)
  double onset_log_sd = 0.6;
  double min_onset_h = 52.0;
  double post_onset_min_h = 12.0;  // stay after onset, uniform in [min, max]
  double post_onset_max_h = 72.0;
  double noise = 0.6;              // per-observation measurement noise (z units)
  double patient_offset = 0.5;     // per-patient baseline shift (z units)
  double heterogeneity = 1.0;      // spread of subgroup-specific loadings
  double admission_clock_h = -1;   // clock time of admission; < 0 draws uniformly

  void Validate() const;
};

// The default catalog for synthetic cohorts: one entry per feature with the
// physiological normal value as default.
FeatureCatalog SynthCatalog(const CohortSpec& spec);

std::vector<RawTimeline> SynthesizeCohort(const CohortSpec& spec, uint64_t seed);

}  // namespace dpens

#endif  // DPENS_COHORT_H_
