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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dpens/cohort.h"
#include "dpens/error.h"
#include "dpens/random.h"

namespace dpens {
namespace {

struct FeatureProfile {
  const char* name;
  double normal;       // default value in natural units
  double scale;        // one z unit in natural units
  double interval_min; // typical sampling interval; 0 = static, recorded once
};

// Catalog of the 43 ICU features. Normal values and sampling intervals are
// rough clinical ballparks; they only shape the synthetic timelines.
constexpr FeatureProfile kProfiles[] = {
    {"age", 65, 15, 0},
    {"heart_rate", 85, 15, 60},
    {"lactate", 1.2, 0.8, 240},
    {"creatinine", 1.0, 0.5, 720},
    {"bilirubin", 0.8, 0.6, 720},
    {"sodium", 140, 4, 360},
    {"potassium", 4.2, 0.5, 360},
    {"hemoglobin", 11, 2, 360},
    {"chloride", 104, 4, 360},
    {"svri", 2000, 500, 240},
    {"mean_bp", 80, 12, 60},
    {"arterial_ph", 7.4, 0.06, 240},
    {"leukocytes", 9, 4, 720},
    {"bicarbonate", 24, 3, 240},
    {"base_excess", 0, 3, 240},
    {"lymphocytes", 1.5, 0.7, 1440},
    {"net_balance", 0, 800, 240},
    {"quick_score", 85, 15, 720},
    {"systolic_bp", 125, 18, 60},
    {"temperature", 37.0, 0.7, 120},
    {"diastolic_bp", 60, 10, 60},
    {"thrombocytes", 220, 80, 720},
    {"urine_output", 80, 40, 120},
    {"blood_glucose", 130, 35, 240},
    {"stroke_volume", 70, 15, 240},
    {"horowitz_index", 320, 80, 240},
    {"partial_co2", 40, 6, 240},
    {"respiratory_rate", 18, 5, 60},
    {"calcium_ionized", 1.15, 0.08, 360},
    {"heart_time_volume", 5.5, 1.5, 240},
    {"oxygen_saturation", 96, 2.5, 60},
    {"pancreatic_lipase", 40, 30, 1440},
    {"blood_urea_nitrogen", 18, 9, 720},
    {"procalcitonin", 0.3, 1.0, 1440},
    {"delta_temperature", 0.5, 0.6, 120},
    {"alanine_transaminase", 30, 25, 1440},
    {"bun_creatinine_ratio", 18, 6, 720},
    {"aspartate_transaminase", 35, 30, 1440},
    {"oxygenation_saturation", 97, 2, 60},
    {"c_reactive_protein", 50, 60, 720},
    {"respiratory_minute_volume", 9, 2.5, 120},
    {"fraction_inspired_o2", 0.4, 0.12, 120},
    {"partial_pressure_art_o2", 95, 20, 240},
};
constexpr int kProfileCount = static_cast<int>(sizeof(kProfiles) / sizeof(kProfiles[0]));

FeatureProfile ProfileFor(int f) {
  if (f < kProfileCount) return kProfiles[f];
  // Extra features beyond the standard catalog behave like hourly vitals.
  return FeatureProfile{nullptr, 0.0, 1.0, 60};
}

std::string FeatureName(int f) {
  if (f < kProfileCount) return kProfiles[f].name;
  return "feature_" + std::to_string(f);
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Round(double v, double quantum) { return std::round(v / quantum) * quantum; }

// Per-subgroup latent dynamics shared by all patients of the group.
struct Subgroup {
  std::vector<double> loading;  // feature response to severity (z units)
  double lead_h;                // how long before onset the deterioration starts
  double width_h;               // steepness of the deterioration ramp
  double period_h;              // oscillation period of the non-septic course
};

std::vector<Subgroup> MakeSubgroups(const CohortSpec& spec, Rng& rng) {
  std::vector<double> common(static_cast<size_t>(spec.n_features), 0.0);
  for (double& c : common) {
    if (rng.Uniform01() < 0.6) c = rng.Normal(0.0, 0.6);
  }
  std::vector<Subgroup> groups(static_cast<size_t>(spec.n_subgroups));
  for (Subgroup& g : groups) {
    g.loading = common;
    for (double& l : g.loading) {
      if (rng.Uniform01() < 0.4) l += spec.heterogeneity * rng.Normal(0.0, 0.6);
    }
    g.loading[0] = 0.0;  // age does not respond to severity
    g.lead_h = rng.Uniform(12.0, 30.0);
    g.width_h = rng.Uniform(3.0, 8.0);
    g.period_h = rng.Uniform(24.0, 72.0);
  }
  return groups;
}

double DrawLogNormalAbove(Rng& rng, double floor_h, double median_h, double log_sd, double cap_h) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    double v = floor_h + (median_h - floor_h) * std::exp(log_sd * rng.Normal());
    if (v <= cap_h) return v;
  }
  return cap_h;
}

// Clock-aligned labeling windows: a partial window up to the first 2 p.m.,
// then 24h windows. The day containing a sepsis onset is split into four 6h
// windows so that the first sepsis-positive label has 6h resolution.
std::vector<LabelWindow> MakeWindows(double stay_h, double clock0_h, const std::vector<double>& severity,
                                     std::optional<double> onset_h) {
  auto mean_severity = [&](double a_h, double b_h) {
    int lo = static_cast<int>(std::floor(a_h * 2.0));
    int hi = std::max(lo + 1, static_cast<int>(std::ceil(b_h * 2.0)));
    hi = std::min<int>(hi, static_cast<int>(severity.size()));
    lo = std::min(lo, hi - 1);
    double s = 0;
    for (int t = lo; t < hi; ++t) s += severity[static_cast<size_t>(t)];
    return s / (hi - lo);
  };
  auto label_for = [&](double a_h, double b_h) {
    int l = static_cast<int>(std::lround(mean_severity(a_h, b_h)));
    if (onset_h && b_h > *onset_h) return std::clamp(l, kFirstSepsisLabel, kMaxLabel);
    return std::clamp(l, 0, kFirstSepsisLabel - 1);
  };

  std::vector<double> cuts{0.0};
  double first = std::fmod(14.0 - clock0_h + 48.0, 24.0);
  for (double b = first; b < stay_h; b += 24.0) {
    if (b > 0.0) cuts.push_back(b);
  }
  cuts.push_back(stay_h);

  std::vector<LabelWindow> windows;
  // Bounds are whole minutes; a cut that rounds onto its neighbour is dropped.
  auto push = [&](double a_h, double b_h) {
    const double start = windows.empty() ? 0.0 : windows.back().end_min;
    const double end = std::round(b_h * 60.0);
    if (end > start) windows.push_back({start, end, label_for(a_h, b_h)});
  };
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (onset_h && a <= *onset_h && *onset_h < b) {
      // Split at the clock's 8 p.m. / 2 a.m. / 8 a.m. marks inside this day.
      std::vector<double> sub{a};
      double mark = a + std::fmod(14.0 - std::fmod(clock0_h + a, 24.0) + 48.0, 6.0);
      if (mark <= a) mark += 6.0;
      for (; mark < b; mark += 6.0) sub.push_back(mark);
      sub.push_back(b);
      for (size_t j = 0; j + 1 < sub.size(); ++j) push(sub[j], sub[j + 1]);
    } else {
      push(a, b);
    }
  }
  return windows;
}

}  // namespace

FeatureCatalog SynthCatalog(const CohortSpec& spec) {
  std::vector<FeatureInfo> features;
  for (int f = 0; f < spec.n_features; ++f) {
    features.push_back({f, FeatureName(f), ProfileFor(f).normal});
  }
  return FeatureCatalog(std::move(features));
}

std::vector<RawTimeline> SynthesizeCohort(const CohortSpec& spec, uint64_t seed) {
  spec.Validate();
  Rng cohort_rng(DeriveSeed(seed, "synth/cohort"));
  const std::vector<Subgroup> groups = MakeSubgroups(spec, cohort_rng);

  const int total = spec.n_sepsis + spec.n_nonsepsis;
  std::vector<char> is_sepsis(static_cast<size_t>(total), 0);
  std::fill(is_sepsis.begin(), is_sepsis.begin() + spec.n_sepsis, 1);
  cohort_rng.Shuffle(std::span<char>(is_sepsis));

  std::vector<RawTimeline> cohort;
  cohort.reserve(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    Rng rng(DeriveSeed(seed, "synth/patient", static_cast<uint64_t>(i)));
    const Subgroup& g = groups[rng.UniformInt(groups.size())];
    const bool sepsis = is_sepsis[static_cast<size_t>(i)] != 0;

    double stay_h, onset_h = 0;
    if (sepsis) {
      const double room = spec.max_stay_h - spec.post_onset_max_h;
      onset_h = DrawLogNormalAbove(rng, spec.min_onset_h, std::max(spec.onset_median_h, spec.min_onset_h + 1),
                                   spec.onset_log_sd, std::max(room, spec.min_onset_h + 1));
      stay_h = onset_h + rng.Uniform(spec.post_onset_min_h, spec.post_onset_max_h);
    } else {
      stay_h = DrawLogNormalAbove(rng, spec.min_stay_h, std::max(spec.stay_median_h, spec.min_stay_h + 1),
                                  spec.stay_log_sd, spec.max_stay_h);
    }
    stay_h = std::round(stay_h * 60.0) / 60.0;
    const double clock0 = spec.admission_clock_h >= 0 ? spec.admission_clock_h : rng.Uniform(0.0, 24.0);

    // Latent severity on a half-hour grid.
    const int n_half = static_cast<int>(std::ceil(stay_h * 2.0)) + 1;
    std::vector<double> severity(static_cast<size_t>(n_half));
    const double base = sepsis ? rng.Uniform(0.1, 0.9) : rng.Uniform(0.0, 1.0);
    const double phase = rng.Uniform(0.0, 2.0 * M_PI);
    const double peak = rng.Uniform(2.2, 4.2);
    const double lead_h = g.lead_h * rng.Uniform(0.6, 1.4);
    const double width_h = g.width_h * rng.Uniform(0.6, 1.4);
    for (int t = 0; t < n_half; ++t) {
      const double h = t * 0.5;
      double s = base + 0.35 * std::sin(2.0 * M_PI * h / g.period_h + phase);
      if (sepsis) {
        s += (peak - base) * Sigmoid((h - onset_h + lead_h * 0.5) / width_h);
      } else {
        s = std::clamp(s, 0.0, 1.45);
      }
      severity[static_cast<size_t>(t)] = std::max(0.0, s);
    }

    RawTimeline raw;
    char id[32];
    std::snprintf(id, sizeof(id), "p%05d", i);
    raw.patient_id = id;
    raw.admission_len_min = stay_h * 60.0;
    raw.label_windows = MakeWindows(stay_h, clock0, severity,
                                    sepsis ? std::optional<double>(onset_h) : std::nullopt);

    std::vector<double> offset(static_cast<size_t>(spec.n_features));
    for (double& o : offset) o = rng.Normal(0.0, spec.patient_offset);
    const double stay_min = stay_h * 60.0;
    for (int f = 0; f < spec.n_features; ++f) {
      const FeatureProfile prof = ProfileFor(f);
      if (prof.interval_min <= 0) {
        raw.events.push_back({0.0, f, Round(prof.normal + prof.scale * rng.Normal(), 1e-4)});
        continue;
      }
      double t = std::round(rng.Uniform(0.0, prof.interval_min));
      while (t < stay_min) {
        const double s = severity[std::min<size_t>(static_cast<size_t>(t / 30.0), severity.size() - 1)];
        const double z = g.loading[static_cast<size_t>(f)] * s + offset[static_cast<size_t>(f)] +
                         spec.noise * rng.Normal();
        raw.events.push_back({t, f, Round(prof.normal + prof.scale * z, 1e-4)});
        t += std::round(prof.interval_min * rng.Uniform(0.75, 1.25));
      }
    }
    std::stable_sort(raw.events.begin(), raw.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp_min < b.timestamp_min; });
    cohort.push_back(std::move(raw));
  }
  return cohort;
}

}  // namespace dpens
