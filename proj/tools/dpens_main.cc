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

// dpens: command-line driver for the private ensemble pipeline.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpens/error.h"
#include "dpens/pipeline.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitBudget = 4;

int ExitCodeFor(dpens::ErrorCode code) {
  switch (code) {
    case dpens::ErrorCode::kInvalidArgument:
    case dpens::ErrorCode::kNegativeWeight:
    case dpens::ErrorCode::kSingular:
      return kExitConfig;
    case dpens::ErrorCode::kBudgetExhausted:
      return kExitBudget;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private weighted-averaging ensembles"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out, timelines, labels, catalog, query_log, scheme, regressor;
  uint64_t seed = 0;
  int workers = 0, resamples = 0, n_sepsis = -1, n_nonsepsis = -1;
  int component_lags = 0, full_lags = 0;
  double total_budget = 0, bound = 0, component_ridge = -1, full_ridge = -1, optimal_ridge = -1;
  std::vector<double> epsilons;
  std::vector<int> folds;
  bool force = false, no_plots = false, clip_release = false, macro = false;

  app.add_option("--config", config_path, "JSON run configuration (flags override it)");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory");
  app.add_option("--timelines", timelines, "Timeline CSV (instead of a synthetic cohort)");
  app.add_option("--labels", labels, "Label CSV");
  app.add_option("--catalog", catalog, "Feature catalog CSV");
  app.add_option("--n-sepsis", n_sepsis, "Synthetic sepsis patients");
  app.add_option("--n-nonsepsis", n_nonsepsis, "Synthetic non-sepsis patients");
  app.add_option("--folds", folds, "Folds to run (0..3)");
  app.add_option("--regressor", regressor, "Patient model kind: baseline, ridge, recurrent");
  app.add_option("--component-lags", component_lags, "Lag window of patient models");
  app.add_option("--component-ridge", component_ridge, "Ridge penalty of patient models");
  app.add_option("--full-lags", full_lags, "Lag window of the full model");
  app.add_option("--full-ridge", full_ridge, "Ridge penalty of the full model");
  app.add_option("--scheme", scheme, "Weighting: uniform, optimal, history");
  app.add_option("--optimal-ridge", optimal_ridge, "Ridge added to C for optimal weights");
  app.add_option("--epsilon", epsilons, "Per-query epsilon values (default: 1e-3..1e3 grid)");
  app.add_option("--total-budget", total_budget, "Budget of each simulated deployment");
  app.add_option("--bound", bound, "Output bound B");
  app.add_option("--query-log", query_log, "Write every private query to this CSV");
  app.add_option("--resamples", resamples, "Attack resamples");
  app.add_flag("--clip-release", clip_release, "Clamp released values to [0, B]");
  app.add_flag("--macro-auroc", macro, "Average per-patient AUROCs instead of pooling steps");
  app.add_flag("--no-plots", no_plots, "Skip SVG output");
  app.add_flag("--force", force, "Ignore stage caches");

  const std::vector<std::string> stages = {"synth", "preprocess", "train", "grow",
                                           "evaluate", "dp-sweep", "attack", "run"};
  for (const std::string& s : stages) app.add_subcommand(s, "Run the " + s + " stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw dpens::Error(dpens::ErrorCode::kInvalidArgument, "cannot read " + config_path);
      in >> j;
    }
    dpens::RunConfig config = dpens::RunConfigFromJson(j);
    if (app.count("--seed")) config.seed = seed;
    if (app.count("--workers")) config.workers = workers;
    if (app.count("--out")) config.out = out;
    if (app.count("--timelines")) config.timelines = timelines;
    if (app.count("--labels")) config.labels = labels;
    if (app.count("--catalog")) config.catalog = catalog;
    if (app.count("--n-sepsis")) config.synth.n_sepsis = n_sepsis;
    if (app.count("--n-nonsepsis")) config.synth.n_nonsepsis = n_nonsepsis;
    if (app.count("--folds")) config.folds = folds;
    if (app.count("--regressor")) config.component.kind = dpens::ParseRegressorKind(regressor);
    if (app.count("--component-lags")) config.component.lags = component_lags;
    if (app.count("--component-ridge")) config.component.ridge = component_ridge;
    if (app.count("--full-lags")) config.full.lags = full_lags;
    if (app.count("--full-ridge")) config.full.ridge = full_ridge;
    if (app.count("--scheme")) config.scheme = dpens::ParseWeightScheme(scheme);
    if (app.count("--optimal-ridge")) config.optimal_ridge = optimal_ridge;
    if (app.count("--epsilon")) config.epsilons = epsilons;
    if (app.count("--total-budget")) config.total_budget = total_budget;
    if (app.count("--bound")) config.bound = bound;
    if (app.count("--query-log")) config.query_log = query_log;
    if (app.count("--resamples")) config.resamples = resamples;
    if (clip_release) config.clip_release = true;
    if (macro) config.macro_auroc = true;
    if (no_plots) config.plots = false;
    config.force = force;

    dpens::Pipeline pipeline(config);
    std::filesystem::create_directories(config.out);
    std::ofstream(config.out / "config.json") << dpens::ToJson(pipeline.config()).dump(2) << "\n";

    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "synth") pipeline.Synth();
    if (stage == "preprocess") pipeline.Preprocess();
    if (stage == "train") pipeline.Train();
    if (stage == "grow") pipeline.Grow();
    if (stage == "evaluate") pipeline.Evaluate();
    if (stage == "dp-sweep") pipeline.DpSweep();
    if (stage == "attack") pipeline.Attack();
    if (stage == "run") pipeline.Run();

    if (config.query_log) {
      dpens::MergeQueryLogs({pipeline.StageDir("dp-sweep") / "query_log.csv",
                             pipeline.StageDir("attack") / "query_log.csv"},
                            *config.query_log);
    }
  } catch (const dpens::Error& e) {
    std::cerr << "dpens: error [" << dpens::ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "dpens: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "dpens: error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
