#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survsel/dataset.hpp"
#include "survsel/evaluation.hpp"
#include "survsel/filters.hpp"
#include "survsel/network.hpp"
#include "survsel/training.hpp"

namespace survsel {

// CLI variant names: plain, filter-anova, filter-svm, filter-relieff,
// sparse, hybrid.
struct VariantSpec {
  std::string name = "plain";
  Variant network = Variant::plain;
  std::optional<FilterMethod> filter;  // filter-* variants
  bool hybrid = false;
};

VariantSpec parse_variant(const std::string& name);

// One JSON file that determines every random draw of an experiment.
// Sub-seeds are derived from the master seed and a purpose tag, never from
// a global generator.
struct ExperimentManifest {
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  VariantSpec variant;
  std::vector<double> horizons{12.0, 36.0, 60.0, 120.0};
  int folds = 5;
  double validation_fraction = 0.2;

  bool use_toy = true;
  ToySpec toy;
  std::string prepared_dir;

  int synth_count = 0;

  bool search_enabled = true;
  int stage1_iterations = 20;  // beta/sigma stage; 0 folds it into stage 2
  int stage2_iterations = 50;
  std::optional<Hyperparams> fixed;  // set to skip the search entirely

  TrainConfig train;
  SearchSpace space;
  RankOptions rank;                   // method filled from the variant
  int importance_permutations = 10;   // hybrid variant
};

ExperimentManifest load_manifest(const std::string& path);
ExperimentManifest manifest_from_json_text(const std::string& text);

struct FoldOutcome {
  int fold = 0;
  Hyperparams hp;
  EvaluationGrid test_grid;
  double validation_metric = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct SummaryCell {
  int event = 0;
  double horizon = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // sample SD over folds with a defined cell
  int folds_defined = 0;
};

struct ExperimentResult {
  std::vector<FoldOutcome> folds;
  Hyperparams best_hp;
  std::vector<TrialResult> stage1_log;
  std::vector<TrialResult> stage2_log;
  std::vector<SummaryCell> summary;
  std::vector<std::string> warnings;
  int num_events = 0;

  double summary_mean(int event) const;  // over that event's defined cells
};

// Full protocol: preprocessing, fold 0 search, per-fold final training,
// test-grid aggregation, and CSV/JSON outputs under manifest.output_dir.
ExperimentResult run_experiment(const ExperimentManifest& manifest);

struct SearchOutcome {
  Hyperparams best;
  std::vector<TrialResult> stage1_log;
  std::vector<TrialResult> stage2_log;
};

// Runs only the fold-0 staged search and writes search_log.csv plus
// best_hyperparams.json under manifest.output_dir.
SearchOutcome run_search(const ExperimentManifest& manifest);

struct DegradationPoint {
  std::string variant;
  int synth_count = 0;
  int event = 0;
  double mean = 0.0;
  double sd = 0.0;
};

// Reruns the experiment for every (variant, synthetic-feature count) pair
// and emits a plot-ready curve CSV.
std::vector<DegradationPoint> degradation_study(const ExperimentManifest& base,
                                                const std::vector<int>& counts,
                                                const std::vector<std::string>& variants);

}  // namespace survsel
