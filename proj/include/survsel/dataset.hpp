#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survsel/types.hpp"

namespace survsel {

/// Column roles for CSV ingestion, loaded from a JSON schema file of the form
///   {"columns": {"age": "numeric", "dre": "categorical", ...,
///                "time": "time", "event": "event"},
///    "num_events": 2}
/// num_events is optional; when absent K is inferred as the maximum observed
/// event label.
struct ColumnSchema {
  struct Column {
    std::string name;
    enum class Role { numeric, binary, categorical, time, event } role;
  };
  std::vector<Column> columns;
  int num_events = -1;  // -1: infer from data
};

ColumnSchema load_schema(const std::string& path);

/// Parses a CSV into a raw dataset: no imputation, no encoding. Missing cells
/// (empty strings) become NaN; categorical levels are collected, sorted, and
/// stored as level indices.
SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema);

/// Fills missing cells: column mean for numeric features, column mode for
/// binary/categorical (ties broken by the lowest value / lexicographically
/// first level).
SurvivalDataset impute(const SurvivalDataset& d);

/// Expands each categorical feature with C levels into C binary columns.
SurvivalDataset one_hot_encode(const SurvivalDataset& d);

struct NormalizeResult {
  SurvivalDataset data;
  NormalizationParams params;
};

/// Standardizes every non-constant column to mean 0, variance 1 (population
/// variance). Constant columns are centered to 0 and flagged.
NormalizeResult normalize(const SurvivalDataset& d);

/// Applies previously computed statistics (training-fold statistics applied
/// to a test fold; never recomputed here).
SurvivalDataset apply_normalization(const SurvivalDataset& d, const NormalizationParams& p);

/// Appends n_synth binary noise columns: p_j ~ Unif[0,1] per column, then each
/// record's value ~ Bernoulli(p_j), independent of everything else.
SurvivalDataset augment_synthetic(const SurvivalDataset& d, int n_synth, std::uint64_t seed);

SplitPlan kfold_split(const SurvivalDataset& d, int folds, double validation_fraction,
                      std::uint64_t seed);

/// Synthetic competing-risks generator with known ground truth, used as the
/// acceptance-test oracle. Event times are drawn from per-event discrete-time
/// hazards h_k(x) = sigmoid(alpha_k + c_k . x_relevant), constant across
/// monthly bins, with the final grid bin absorbing the tail mass. Noise
/// features are Bernoulli(p_j) with p_j ~ Unif[0,1], independent of outcomes.
struct ToySpec {
  int n_records = 1000;
  int n_relevant = 2;
  int n_noise = 0;
  int num_events = 1;
  double censoring_rate = 0.0;
  std::uint64_t seed = 0;
  int grid_bins = 121;  // monthly bins 0..grid_bins-1
};

struct ToyGroundTruth {
  std::vector<int> relevant;        // indices of the signal features
  Eigen::MatrixXd coefficients;     // K x n_relevant, all positive
  Eigen::VectorXd baseline_logit;   // K
  std::vector<Eigen::MatrixXd> true_cif;  // per event: n_records x grid_bins
  int grid_bins = 0;
  double bin_width = 1.0;
};

struct ToyDataset {
  SurvivalDataset data;
  ToyGroundTruth truth;
};

ToyDataset generate_toy_dataset(const ToySpec& spec);

/// On-disk form of a prepared dataset: data.csv plus meta.json (feature
/// metadata, K, preprocessing flags, normalization parameters if any).
void save_prepared(const SurvivalDataset& d, const NormalizationParams* params,
                   const std::string& dir);

struct PreparedData {
  SurvivalDataset data;
  bool has_params = false;
  NormalizationParams params;
};

PreparedData load_prepared(const std::string& dir);

}  // namespace survsel
