#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace survsel {

/// Malformed input data: bad CSV rows, schema violations, contract breaches.
/// Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure during optimization (NaN loss, divergence).
/// Maps to CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { numeric, binary, categorical };
enum class FeatureOrigin { original, one_hot_derived, synthetic };

std::string to_string(FeatureKind k);
std::string to_string(FeatureOrigin o);
FeatureKind feature_kind_from_string(const std::string& s);
FeatureOrigin feature_origin_from_string(const std::string& s);

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  FeatureOrigin origin = FeatureOrigin::original;
  /// For one-hot-derived columns: name of the parent categorical feature.
  std::string parent;
  /// For unencoded categorical columns: sorted level names; the stored value
  /// is the index into this list.
  std::vector<std::string> levels;
};

struct PreprocessingState {
  bool imputed = false;
  bool encoded = false;
  bool normalized = false;
};

/// One subject: covariate vector, time in months, event label.
/// event == 0 encodes right censoring; events 1..K are the competing risks.
struct SurvivalRecord {
  Eigen::VectorXd covariates;
  double time = 0.0;
  int event = 0;
};

/// Column-oriented survival data. Missing cells are NaN until imputation.
struct SurvivalDataset {
  Eigen::MatrixXd x;        // n_records x n_features
  Eigen::VectorXd times;    // months, >= 0
  Eigen::VectorXi events;   // 0 = censored, 1..K
  std::vector<FeatureMeta> features;
  int num_events = 0;  // K
  PreprocessingState state;
  std::vector<std::string> warnings;

  Eigen::Index num_records() const { return x.rows(); }
  Eigen::Index num_features() const { return x.cols(); }

  SurvivalRecord record(Eigen::Index i) const {
    return SurvivalRecord{x.row(i).transpose(), times[i], events[i]};
  }

  int feature_index(const std::string& name) const;

  /// Checks the structural invariants; throws DataError on violation.
  void validate() const;
};

/// Per-column standardization statistics from a training fold. Constant
/// columns are centered only and flagged.
struct NormalizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // 1.0 for constant columns
  std::vector<std::uint8_t> is_constant;
};

/// Fold layout plus the fit/validation carve-out inside each training side.
struct SplitPlan {
  std::vector<int> fold_assignments;  // per record, in [0, num_folds)
  int num_folds = 0;
  double validation_fraction = 0.0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;

  struct FitValidation {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validation;
  };
  /// Splits the training side of `fold` into fit and validation subsets,
  /// deterministically from the plan seed. Validation indices come only from
  /// the training side.
  FitValidation fit_validation(int fold) const;
};

/// Rows of `d` selected by `idx`, preserving metadata.
SurvivalDataset subset(const SurvivalDataset& d, const std::vector<std::size_t>& idx);

}  // namespace survsel
