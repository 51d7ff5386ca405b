#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survsel/types.hpp"

namespace survsel {

/// Binary cause-specific labels at a fixed horizon: label 1 iff the record's
/// event equals `event` and its time is strictly below `horizon`.
struct TimeFixedLabels {
  int event = 1;
  double horizon = 0.0;
  std::vector<std::uint8_t> labels;
  int positives = 0;
  int negatives = 0;

  bool has_both_classes() const { return positives > 0 && negatives > 0; }
};

TimeFixedLabels time_fixed_labels(const SurvivalDataset& d, int event, double horizon);

enum class FilterMethod { anova, svm, relieff };
std::string to_string(FilterMethod m);
FilterMethod filter_method_from_string(const std::string& s);

/// Large finite stand-in for an infinite F statistic (perfect separation),
/// keeping the ranking order total.
inline constexpr double kPerfectSeparationF = 1e308;

struct AnovaScores {
  Eigen::VectorXd f_stat;
  Eigen::VectorXd p_value;
  std::vector<std::uint8_t> constant;  // zero within-and-between variance columns
};

/// One-way ANOVA F statistic per feature between the two label groups.
/// Accumulation happens in value-sorted order, so scores are bit-identical
/// under any permutation of the records.
AnovaScores anova_score(const SurvivalDataset& d, const TimeFixedLabels& labels);

struct SvmOptions {
  // strong enough that rare levels of skewed binary columns, whose z-scores
  // are large, cannot buy weight from a handful of records
  double reg = 1e-2;
  int epochs = 100;
};

/// |weight| per feature from a linear soft-margin SVM trained by Pegasos-style
/// subgradient descent (hinge loss + L2, step size 1/(reg*t)). Requires a
/// normalized dataset; the visit order is a seeded shuffle of a canonical
/// (content-sorted) record order, so scores do not depend on storage order.
Eigen::VectorXd svm_score(const SurvivalDataset& d, const TimeFixedLabels& labels,
                          const SvmOptions& options, std::uint64_t seed);

struct ReliefFOptions {
  int k_neighbors = 10;
  int sample_count = -1;  // -1: min(n, 1000)
};

/// Binary ReliefF: per sampled record, k nearest hits and misses by Euclidean
/// distance over all features; weights move by -diff(hit)/(m*k) and
/// +diff(miss)/(m*k). diff is |a-b|/range for numeric features and the
/// inequality indicator otherwise. Sampling and neighbor ties use the
/// canonical record order, independent of storage order.
Eigen::VectorXd relieff_score(const SurvivalDataset& d, const TimeFixedLabels& labels,
                              const ReliefFOptions& options, std::uint64_t seed,
                              std::vector<std::string>* warnings = nullptr);

/// Scores for one horizon; degenerate marks a single-class horizon that must
/// be excluded from averaging.
struct HorizonScores {
  double horizon = 0.0;
  Eigen::VectorXd scores;
  bool degenerate = false;
};

struct FeatureScore {
  int feature = 0;
  FilterMethod method = FilterMethod::anova;
  std::vector<double> per_horizon;  // NaN where degenerate
  double averaged = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();  // ANOVA only
};

/// Arithmetic mean per feature over non-degenerate horizons. Throws if every
/// horizon is degenerate.
std::vector<FeatureScore> average_over_horizons(const std::vector<HorizonScores>& horizons,
                                                FilterMethod method,
                                                std::vector<std::string>* warnings = nullptr);

/// Per-event selected feature sets plus their intersection. An empty shared
/// set is allowed; the network is then built without a shared sub-network.
struct FeatureSelection {
  std::vector<std::vector<int>> per_event;  // v_k, each sorted ascending
  std::vector<int> shared;                  // v_s, sorted ascending
  std::vector<int> sizes;                   // m_k

  bool shared_absent() const { return shared.empty(); }
};

/// Top-m_k features per event by averaged score (ties to the lower feature
/// index); the shared set is the intersection across events.
FeatureSelection select_features(const std::vector<std::vector<FeatureScore>>& ranking_per_event,
                                 const std::vector<int>& m);

struct RankOptions {
  FilterMethod method = FilterMethod::anova;
  std::vector<double> horizons{12.0, 36.0, 60.0, 120.0};
  SvmOptions svm;
  ReliefFOptions relieff;
};

struct FilterRanking {
  int event = 1;
  std::vector<FeatureScore> scores;  // one per feature, unsorted
  std::vector<std::string> warnings;
};

/// Scores every feature for one event across the configured horizons.
FilterRanking rank_features_for_event(const SurvivalDataset& d, int event,
                                      const RankOptions& options, std::uint64_t seed);

/// Lexicographic record order by (covariates, time, event): the storage-order
/// independent basis for all seeded sampling in this module.
std::vector<std::size_t> canonical_record_order(const SurvivalDataset& d);

/// Writes a ranking report CSV: rank, feature, method, per-horizon scores,
/// averaged score, p-value where applicable.
void write_ranking_report(const FilterRanking& ranking, const std::vector<double>& horizons,
                          const std::vector<FeatureMeta>& features, const std::string& path);

}  // namespace survsel
