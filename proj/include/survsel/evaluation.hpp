#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survsel/network.hpp"
#include "survsel/types.hpp"

namespace survsel {

// Time-dependent concordance for one event at one horizon. Comparable
// pairs (i, j) need times[i] < times[j], events[i] == k, times[i] < horizon;
// j may be censored or carry any event. A tie in predicted risk earns 0.5.
struct CIndexResult {
  int event = 0;  // 1-based
  double horizon = 0.0;
  double concordant_weight = 0.0;
  long comparable_pairs = 0;
  double value = 0.0;
  bool defined = false;  // false when no pair satisfies the conditions
};

// cif_at_horizon[i] = predicted cumulative incidence for record i, event k,
// at the bin for the horizon.
CIndexResult c_index(const Eigen::RowVectorXd& cif_at_horizon, const Eigen::VectorXd& times,
                     const Eigen::VectorXi& events, int event, double horizon);

struct EvaluationGrid {
  std::vector<double> horizons;
  std::vector<std::vector<CIndexResult>> cells;  // [event-1][horizon]
  double mean = 0.0;  // over defined cells only
  int defined_cells = 0;
  long clamped_horizons = 0;

  const CIndexResult& cell(int event, std::size_t horizon_idx) const {
    return cells[static_cast<std::size_t>(event - 1)][horizon_idx];
  }
};

EvaluationGrid evaluate(const Parameters& params, const NetworkConfig& config,
                        const SurvivalDataset& d, const std::vector<double>& horizons);

// Same grid from precomputed probabilities (columns = records).
EvaluationGrid evaluate_probabilities(const Eigen::MatrixXd& prob, const NetworkConfig& config,
                                      const SurvivalDataset& d,
                                      const std::vector<double>& horizons);

// Mean over permutations and defined horizons of
// (baseline C-index - C-index with feature column permuted), per event.
struct ImportanceReport {
  Eigen::MatrixXd importance;  // num_events x num_features
  int permutations = 0;
  std::vector<std::string> warnings;
};

ImportanceReport permutation_importance(const Parameters& params, const NetworkConfig& config,
                                        const SurvivalDataset& d,
                                        const std::vector<double>& horizons, int permutations,
                                        std::uint64_t seed);

// Importance with caller-supplied permutations (one batch per repetition);
// the seeded entry point above derives its permutations from the seed.
ImportanceReport permutation_importance_with(
    const Parameters& params, const NetworkConfig& config, const SurvivalDataset& d,
    const std::vector<double>& horizons,
    const std::vector<std::vector<std::vector<std::size_t>>>& perms_per_feature);

// Ranks features by permutation importance per event, keeps the top m_k
// (ties to the lower index), and intersects for the shared set.
FeatureSelection hybrid_select(const Parameters& params, const NetworkConfig& config,
                               const SurvivalDataset& validation, const std::vector<int>& m,
                               int permutations, const std::vector<double>& horizons,
                               std::uint64_t seed, ImportanceReport* report = nullptr);

void write_importance_report(const ImportanceReport& report,
                             const std::vector<FeatureMeta>& features, const std::string& path);

}  // namespace survsel
