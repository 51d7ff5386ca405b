#include "survsel/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "survsel/csv.hpp"
#include "survsel/rng.hpp"

namespace survsel {

CIndexResult c_index(const Eigen::RowVectorXd& cif_at_horizon, const Eigen::VectorXd& times,
                     const Eigen::VectorXi& events, int event, double horizon) {
  const Eigen::Index n = times.size();
  if (cif_at_horizon.size() != n || events.size() != n)
    throw DataError("c_index inputs differ in length");
  CIndexResult out;
  out.event = event;
  out.horizon = horizon;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (events[i] != event || !(times[i] < horizon)) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      ++out.comparable_pairs;
      if (cif_at_horizon[i] > cif_at_horizon[j]) out.concordant_weight += 1.0;
      else if (cif_at_horizon[i] == cif_at_horizon[j]) out.concordant_weight += 0.5;
    }
  }
  if (out.comparable_pairs > 0) {
    out.defined = true;
    out.value = out.concordant_weight / static_cast<double>(out.comparable_pairs);
  }
  return out;
}

EvaluationGrid evaluate_probabilities(const Eigen::MatrixXd& prob, const NetworkConfig& config,
                                      const SurvivalDataset& d,
                                      const std::vector<double>& horizons) {
  if (prob.cols() != d.num_records())
    throw DataError("probability columns do not match record count");
  EvaluationGrid grid;
  grid.horizons = horizons;
  grid.cells.resize(static_cast<std::size_t>(config.num_events));
  double sum = 0.0;
  for (int k = 1; k <= config.num_events; ++k) {
    for (double h : horizons) {
      bool clamped = false;
      const int t_bin = map_horizon_to_bin(h, config.bin_width, config.num_bins, &clamped);
      if (clamped) ++grid.clamped_horizons;
      const Eigen::RowVectorXd f = cif(prob, config.num_bins, k - 1, t_bin);
      CIndexResult cell = c_index(f, d.times, d.events, k, h);
      if (cell.defined) {
        sum += cell.value;
        ++grid.defined_cells;
      }
      grid.cells[static_cast<std::size_t>(k - 1)].push_back(std::move(cell));
    }
  }
  if (grid.defined_cells > 0) grid.mean = sum / grid.defined_cells;
  return grid;
}

EvaluationGrid evaluate(const Parameters& params, const NetworkConfig& config,
                        const SurvivalDataset& d, const std::vector<double>& horizons) {
  const Eigen::MatrixXd prob = forward(params, config, d.x);
  return evaluate_probabilities(prob, config, d, horizons);
}

ImportanceReport permutation_importance_with(
    const Parameters& params, const NetworkConfig& config, const SurvivalDataset& d,
    const std::vector<double>& horizons,
    const std::vector<std::vector<std::vector<std::size_t>>>& perms_per_feature) {
  if (static_cast<Eigen::Index>(perms_per_feature.size()) != d.num_features())
    throw DataError("permutation list does not cover every feature");

  const EvaluationGrid baseline = evaluate(params, config, d, horizons);
  ImportanceReport report;
  report.importance = Eigen::MatrixXd::Zero(config.num_events, d.num_features());
  report.permutations = perms_per_feature.empty()
                            ? 0
                            : static_cast<int>(perms_per_feature.front().size());

  for (int k = 1; k <= config.num_events; ++k)
    for (std::size_t h = 0; h < horizons.size(); ++h)
      if (!baseline.cell(k, h).defined)
        report.warnings.push_back("event " + std::to_string(k) + " horizon " +
                                  format_double(horizons[h]) +
                                  " has no comparable pairs; excluded from importance");

  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    const auto& perms = perms_per_feature[static_cast<std::size_t>(f)];
    for (const auto& perm : perms) {
      SurvivalDataset permuted = d;
      for (Eigen::Index i = 0; i < d.num_records(); ++i)
        permuted.x(i, f) = d.x(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), f);
      const EvaluationGrid g = evaluate(params, config, permuted, horizons);
      for (int k = 1; k <= config.num_events; ++k) {
        double sum = 0.0;
        int defined = 0;
        for (std::size_t h = 0; h < horizons.size(); ++h) {
          // comparable pairs depend only on times and events, so defined
          // cells match between baseline and permuted grids
          if (!baseline.cell(k, h).defined) continue;
          sum += baseline.cell(k, h).value - g.cell(k, h).value;
          ++defined;
        }
        if (defined > 0)
          report.importance(k - 1, f) += sum / static_cast<double>(defined);
      }
    }
    if (!perms.empty())
      report.importance.col(f) /= static_cast<double>(perms.size());
  }
  return report;
}

ImportanceReport permutation_importance(const Parameters& params, const NetworkConfig& config,
                                        const SurvivalDataset& d,
                                        const std::vector<double>& horizons, int permutations,
                                        std::uint64_t seed) {
  if (permutations < 1) throw DataError("permutation count must be at least 1");
  std::vector<std::vector<std::vector<std::size_t>>> perms(
      static_cast<std::size_t>(d.num_features()));
  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    for (int r = 0; r < permutations; ++r) {
      Rng rng(derive_seed(seed, "perm-importance", static_cast<std::uint64_t>(f),
                          static_cast<std::uint64_t>(r)));
      perms[static_cast<std::size_t>(f)].push_back(
          rng.permutation(static_cast<std::size_t>(d.num_records())));
    }
  }
  return permutation_importance_with(params, config, d, horizons, perms);
}

FeatureSelection hybrid_select(const Parameters& params, const NetworkConfig& config,
                               const SurvivalDataset& validation, const std::vector<int>& m,
                               int permutations, const std::vector<double>& horizons,
                               std::uint64_t seed, ImportanceReport* report_out) {
  if (static_cast<int>(m.size()) != config.num_events)
    throw DataError("hybrid selection needs one size per event");
  const ImportanceReport report =
      permutation_importance(params, config, validation, horizons, permutations, seed);
  std::vector<std::vector<FeatureScore>> rankings(static_cast<std::size_t>(config.num_events));
  for (int k = 0; k < config.num_events; ++k) {
    for (Eigen::Index f = 0; f < validation.num_features(); ++f) {
      FeatureScore fs;
      fs.feature = static_cast<int>(f);
      fs.averaged = report.importance(k, f);
      rankings[static_cast<std::size_t>(k)].push_back(std::move(fs));
    }
  }
  if (report_out) *report_out = report;
  return select_features(rankings, m);
}

void write_importance_report(const ImportanceReport& report,
                             const std::vector<FeatureMeta>& features, const std::string& path) {
  CsvTable table;
  table.header = {"feature"};
  for (Eigen::Index k = 0; k < report.importance.rows(); ++k)
    table.header.push_back("importance_event" + std::to_string(k + 1));
  for (Eigen::Index f = 0; f < report.importance.cols(); ++f) {
    std::vector<std::string> row;
    row.push_back(features[static_cast<std::size_t>(f)].name);
    for (Eigen::Index k = 0; k < report.importance.rows(); ++k)
      row.push_back(format_double(report.importance(k, f)));
    table.rows.push_back(std::move(row));
  }
  write_csv(table, path);
}

}  // namespace survsel
