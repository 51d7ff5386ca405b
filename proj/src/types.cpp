#include "survsel/types.hpp"

#include <algorithm>
#include <cmath>

#include "survsel/rng.hpp"

namespace survsel {

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::binary: return "binary";
    case FeatureKind::categorical: return "categorical";
  }
  return "numeric";
}

std::string to_string(FeatureOrigin o) {
  switch (o) {
    case FeatureOrigin::original: return "original";
    case FeatureOrigin::one_hot_derived: return "one-hot-derived";
    case FeatureOrigin::synthetic: return "synthetic";
  }
  return "original";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "numeric") return FeatureKind::numeric;
  if (s == "binary") return FeatureKind::binary;
  if (s == "categorical") return FeatureKind::categorical;
  throw DataError("unknown feature kind: " + s);
}

FeatureOrigin feature_origin_from_string(const std::string& s) {
  if (s == "original") return FeatureOrigin::original;
  if (s == "one-hot-derived") return FeatureOrigin::one_hot_derived;
  if (s == "synthetic") return FeatureOrigin::synthetic;
  throw DataError("unknown feature origin: " + s);
}

int SurvivalDataset::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return static_cast<int>(i);
  throw DataError("no feature named '" + name + "'");
}

void SurvivalDataset::validate() const {
  if (x.rows() != times.size() || x.rows() != events.size())
    throw DataError("record count mismatch between covariates, times, and events");
  if (static_cast<Eigen::Index>(features.size()) != x.cols())
    throw DataError("feature metadata count does not match covariate columns");
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0))
      throw DataError("negative or NaN time at record " + std::to_string(i));
    if (events[i] < 0 || events[i] > num_events)
      throw DataError("event label " + std::to_string(events[i]) + " out of {0,...," +
                      std::to_string(num_events) + "} at record " + std::to_string(i));
  }
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = i + 1; j < features.size(); ++j)
      if (features[i].name == features[j].name)
        throw DataError("duplicate feature name '" + features[i].name + "'");
}

std::vector<std::size_t> SplitPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignments.size(); ++i)
    if (fold_assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignments.size(); ++i)
    if (fold_assignments[i] != fold) out.push_back(i);
  return out;
}

SplitPlan::FitValidation SplitPlan::fit_validation(int fold) const {
  std::vector<std::size_t> train = train_indices(fold);
  Rng rng(derive_seed(seed, "validation-split", static_cast<std::uint64_t>(fold)));
  rng.shuffle(train);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(train.size())));
  if (train.size() >= 2) {
    if (n_val == 0) n_val = 1;
    if (n_val >= train.size()) n_val = train.size() - 1;
  }
  FitValidation fv;
  fv.validation.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_val));
  fv.fit.assign(train.begin() + static_cast<std::ptrdiff_t>(n_val), train.end());
  // stable order keeps downstream index-based reports readable
  std::sort(fv.validation.begin(), fv.validation.end());
  std::sort(fv.fit.begin(), fv.fit.end());
  return fv;
}

SurvivalDataset subset(const SurvivalDataset& d, const std::vector<std::size_t>& idx) {
  SurvivalDataset out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), d.x.cols());
  out.times.resize(static_cast<Eigen::Index>(idx.size()));
  out.events.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = d.x.row(static_cast<Eigen::Index>(idx[r]));
    out.times[static_cast<Eigen::Index>(r)] = d.times[static_cast<Eigen::Index>(idx[r])];
    out.events[static_cast<Eigen::Index>(r)] = d.events[static_cast<Eigen::Index>(idx[r])];
  }
  out.features = d.features;
  out.num_events = d.num_events;
  out.state = d.state;
  return out;
}

}  // namespace survsel
