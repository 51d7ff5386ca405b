#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <survsel/dataset.hpp>
#include <survsel/evaluation.hpp>
#include <survsel/filters.hpp>
#include <survsel/harness.hpp>
#include <survsel/network.hpp>
#include <survsel/training.hpp>
#include <survsel/types.hpp>

namespace py = pybind11;
using namespace survsel;

namespace {

SurvivalDataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& times,
                             const Eigen::VectorXi& events, int num_events,
                             const std::vector<std::string>& names,
                             const std::vector<std::string>& kinds) {
  SurvivalDataset d;
  d.x = x;
  d.times = times;
  d.events = events;
  d.num_events = num_events > 0 ? num_events : (events.size() > 0 ? events.maxCoeff() : 0);
  if (!names.empty() && names.size() != static_cast<std::size_t>(x.cols()))
    throw DataError("feature_names length must match the number of columns");
  if (!kinds.empty() && kinds.size() != static_cast<std::size_t>(x.cols()))
    throw DataError("feature_kinds length must match the number of columns");
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    FeatureMeta meta;
    meta.name = names.empty() ? "Feature" + std::to_string(j) : names[static_cast<std::size_t>(j)];
    meta.kind = kinds.empty() ? FeatureKind::numeric
                              : feature_kind_from_string(kinds[static_cast<std::size_t>(j)]);
    d.features.push_back(std::move(meta));
  }
  d.validate();
  return d;
}

py::dict cell_to_dict(const CIndexResult& cell) {
  py::dict out;
  out["event"] = cell.event;
  out["horizon"] = cell.horizon;
  out["value"] = cell.value;
  out["comparable_pairs"] = cell.comparable_pairs;
  out["defined"] = cell.defined;
  return out;
}

py::dict grid_to_dict(const EvaluationGrid& grid) {
  py::list cells;
  for (const auto& row : grid.cells)
    for (const auto& cell : row) cells.append(cell_to_dict(cell));
  py::dict out;
  out["mean"] = grid.mean;
  out["defined_cells"] = grid.defined_cells;
  out["cells"] = cells;
  return out;
}

py::dict hp_to_dict(const Hyperparams& hp) {
  py::dict out;
  out["beta"] = hp.beta;
  out["sigma"] = hp.sigma;
  out["shared_layers"] = hp.shared_layers;
  out["shared_width"] = hp.shared_width;
  out["cause_layers"] = hp.cause_layers;
  out["cause_width"] = hp.cause_width;
  out["selection_size"] = hp.selection_size;
  out["gamma"] = hp.gamma;
  return out;
}

py::dict result_to_dict(const ExperimentResult& result) {
  py::list folds;
  for (const auto& f : result.folds) {
    py::dict row;
    row["fold"] = f.fold;
    row["validation_metric"] = f.validation_metric;
    row["best_epoch"] = f.best_epoch;
    row["epochs_run"] = f.epochs_run;
    row["test"] = grid_to_dict(f.test_grid);
    folds.append(row);
  }
  py::list summary;
  for (const auto& cell : result.summary) {
    py::dict row;
    row["event"] = cell.event;
    row["horizon"] = cell.horizon;
    row["mean"] = cell.mean;
    row["sd"] = cell.sd;
    row["folds_defined"] = cell.folds_defined;
    summary.append(row);
  }
  py::dict out;
  out["num_events"] = result.num_events;
  out["best_hyperparams"] = hp_to_dict(result.best_hp);
  out["folds"] = folds;
  out["summary"] = summary;
  out["warnings"] = result.warnings;
  return out;
}

Eigen::MatrixXd normalized_features(const Checkpoint& ckpt, const Eigen::MatrixXd& x,
                                    bool normalize_input) {
  if (x.cols() != ckpt.config.input_dim)
    throw DataError("input has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(ckpt.config.input_dim));
  if (!normalize_input || !ckpt.normalization.has_value()) return x;
  const auto& p = *ckpt.normalization;
  Eigen::MatrixXd out = x.rowwise() - p.mean.transpose();
  out.array().rowwise() /= p.stddev.transpose().array();
  return out;
}

// (K*T) x B probabilities to a (B, K, T) array
py::array_t<double> prob_to_array(const Eigen::MatrixXd& prob, int num_events, int num_bins) {
  const py::ssize_t n = prob.cols(), K = num_events, T = num_bins;
  py::array_t<double> out({n, K, T});
  auto view = out.mutable_unchecked<3>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t k = 0; k < K; ++k)
      for (py::ssize_t t = 0; t < T; ++t) view(i, k, t) = prob(k * T + t, i);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Competing-risks survival analysis: discrete-time neural models, "
            "feature selection, and the cross-validated experiment harness.";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  py::class_<SurvivalDataset>(m, "Dataset",
                              "Column-oriented survival data: covariates, times in months, "
                              "and event labels (0 = censored, 1..K = competing risks).")
      .def(py::init(&make_dataset), py::arg("x"), py::arg("times"), py::arg("events"),
           py::arg("num_events") = 0, py::arg("feature_names") = std::vector<std::string>{},
           py::arg("feature_kinds") = std::vector<std::string>{},
           "Build a dataset from arrays. num_events defaults to the maximum "
           "event label; feature kinds are 'numeric', 'binary', or 'categorical'.")
      .def_property_readonly("x", [](const SurvivalDataset& d) { return d.x; })
      .def_property_readonly("times", [](const SurvivalDataset& d) { return d.times; })
      .def_property_readonly("events", [](const SurvivalDataset& d) { return d.events; })
      .def_property_readonly("num_events", [](const SurvivalDataset& d) { return d.num_events; })
      .def_property_readonly("feature_names",
                             [](const SurvivalDataset& d) {
                               std::vector<std::string> names;
                               for (const auto& f : d.features) names.push_back(f.name);
                               return names;
                             })
      .def_property_readonly("feature_kinds",
                             [](const SurvivalDataset& d) {
                               std::vector<std::string> kinds;
                               for (const auto& f : d.features) kinds.push_back(to_string(f.kind));
                               return kinds;
                             })
      .def("__len__", [](const SurvivalDataset& d) { return d.num_records(); })
      .def("subset",
           [](const SurvivalDataset& d, const std::vector<std::size_t>& indices) {
             return subset(d, indices);
           },
           py::arg("indices"), "Rows selected by index, metadata preserved.");

  py::class_<NormalizationParams>(m, "NormalizationParams",
                                  "Per-column standardization statistics from a training fold.")
      .def_property_readonly("mean", [](const NormalizationParams& p) { return p.mean; })
      .def_property_readonly("stddev", [](const NormalizationParams& p) { return p.stddev; })
      .def_property_readonly("is_constant", [](const NormalizationParams& p) {
        return std::vector<bool>(p.is_constant.begin(), p.is_constant.end());
      });

  m.def(
      "generate_toy",
      [](int records, int relevant, int noise, int events, double censoring_rate,
         std::uint64_t seed, int grid_bins) {
        ToySpec spec;
        spec.n_records = records;
        spec.n_relevant = relevant;
        spec.n_noise = noise;
        spec.num_events = events;
        spec.censoring_rate = censoring_rate;
        spec.seed = seed;
        spec.grid_bins = grid_bins;
        auto toy = generate_toy_dataset(spec);
        py::dict truth;
        truth["relevant"] = toy.truth.relevant;
        truth["coefficients"] = toy.truth.coefficients;
        truth["baseline_logit"] = toy.truth.baseline_logit;
        truth["grid_bins"] = toy.truth.grid_bins;
        truth["bin_width"] = toy.truth.bin_width;
        return py::make_tuple(toy.data, truth);
      },
      py::arg("records") = 1000, py::arg("relevant") = 2, py::arg("noise") = 0,
      py::arg("events") = 1, py::arg("censoring_rate") = 0.0, py::arg("seed") = 0,
      py::arg("grid_bins") = 121,
      "Synthetic competing-risks data with known ground truth. Returns "
      "(dataset, truth) where truth lists the relevant feature indices and "
      "the hazard coefficients.");

  m.def(
      "normalize",
      [](const SurvivalDataset& d) {
        auto result = normalize(d);
        return py::make_tuple(result.data, result.params);
      },
      py::arg("dataset"),
      "Standardize every non-constant column to mean 0, variance 1. Returns "
      "(dataset, params); apply the params to held-out data.");

  m.def("apply_normalization", &apply_normalization, py::arg("dataset"), py::arg("params"),
        "Apply previously computed standardization statistics.");

  m.def("augment_synthetic", &augment_synthetic, py::arg("dataset"), py::arg("count"),
        py::arg("seed"),
        "Append `count` binary noise columns, Bernoulli(p_j) with p_j ~ Unif[0,1], "
        "independent of the outcomes.");

  m.def(
      "time_fixed_labels",
      [](const SurvivalDataset& d, int event, double horizon) {
        auto labels = time_fixed_labels(d, event, horizon);
        py::dict out;
        out["labels"] = py::array_t<std::uint8_t>(
            static_cast<py::ssize_t>(labels.labels.size()), labels.labels.data());
        out["positives"] = labels.positives;
        out["negatives"] = labels.negatives;
        return out;
      },
      py::arg("dataset"), py::arg("event"), py::arg("horizon"),
      "Binary cause-specific labels at a fixed horizon: 1 iff the record's "
      "event matches and its time is strictly below the horizon.");

  m.def(
      "rank_features",
      [](const SurvivalDataset& d, int event, const std::string& method,
         const std::vector<double>& horizons, std::uint64_t seed, double svm_reg, int svm_epochs,
         int relieff_neighbors, int relieff_samples) {
        RankOptions options;
        options.method = filter_method_from_string(method);
        options.horizons = horizons;
        options.svm.reg = svm_reg;
        options.svm.epochs = svm_epochs;
        options.relieff.k_neighbors = relieff_neighbors;
        options.relieff.sample_count = relieff_samples;
        auto ranking = rank_features_for_event(d, event, options, seed);
        std::vector<const FeatureScore*> order;
        for (const auto& s : ranking.scores) order.push_back(&s);
        std::sort(order.begin(), order.end(), [](const FeatureScore* a, const FeatureScore* b) {
          if (a->averaged != b->averaged) return a->averaged > b->averaged;
          return a->feature < b->feature;
        });
        py::list scores;
        for (const auto* s : order) {
          py::dict row;
          row["feature"] = s->feature;
          row["name"] = d.features[static_cast<std::size_t>(s->feature)].name;
          row["score"] = s->averaged;
          row["per_horizon"] = s->per_horizon;
          if (!std::isnan(s->p_value)) row["p_value"] = s->p_value;
          scores.append(row);
        }
        py::dict out;
        out["scores"] = scores;
        out["warnings"] = ranking.warnings;
        return out;
      },
      py::arg("dataset"), py::arg("event"), py::arg("method") = "anova",
      py::arg("horizons") = std::vector<double>{12.0, 36.0, 60.0, 120.0}, py::arg("seed") = 0,
      py::arg("svm_reg") = SvmOptions{}.reg, py::arg("svm_epochs") = SvmOptions{}.epochs,
      py::arg("relieff_neighbors") = ReliefFOptions{}.k_neighbors,
      py::arg("relieff_samples") = ReliefFOptions{}.sample_count,
      "Score every feature for one event, averaged over the given horizons, "
      "sorted best first. Methods: 'anova', 'svm', 'relieff'. The svm and "
      "relieff methods expect normalized data.");

  m.def(
      "c_index",
      [](const Eigen::RowVectorXd& risk, const Eigen::VectorXd& times,
         const Eigen::VectorXi& events, int event, double horizon) {
        return cell_to_dict(c_index(risk, times, events, event, horizon));
      },
      py::arg("risk"), py::arg("times"), py::arg("events"), py::arg("event"), py::arg("horizon"),
      "Time-dependent concordance for one event at one horizon from per-record "
      "risk scores (higher = riskier). Ties in risk earn half credit.");

  py::class_<Checkpoint>(m, "Model",
                         "A trained network checkpoint: architecture, parameters, and the "
                         "training-fold normalization statistics.")
      .def_property_readonly("num_events",
                             [](const Checkpoint& c) { return c.config.num_events; })
      .def_property_readonly("num_bins", [](const Checkpoint& c) { return c.config.num_bins; })
      .def_property_readonly("bin_width", [](const Checkpoint& c) { return c.config.bin_width; })
      .def_property_readonly("input_dim", [](const Checkpoint& c) { return c.config.input_dim; })
      .def_property_readonly("variant",
                             [](const Checkpoint& c) { return to_string(c.config.variant); })
      .def_property_readonly("feature_names",
                             [](const Checkpoint& c) {
                               std::vector<std::string> names;
                               for (const auto& f : c.features) names.push_back(f.name);
                               return names;
                             })
      .def(
          "predict",
          [](const Checkpoint& c, const Eigen::MatrixXd& x, bool normalize_input) {
            auto prob = forward(c.params, c.config, normalized_features(c, x, normalize_input));
            return prob_to_array(prob, c.config.num_events, c.config.num_bins);
          },
          py::arg("x"), py::arg("normalize_input") = true,
          "Joint event/time probabilities, shape (records, events, bins). "
          "Stored normalization is applied to the input unless disabled.")
      .def(
          "evaluate",
          [](const Checkpoint& c, const SurvivalDataset& d, const std::vector<double>& horizons,
             bool normalize_input) {
            SurvivalDataset prepared = d;
            prepared.x = normalized_features(c, d.x, normalize_input);
            return grid_to_dict(evaluate(c.params, c.config, prepared, horizons));
          },
          py::arg("dataset"), py::arg("horizons"), py::arg("normalize_input") = true,
          "Concordance grid over events and horizons.")
      .def(
          "importance",
          [](const Checkpoint& c, const SurvivalDataset& d, const std::vector<double>& horizons,
             int permutations, std::uint64_t seed, bool normalize_input) {
            SurvivalDataset prepared = d;
            prepared.x = normalized_features(c, d.x, normalize_input);
            auto report =
                permutation_importance(c.params, c.config, prepared, horizons, permutations, seed);
            py::dict out;
            out["importance"] = report.importance;
            out["permutations"] = report.permutations;
            out["warnings"] = report.warnings;
            return out;
          },
          py::arg("dataset"), py::arg("horizons"), py::arg("permutations") = 10,
          py::arg("seed") = 0, py::arg("normalize_input") = true,
          "Permutation importance per (event, feature): mean concordance drop "
          "when the feature's column is shuffled.");

  m.def("load_model", &load_checkpoint, py::arg("path"),
        "Load a model checkpoint written by the experiment harness or CLI.");

  m.def(
      "run_experiment",
      [](const std::string& manifest_json) {
        return result_to_dict(run_experiment(manifest_from_json_text(manifest_json)));
      },
      py::arg("manifest_json"),
      "Run the full cross-validated protocol from a manifest JSON string: "
      "preprocessing, fold-0 hyperparameter search, per-fold training, and "
      "evaluation. Artifacts are written under the manifest's output_dir; "
      "returns the summary as a dict.");

  m.def(
      "run_experiment_file",
      [](const std::string& path) { return result_to_dict(run_experiment(load_manifest(path))); },
      py::arg("path"), "Same as run_experiment, reading the manifest from a file.");
}
