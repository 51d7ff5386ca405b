#include "survsel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "survsel/csv.hpp"
#include "survsel/rng.hpp"

namespace survsel {

namespace {

using json = nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SearchSpace default_space(const VariantSpec& variant) {
  SearchSpace space;
  if (variant.name != "plain") {
    // extension variants search a narrower architecture grid
    space.shared_layers = {1, 2};
    space.shared_width = {50, 100};
    space.cause_layers = {1, 2};
    space.cause_width = {50, 100};
  }
  return space;
}

json hyperparams_to_json(const Hyperparams& hp) {
  return json{{"beta", hp.beta},
              {"sigma", hp.sigma},
              {"shared_layers", hp.shared_layers},
              {"shared_width", hp.shared_width},
              {"cause_layers", hp.cause_layers},
              {"cause_width", hp.cause_width},
              {"selection_size", hp.selection_size},
              {"gamma", hp.gamma}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.beta = j.value("beta", hp.beta);
  hp.sigma = j.value("sigma", hp.sigma);
  hp.shared_layers = j.value("shared_layers", hp.shared_layers);
  hp.shared_width = j.value("shared_width", hp.shared_width);
  hp.cause_layers = j.value("cause_layers", hp.cause_layers);
  hp.cause_width = j.value("cause_width", hp.cause_width);
  hp.selection_size = j.value("selection_size", hp.selection_size);
  hp.gamma = j.value("gamma", hp.gamma);
  return hp;
}

// Per-fold working set: normalized fit/validation/test subsets plus the
// filter rankings computed on the fit subset only.
struct FoldData {
  SurvivalDataset fit;
  SurvivalDataset validation;
  SurvivalDataset test;
  NormalizationParams norm;
  std::vector<FilterRanking> rankings;  // per event, filter variants only
};

struct TrainedModel {
  NetworkConfig config;
  FitResult result;
  std::optional<FeatureSelection> selection;
  std::optional<ImportanceReport> importance;  // hybrid variant
};

struct Driver {
  const ExperimentManifest& manifest;
  SurvivalDataset data;
  SplitPlan plan;
  std::vector<FoldData> folds;
  int num_bins = 1;
  double bin_width = 1.0;

  std::vector<TrialResult> stage1_log;
  std::vector<TrialResult> stage2_log;
  Hyperparams best_hp;
  bool searched = false;
  std::vector<std::string> warnings;
  json timings = json::object();

  explicit Driver(const ExperimentManifest& m) : manifest(m) {}

  void prepare() {
    if (manifest.folds < 2) throw DataError("experiment needs at least 2 folds");
    if (manifest.horizons.empty()) throw DataError("experiment needs at least one horizon");

    if (manifest.use_toy) {
      data = generate_toy_dataset(manifest.toy).data;
    } else {
      data = load_prepared(manifest.prepared_dir).data;
      if (!data.state.imputed) data = impute(data);
      if (!data.state.encoded) data = one_hot_encode(data);
    }
    if (data.state.normalized)
      throw DataError("experiment input must not be pre-normalized; statistics are per fold");
    if (manifest.synth_count > 0)
      data = augment_synthetic(data, manifest.synth_count,
                               derive_seed(manifest.seed, "augment"));

    num_bins = static_cast<int>(std::ceil(data.times.maxCoeff())) + 1;
    bin_width = 1.0;

    plan = kfold_split(data, manifest.folds, manifest.validation_fraction, manifest.seed);

    RankOptions rank = manifest.rank;
    rank.horizons = manifest.horizons;
    if (manifest.variant.filter && !manifest.variant.hybrid)
      rank.method = *manifest.variant.filter;

    folds.resize(static_cast<std::size_t>(manifest.folds));
    for (int f = 0; f < manifest.folds; ++f) {
      FoldData& fd = folds[static_cast<std::size_t>(f)];
      const auto train_idx = plan.train_indices(f);
      const auto test_idx = plan.test_indices(f);
      const auto fv = plan.fit_validation(f);

      // statistics come from the full training side of the fold
      const NormalizeResult nr = normalize(subset(data, train_idx));
      fd.norm = nr.params;
      fd.fit = apply_normalization(subset(data, fv.fit), fd.norm);
      fd.validation = apply_normalization(subset(data, fv.validation), fd.norm);
      fd.test = apply_normalization(subset(data, test_idx), fd.norm);

      if (manifest.variant.filter && !manifest.variant.hybrid) {
        for (int k = 1; k <= data.num_events; ++k)
          fd.rankings.push_back(rank_features_for_event(
              fd.fit, k, rank,
              derive_seed(manifest.seed, "filter-rank", static_cast<std::uint64_t>(f),
                          static_cast<std::uint64_t>(k))));
      }
    }
  }

  NetworkConfig config_for(const Hyperparams& hp, Variant network,
                           std::optional<FeatureSelection> selection) const {
    NetworkConfig cfg;
    cfg.num_events = data.num_events;
    cfg.num_bins = num_bins;
    cfg.bin_width = bin_width;
    cfg.input_dim = static_cast<int>(data.num_features());
    cfg.shared_layers = hp.shared_layers;
    cfg.shared_width = hp.shared_width;
    cfg.cause_layers.assign(static_cast<std::size_t>(data.num_events), hp.cause_layers);
    cfg.cause_width.assign(static_cast<std::size_t>(data.num_events), hp.cause_width);
    cfg.variant = network;
    cfg.selection = std::move(selection);
    return cfg;
  }

  LossConfig loss_for(const Hyperparams& hp, Variant network) const {
    LossConfig lc;
    lc.beta = hp.beta;
    lc.sigma = hp.sigma;
    if (network == Variant::sparse)
      lc.gamma_event.assign(static_cast<std::size_t>(data.num_events), hp.gamma);
    return lc;
  }

  std::vector<int> selection_sizes(const Hyperparams& hp) {
    const int cap = static_cast<int>(data.num_features());
    int m = hp.selection_size;
    if (m > cap) {
      warnings.push_back("selection size " + std::to_string(hp.selection_size) +
                         " capped at the feature count " + std::to_string(cap));
      m = cap;
    }
    return std::vector<int>(static_cast<std::size_t>(data.num_events), m);
  }

  // Trains one model for the manifest's variant on one fold with the given
  // hyperparameters; hybrid runs its two stages internally.
  TrainedModel train_variant(int fold, const Hyperparams& hp, std::uint64_t train_seed) {
    const FoldData& fd = folds[static_cast<std::size_t>(fold)];
    TrainConfig tc = manifest.train;
    tc.seed = train_seed;
    TrainedModel out;

    if (manifest.variant.hybrid) {
      // stage one: plain model on all features
      const NetworkConfig plain_cfg = config_for(hp, Variant::plain, std::nullopt);
      const LossConfig plain_loss = loss_for(hp, Variant::plain);
      const FitResult stage_a =
          fit(plain_cfg, fd.fit, fd.validation, tc, plain_loss, manifest.horizons);

      // stage two: permutation importance ranks features on the validation
      // side, then the filter architecture retrains on the selection
      ImportanceReport report;
      const FeatureSelection sel = hybrid_select(
          stage_a.params, plain_cfg, fd.validation, selection_sizes(hp),
          manifest.importance_permutations, manifest.horizons,
          derive_seed(manifest.seed, "hybrid-importance", static_cast<std::uint64_t>(fold),
                      train_seed),
          &report);
      out.selection = sel;
      out.importance = std::move(report);
      out.config = config_for(hp, Variant::filter, sel);
      TrainConfig retrain = tc;
      retrain.seed = derive_seed(train_seed, "hybrid-retrain");
      out.result = fit(out.config, fd.fit, fd.validation, retrain,
                       loss_for(hp, Variant::filter), manifest.horizons);
      return out;
    }

    if (manifest.variant.filter) {
      std::vector<std::vector<FeatureScore>> rankings;
      for (const auto& r : fd.rankings) rankings.push_back(r.scores);
      const FeatureSelection sel = select_features(rankings, selection_sizes(hp));
      out.selection = sel;
      out.config = config_for(hp, Variant::filter, sel);
    } else {
      out.config = config_for(hp, manifest.variant.network, std::nullopt);
    }
    out.result = fit(out.config, fd.fit, fd.validation, tc,
                     loss_for(hp, manifest.variant.network), manifest.horizons);
    return out;
  }

  void search() {
    if (manifest.fixed) {
      best_hp = *manifest.fixed;
      return;
    }
    if (!manifest.search_enabled) {
      best_hp = Hyperparams{};
      best_hp.beta = manifest.space.beta.front();
      best_hp.sigma = manifest.space.sigma.front();
      best_hp.shared_layers = manifest.space.shared_layers.front();
      best_hp.shared_width = manifest.space.shared_width.front();
      best_hp.cause_layers = manifest.space.cause_layers.front();
      best_hp.cause_width = manifest.space.cause_width.front();
      best_hp.selection_size = manifest.space.selection_size.front();
      best_hp.gamma = manifest.space.gamma.front();
      return;
    }
    searched = true;
    const auto start = std::chrono::steady_clock::now();

    SearchSpace space = manifest.space;
    if (manifest.stage1_iterations > 0) {
      // stage one: ranking-loss weight and kernel scale on the plain model
      // with a fixed base architecture
      SearchSpace stage1 = space;
      stage1.shared_layers = {1};
      stage1.shared_width = {50};
      stage1.cause_layers = {1};
      stage1.cause_width = {50};
      stage1.selection_size = {space.selection_size.front()};
      stage1.gamma = {space.gamma.front()};
      const SearchResult sr1 = random_search(
          stage1, manifest.stage1_iterations, derive_seed(manifest.seed, "search-stage1"),
          [&](const Hyperparams& hp, int trial) {
            TrainConfig tc = manifest.train;
            tc.seed = derive_seed(manifest.seed, "stage1-trial",
                                  static_cast<std::uint64_t>(trial));
            const FoldData& fd = folds.front();
            const FitResult r =
                fit(config_for(hp, Variant::plain, std::nullopt), fd.fit, fd.validation, tc,
                    loss_for(hp, Variant::plain), manifest.horizons);
            return r.best_metric;
          });
      stage1_log = sr1.log;
      space.beta = {sr1.best.beta};
      space.sigma = {sr1.best.sigma};
      best_hp = sr1.best;
      best_hp.shared_layers = space.shared_layers.front();
      best_hp.shared_width = space.shared_width.front();
      best_hp.cause_layers = space.cause_layers.front();
      best_hp.cause_width = space.cause_width.front();
    }

    if (manifest.stage2_iterations > 0) {
      const SearchResult sr2 = random_search(
          space, manifest.stage2_iterations, derive_seed(manifest.seed, "search-stage2"),
          [&](const Hyperparams& hp, int trial) {
            const TrainedModel m = train_variant(
                0, hp, derive_seed(manifest.seed, "stage2-trial", static_cast<std::uint64_t>(trial)));
            return m.result.best_metric;
          });
      stage2_log = sr2.log;
      best_hp = sr2.best;
    }
    timings["search_seconds"] = seconds_since(start);
  }
};

void append_trial_rows(CsvTable& table, const std::vector<TrialResult>& log, int stage) {
  for (const auto& tr : log) {
    std::vector<std::string> row;
    row.push_back(std::to_string(stage));
    row.push_back(std::to_string(tr.trial));
    row.push_back(format_double(tr.hp.beta));
    row.push_back(format_double(tr.hp.sigma));
    row.push_back(std::to_string(tr.hp.shared_layers));
    row.push_back(std::to_string(tr.hp.shared_width));
    row.push_back(std::to_string(tr.hp.cause_layers));
    row.push_back(std::to_string(tr.hp.cause_width));
    row.push_back(std::to_string(tr.hp.selection_size));
    row.push_back(format_double(tr.hp.gamma));
    row.push_back(tr.failed ? std::string() : format_double(tr.metric));
    row.push_back(tr.failed ? "failed" : "ok");
    table.rows.push_back(std::move(row));
  }
}

void write_search_log(const Driver& driver, const std::string& path) {
  CsvTable table;
  table.header = {"stage",        "trial",        "beta",          "sigma",
                  "shared_layers", "shared_width", "cause_layers", "cause_width",
                  "selection_size", "gamma",       "metric",       "status"};
  append_trial_rows(table, driver.stage1_log, 1);
  append_trial_rows(table, driver.stage2_log, 2);
  write_csv(table, path);
}

std::vector<SummaryCell> summarize(const std::vector<FoldOutcome>& folds, int num_events,
                                   const std::vector<double>& horizons) {
  std::vector<SummaryCell> summary;
  for (int k = 1; k <= num_events; ++k) {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      SummaryCell cell;
      cell.event = k;
      cell.horizon = horizons[h];
      std::vector<double> values;
      for (const auto& fo : folds) {
        const CIndexResult& c = fo.test_grid.cell(k, h);
        if (c.defined) values.push_back(c.value);
      }
      cell.folds_defined = static_cast<int>(values.size());
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        cell.mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - cell.mean) * (v - cell.mean);
          cell.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
      }
      summary.push_back(cell);
    }
  }
  return summary;
}

void write_results(const ExperimentResult& result, const std::vector<double>& horizons,
                   const std::string& dir) {
  CsvTable grid;
  grid.header = {"fold", "event", "horizon", "c_index", "comparable_pairs", "defined"};
  for (const auto& fo : result.folds) {
    for (int k = 1; k <= result.num_events; ++k) {
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        const CIndexResult& c = fo.test_grid.cell(k, h);
        std::vector<std::string> row;
        row.push_back(std::to_string(fo.fold));
        row.push_back(std::to_string(k));
        row.push_back(format_double(horizons[h]));
        row.push_back(c.defined ? format_double(c.value) : std::string());
        row.push_back(std::to_string(c.comparable_pairs));
        row.push_back(c.defined ? "1" : "0");
        grid.rows.push_back(std::move(row));
      }
    }
  }
  write_csv(grid, dir + "/results_grid.csv");

  CsvTable summary;
  summary.header = {"event", "horizon", "mean", "sd", "folds_defined"};
  for (const auto& cell : result.summary) {
    std::vector<std::string> row;
    row.push_back(std::to_string(cell.event));
    row.push_back(format_double(cell.horizon));
    row.push_back(cell.folds_defined > 0 ? format_double(cell.mean) : std::string());
    row.push_back(cell.folds_defined > 0 ? format_double(cell.sd) : std::string());
    row.push_back(std::to_string(cell.folds_defined));
    summary.rows.push_back(std::move(row));
  }
  write_csv(summary, dir + "/results_summary.csv");
}

}  // namespace

VariantSpec parse_variant(const std::string& name) {
  VariantSpec vs;
  vs.name = name;
  if (name == "plain") {
    vs.network = Variant::plain;
  } else if (name == "sparse") {
    vs.network = Variant::sparse;
  } else if (name == "filter-anova") {
    vs.network = Variant::filter;
    vs.filter = FilterMethod::anova;
  } else if (name == "filter-svm") {
    vs.network = Variant::filter;
    vs.filter = FilterMethod::svm;
  } else if (name == "filter-relieff") {
    vs.network = Variant::filter;
    vs.filter = FilterMethod::relieff;
  } else if (name == "hybrid") {
    vs.network = Variant::filter;
    vs.hybrid = true;
  } else {
    throw DataError("unknown variant: " + name +
                    " (expected plain, filter-anova, filter-svm, filter-relieff, sparse, hybrid)");
  }
  return vs;
}

ExperimentManifest manifest_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest JSON: ") + e.what());
  }

  ExperimentManifest m;
  m.output_dir = j.value("output_dir", m.output_dir);
  m.seed = j.value("seed", static_cast<std::uint64_t>(0));
  m.variant = parse_variant(j.value("variant", "plain"));
  if (j.contains("horizons")) m.horizons = j.at("horizons").get<std::vector<double>>();
  m.folds = j.value("folds", m.folds);
  m.validation_fraction = j.value("validation_fraction", m.validation_fraction);

  if (j.contains("data")) {
    const json& d = j.at("data");
    if (d.contains("prepared")) {
      m.use_toy = false;
      m.prepared_dir = d.at("prepared").get<std::string>();
    } else if (d.contains("toy")) {
      const json& t = d.at("toy");
      m.use_toy = true;
      m.toy.n_records = t.value("records", m.toy.n_records);
      m.toy.n_relevant = t.value("relevant", m.toy.n_relevant);
      m.toy.n_noise = t.value("noise", m.toy.n_noise);
      m.toy.num_events = t.value("events", m.toy.num_events);
      m.toy.censoring_rate = t.value("censoring_rate", m.toy.censoring_rate);
      m.toy.seed = t.value("seed", m.toy.seed);
      m.toy.grid_bins = t.value("grid_bins", m.toy.grid_bins);
    } else {
      throw DataError("manifest data section needs either \"toy\" or \"prepared\"");
    }
  }

  m.synth_count = j.value("synthetic_features", 0);

  m.space = default_space(m.variant);
  if (j.contains("space")) {
    const json& s = j.at("space");
    if (s.contains("beta")) m.space.beta = s.at("beta").get<std::vector<double>>();
    if (s.contains("sigma")) m.space.sigma = s.at("sigma").get<std::vector<double>>();
    if (s.contains("shared_layers"))
      m.space.shared_layers = s.at("shared_layers").get<std::vector<int>>();
    if (s.contains("shared_width"))
      m.space.shared_width = s.at("shared_width").get<std::vector<int>>();
    if (s.contains("cause_layers"))
      m.space.cause_layers = s.at("cause_layers").get<std::vector<int>>();
    if (s.contains("cause_width"))
      m.space.cause_width = s.at("cause_width").get<std::vector<int>>();
    if (s.contains("selection_size"))
      m.space.selection_size = s.at("selection_size").get<std::vector<int>>();
    if (s.contains("gamma")) m.space.gamma = s.at("gamma").get<std::vector<double>>();
  }
  m.space.validate();

  if (j.contains("search")) {
    const json& s = j.at("search");
    m.search_enabled = s.value("enabled", true);
    m.stage1_iterations = s.value("stage1", m.stage1_iterations);
    m.stage2_iterations = s.value("stage2", m.stage2_iterations);
  }
  if (j.contains("hyperparams")) m.fixed = hyperparams_from_json(j.at("hyperparams"));

  if (j.contains("train")) {
    const json& t = j.at("train");
    m.train.learning_rate = t.value("learning_rate", m.train.learning_rate);
    m.train.batch_size = t.value("batch_size", m.train.batch_size);
    m.train.max_epochs = t.value("max_epochs", m.train.max_epochs);
    m.train.patience = t.value("patience", m.train.patience);
  }

  if (j.contains("filter")) {
    const json& f = j.at("filter");
    m.rank.svm.reg = f.value("svm_reg", m.rank.svm.reg);
    m.rank.svm.epochs = f.value("svm_epochs", m.rank.svm.epochs);
    m.rank.relieff.k_neighbors = f.value("relieff_neighbors", m.rank.relieff.k_neighbors);
    m.rank.relieff.sample_count = f.value("relieff_samples", m.rank.relieff.sample_count);
  }
  m.importance_permutations = j.value("importance_permutations", m.importance_permutations);
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json_text(text);
}

double ExperimentResult::summary_mean(int event) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& cell : summary) {
    if (cell.event != event || cell.folds_defined == 0) continue;
    sum += cell.mean;
    ++n;
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

ExperimentResult run_experiment(const ExperimentManifest& manifest) {
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(manifest.output_dir);

  Driver driver(manifest);
  ExperimentResult result;

  auto persist = [&](const std::string& failure) {
    result.num_events = driver.data.num_events;
    result.best_hp = driver.best_hp;
    result.stage1_log = driver.stage1_log;
    result.stage2_log = driver.stage2_log;
    result.warnings = driver.warnings;
    result.summary = summarize(result.folds, result.num_events, manifest.horizons);

    if (driver.searched) write_search_log(driver, manifest.output_dir + "/search_log.csv");
    {
      std::ofstream out(manifest.output_dir + "/best_hyperparams.json");
      out << hyperparams_to_json(driver.best_hp).dump(1) << "\n";
    }
    write_results(result, manifest.horizons, manifest.output_dir);

    json meta;
    meta["format"] = "survsel-run-metadata";
    meta["version"] = 1;
    meta["seed"] = manifest.seed;
    meta["variant"] = manifest.variant.name;
    meta["folds"] = manifest.folds;
    meta["horizons"] = manifest.horizons;
    meta["num_records"] = driver.data.num_records();
    meta["num_features"] = driver.data.num_features();
    meta["num_bins"] = driver.num_bins;
    meta["synthetic_features"] = manifest.synth_count;
    meta["warnings"] = driver.warnings;
    driver.timings["total_seconds"] = seconds_since(start);
    meta["timings"] = driver.timings;
    if (!failure.empty()) {
      meta["failed"] = true;
      meta["failure"] = failure;
    }
    std::ofstream out(manifest.output_dir + "/run_metadata.json");
    out << meta.dump(1) << "\n";
  };

  try {
    driver.prepare();
    driver.search();

    for (int f = 0; f < manifest.folds; ++f) {
      const auto fold_start = std::chrono::steady_clock::now();
      const TrainedModel model = driver.train_variant(
          f, driver.best_hp, derive_seed(manifest.seed, "final-train", static_cast<std::uint64_t>(f)));
      const FoldData& fd = driver.folds[static_cast<std::size_t>(f)];

      FoldOutcome outcome;
      outcome.fold = f;
      outcome.hp = driver.best_hp;
      outcome.test_grid = evaluate(model.result.params, model.config, fd.test, manifest.horizons);
      outcome.validation_metric = model.result.best_metric;
      outcome.best_epoch = model.result.best_epoch;
      outcome.epochs_run = model.result.epochs_run;

      const std::string tag = "fold" + std::to_string(f);
      write_training_log(model.result, driver.data.num_events, manifest.horizons,
                         manifest.output_dir + "/" + tag + "_training_log.csv");
      Checkpoint ckpt;
      ckpt.config = model.config;
      ckpt.params = model.result.params;
      ckpt.normalization = fd.norm;
      ckpt.features = driver.data.features;
      save_checkpoint(ckpt, manifest.output_dir + "/" + tag + "_model.json");

      if (manifest.variant.filter && !manifest.variant.hybrid) {
        for (int k = 1; k <= driver.data.num_events; ++k)
          write_ranking_report(fd.rankings[static_cast<std::size_t>(k - 1)], manifest.horizons,
                               driver.data.features,
                               manifest.output_dir + "/" + tag + "_ranking_event" +
                                   std::to_string(k) + ".csv");
      }
      if (model.importance)
        write_importance_report(*model.importance, driver.data.features,
                                manifest.output_dir + "/" + tag + "_importance.csv");
      for (const auto& w : model.result.warnings) driver.warnings.push_back(tag + ": " + w);

      driver.timings[tag + "_seconds"] = seconds_since(fold_start);
      result.folds.push_back(std::move(outcome));
    }
  } catch (const std::exception& e) {
    persist(e.what());
    throw;
  }

  persist("");
  return result;
}

SearchOutcome run_search(const ExperimentManifest& manifest) {
  std::filesystem::create_directories(manifest.output_dir);
  Driver driver(manifest);
  driver.prepare();
  driver.search();
  write_search_log(driver, manifest.output_dir + "/search_log.csv");
  std::ofstream out(manifest.output_dir + "/best_hyperparams.json");
  out << hyperparams_to_json(driver.best_hp).dump(1) << "\n";
  SearchOutcome outcome;
  outcome.best = driver.best_hp;
  outcome.stage1_log = std::move(driver.stage1_log);
  outcome.stage2_log = std::move(driver.stage2_log);
  return outcome;
}

std::vector<DegradationPoint> degradation_study(const ExperimentManifest& base,
                                                const std::vector<int>& counts,
                                                const std::vector<std::string>& variants) {
  if (counts.empty()) throw DataError("degradation study needs at least one synthetic count");
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] < counts[i - 1])
      throw DataError("degradation synthetic counts must be nondecreasing");
  if (variants.empty()) throw DataError("degradation study needs at least one variant");

  std::filesystem::create_directories(base.output_dir);
  std::vector<DegradationPoint> points;
  for (const auto& name : variants) {
    const VariantSpec vs = parse_variant(name);
    for (int count : counts) {
      ExperimentManifest m = base;
      m.variant = vs;
      m.synth_count = count;
      m.output_dir = base.output_dir + "/deg_" + name + "_" + std::to_string(count);
      const ExperimentResult res = run_experiment(m);

      // one point per event: mean over folds of the fold's per-event mean
      // across defined horizon cells, with the sample SD over folds
      for (int k = 1; k <= res.num_events; ++k) {
        std::vector<double> fold_means;
        for (const auto& fo : res.folds) {
          double sum = 0.0;
          int defined = 0;
          for (std::size_t h = 0; h < m.horizons.size(); ++h) {
            const CIndexResult& c = fo.test_grid.cell(k, h);
            if (!c.defined) continue;
            sum += c.value;
            ++defined;
          }
          if (defined > 0) fold_means.push_back(sum / defined);
        }
        DegradationPoint p;
        p.variant = name;
        p.synth_count = count;
        p.event = k;
        if (!fold_means.empty()) {
          double sum = 0.0;
          for (double v : fold_means) sum += v;
          p.mean = sum / static_cast<double>(fold_means.size());
          if (fold_means.size() > 1) {
            double ss = 0.0;
            for (double v : fold_means) ss += (v - p.mean) * (v - p.mean);
            p.sd = std::sqrt(ss / static_cast<double>(fold_means.size() - 1));
          }
        }
        points.push_back(p);
      }
    }
  }

  CsvTable curve;
  curve.header = {"synth_count", "variant", "event", "mean_c_index", "sd_over_folds"};
  for (const auto& p : points) {
    std::vector<std::string> row;
    row.push_back(std::to_string(p.synth_count));
    row.push_back(p.variant);
    row.push_back(std::to_string(p.event));
    row.push_back(format_double(p.mean));
    row.push_back(format_double(p.sd));
    curve.rows.push_back(std::move(row));
  }
  write_csv(curve, base.output_dir + "/degradation_curve.csv");
  return points;
}

}  // namespace survsel
