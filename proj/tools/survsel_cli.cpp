#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survsel/csv.hpp"
#include "survsel/dataset.hpp"
#include "survsel/evaluation.hpp"
#include "survsel/harness.hpp"
#include "survsel/network.hpp"
#include "survsel/rng.hpp"

namespace {

using namespace survsel;

SurvivalDataset load_for_model(const std::string& dir, const Checkpoint& ckpt,
                               std::vector<std::string>* notes) {
  PreparedData prepared = load_prepared(dir);
  SurvivalDataset d = std::move(prepared.data);
  if (!d.state.imputed) d = impute(d);
  if (!d.state.encoded) d = one_hot_encode(d);
  if (!d.state.normalized) {
    if (ckpt.normalization) {
      d = apply_normalization(d, *ckpt.normalization);
    } else if (notes) {
      notes->push_back("checkpoint carries no normalization statistics; evaluating raw values");
    }
  }
  return d;
}

int cmd_prepare(const std::string& input, const std::string& schema_path,
                const std::string& out_dir) {
  const ColumnSchema schema = load_schema(schema_path);
  SurvivalDataset d = load_csv(input, schema);
  d = impute(d);
  d = one_hot_encode(d);
  save_prepared(d, nullptr, out_dir);
  std::cout << "prepared " << d.num_records() << " records, " << d.num_features()
            << " features, " << d.num_events << " events -> " << out_dir << "\n";
  for (const auto& w : d.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int cmd_augment(const std::string& input, int synth, std::uint64_t seed,
                const std::string& out_dir) {
  PreparedData prepared = load_prepared(input);
  SurvivalDataset d = augment_synthetic(prepared.data, synth, seed);
  save_prepared(d, prepared.has_params ? &prepared.params : nullptr,
                out_dir.empty() ? input : out_dir);
  std::cout << "added " << synth << " synthetic features -> "
            << (out_dir.empty() ? input : out_dir) << "\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& variant) {
  ExperimentManifest manifest = load_manifest(manifest_path);
  if (!variant.empty()) manifest.variant = parse_variant(variant);
  const ExperimentResult result = run_experiment(manifest);
  std::cout << "variant " << manifest.variant.name << ", " << manifest.folds
            << " folds -> " << manifest.output_dir << "\n";
  for (const auto& cell : result.summary) {
    std::cout << "event " << cell.event << " dt " << format_double(cell.horizon) << ": ";
    if (cell.folds_defined > 0)
      std::cout << "mean C " << format_double(cell.mean) << " (sd " << format_double(cell.sd)
                << ", " << cell.folds_defined << " folds)";
    else
      std::cout << "undefined (no comparable pairs)";
    std::cout << "\n";
  }
  for (const auto& w : result.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int cmd_search(const std::string& manifest_path, const std::string& variant) {
  ExperimentManifest manifest = load_manifest(manifest_path);
  if (!variant.empty()) manifest.variant = parse_variant(variant);
  const SearchOutcome outcome = run_search(manifest);
  std::cout << "search for " << manifest.variant.name << " -> " << manifest.output_dir << "\n";
  std::cout << "best: beta " << format_double(outcome.best.beta) << ", sigma "
            << format_double(outcome.best.sigma) << ", shared " << outcome.best.shared_layers
            << "x" << outcome.best.shared_width << ", cause " << outcome.best.cause_layers << "x"
            << outcome.best.cause_width << ", m " << outcome.best.selection_size << ", gamma "
            << format_double(outcome.best.gamma) << "\n";
  std::cout << outcome.stage1_log.size() << " stage-1 trials, " << outcome.stage2_log.size()
            << " stage-2 trials\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::vector<double>& horizons, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  std::vector<std::string> notes;
  const SurvivalDataset d = load_for_model(data_dir, ckpt, &notes);
  if (d.num_features() != ckpt.config.input_dim)
    throw DataError("dataset has " + std::to_string(d.num_features()) +
                    " features but the model expects " + std::to_string(ckpt.config.input_dim));
  const EvaluationGrid grid = evaluate(ckpt.params, ckpt.config, d, horizons);

  CsvTable table;
  table.header = {"event", "horizon", "c_index", "comparable_pairs", "defined"};
  for (int k = 1; k <= ckpt.config.num_events; ++k) {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const CIndexResult& cell = grid.cell(k, h);
      table.rows.push_back({std::to_string(k), format_double(horizons[h]),
                            cell.defined ? format_double(cell.value) : std::string(),
                            std::to_string(cell.comparable_pairs), cell.defined ? "1" : "0"});
      std::cout << "event " << k << " dt " << format_double(horizons[h]) << ": "
                << (cell.defined ? format_double(cell.value) : "undefined") << " ("
                << cell.comparable_pairs << " pairs)\n";
    }
  }
  std::cout << "mean over " << grid.defined_cells
            << " defined cells: " << format_double(grid.mean) << "\n";
  for (const auto& n : notes) std::cout << "note: " << n << "\n";
  if (!out_path.empty()) write_csv(table, out_path);
  return 0;
}

int cmd_rank(const std::string& method, const std::string& data_dir, int event,
             const std::vector<double>& horizons, std::uint64_t seed, const std::string& out_path,
             const std::string& model_path, int permutations) {
  if (method == "permutation") {
    if (model_path.empty())
      throw DataError("permutation ranking needs --model with a trained checkpoint");
    const Checkpoint ckpt = load_checkpoint(model_path);
    std::vector<std::string> notes;
    const SurvivalDataset d = load_for_model(data_dir, ckpt, &notes);
    const ImportanceReport report = permutation_importance(ckpt.params, ckpt.config, d, horizons,
                                                           permutations, seed);
    write_importance_report(report, d.features, out_path);
    for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "importance for " << d.num_features() << " features -> " << out_path << "\n";
    return 0;
  }

  PreparedData prepared = load_prepared(data_dir);
  SurvivalDataset d = std::move(prepared.data);
  if (!d.state.imputed) d = impute(d);
  if (!d.state.encoded) d = one_hot_encode(d);
  if (!d.state.normalized) d = normalize(d).data;

  RankOptions options;
  options.method = filter_method_from_string(method);
  options.horizons = horizons;
  const FilterRanking ranking = rank_features_for_event(d, event, options, seed);
  write_ranking_report(ranking, horizons, d.features, out_path);
  for (const auto& w : ranking.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "ranked " << d.num_features() << " features for event " << event << " -> "
            << out_path << "\n";
  return 0;
}

int cmd_degradation(const std::string& manifest_path, const std::vector<int>& counts,
                    const std::vector<std::string>& variants) {
  const ExperimentManifest manifest = load_manifest(manifest_path);
  const auto points = degradation_study(manifest, counts, variants);
  std::cout << "degradation curve -> " << manifest.output_dir << "/degradation_curve.csv\n";
  for (const auto& p : points)
    std::cout << p.variant << " +" << p.synth_count << " synth, event " << p.event << ": mean C "
              << format_double(p.mean) << " (sd " << format_double(p.sd) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competing-risks survival modeling with feature selection"};
  app.require_subcommand(1);

  auto* prepare = app.add_subcommand("prepare", "Ingest a CSV into a prepared dataset directory");
  std::string prepare_input, prepare_schema, prepare_out;
  prepare->add_option("--input", prepare_input, "Input CSV file")->required();
  prepare->add_option("--schema", prepare_schema, "JSON column schema")->required();
  prepare->add_option("--out", prepare_out, "Output directory")->required();

  auto* augment = app.add_subcommand("augment", "Append synthetic binary noise features");
  std::string augment_input, augment_out;
  int augment_synth = 0;
  std::uint64_t augment_seed = 0;
  augment->add_option("--input", augment_input, "Prepared dataset directory")->required();
  augment->add_option("--synth", augment_synth, "Number of synthetic features")->required();
  augment->add_option("--seed", augment_seed, "Seed for the synthetic draws");
  augment->add_option("--out", augment_out, "Output directory (default: overwrite input)");

  auto* train = app.add_subcommand("train", "Run the cross-validated training protocol");
  std::string train_manifest, train_variant;
  train->add_option("--manifest", train_manifest, "Experiment manifest (JSON)")->required();
  train->add_option("--variant", train_variant,
                    "plain|filter-anova|filter-svm|filter-relieff|sparse|hybrid");

  auto* search = app.add_subcommand("search", "Run the staged random hyperparameter search only");
  std::string search_manifest, search_variant;
  search->add_option("--manifest", search_manifest, "Experiment manifest (JSON)")->required();
  search->add_option("--variant", search_variant,
                     "plain|filter-anova|filter-svm|filter-relieff|sparse|hybrid");

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on a dataset");
  std::string eval_model, eval_data, eval_out;
  std::vector<double> eval_horizons{12.0, 36.0, 60.0, 120.0};
  evaluate->add_option("--model", eval_model, "Model checkpoint (JSON)")->required();
  evaluate->add_option("--data", eval_data, "Prepared dataset directory")->required();
  evaluate->add_option("--horizons", eval_horizons, "Evaluation horizons in months")
      ->delimiter(',');
  evaluate->add_option("--out", eval_out, "Optional CSV output path");

  auto* rank = app.add_subcommand("rank-features", "Rank features by relevance");
  std::string rank_method, rank_data, rank_out, rank_model;
  int rank_event = 1;
  int rank_perms = 10;
  std::uint64_t rank_seed = 0;
  std::vector<double> rank_horizons{12.0, 36.0, 60.0, 120.0};
  rank->add_option("--method", rank_method, "anova|svm|relieff|permutation")->required();
  rank->add_option("--data", rank_data, "Prepared dataset directory")->required();
  rank->add_option("--out", rank_out, "Output CSV path")->required();
  rank->add_option("--event", rank_event, "Event of interest (1-based)");
  rank->add_option("--horizons", rank_horizons, "Scoring horizons in months")->delimiter(',');
  rank->add_option("--seed", rank_seed, "Seed for sampling-based methods");
  rank->add_option("--model", rank_model, "Trained checkpoint (permutation method)");
  rank->add_option("--permutations", rank_perms, "Permutation count (permutation method)");

  auto* degradation = app.add_subcommand("degradation",
                                         "Synthetic-feature degradation curve over variants");
  std::string deg_manifest;
  std::vector<int> deg_counts{0, 20, 40, 60, 80, 100};
  std::vector<std::string> deg_variants{"plain", "sparse"};
  degradation->add_option("--manifest", deg_manifest, "Base experiment manifest (JSON)")
      ->required();
  degradation->add_option("--counts", deg_counts, "Synthetic feature counts")->delimiter(',');
  degradation->add_option("--variants", deg_variants, "Variants to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*prepare) return cmd_prepare(prepare_input, prepare_schema, prepare_out);
    if (*augment) return cmd_augment(augment_input, augment_synth, augment_seed, augment_out);
    if (*train) return cmd_train(train_manifest, train_variant);
    if (*search) return cmd_search(search_manifest, search_variant);
    if (*evaluate) return cmd_evaluate(eval_model, eval_data, eval_horizons, eval_out);
    if (*rank)
      return cmd_rank(rank_method, rank_data, rank_event, rank_horizons, rank_seed, rank_out,
                      rank_model, rank_perms);
    if (*degradation) return cmd_degradation(deg_manifest, deg_counts, deg_variants);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
