#include "survsel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "survsel/csv.hpp"
#include "survsel/rng.hpp"

namespace survsel {

namespace {

using json = nlohmann::json;

bool is_missing(double v) { return std::isnan(v); }

double parse_number(const std::string& cell, const std::string& what, std::size_t row) {
  try {
    std::size_t pos = 0;
    double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError("malformed " + what + " value '" + cell + "' at row " + std::to_string(row));
  }
}

}  // namespace

ColumnSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("cannot parse schema file " + path + ": " + e.what());
  }
  if (!j.contains("columns") || !j["columns"].is_object())
    throw DataError("schema file must contain a 'columns' object");
  ColumnSchema schema;
  for (const auto& [name, role] : j["columns"].items()) {
    std::string r = role.get<std::string>();
    ColumnSchema::Column col;
    col.name = name;
    if (r == "numeric") col.role = ColumnSchema::Column::Role::numeric;
    else if (r == "binary") col.role = ColumnSchema::Column::Role::binary;
    else if (r == "categorical") col.role = ColumnSchema::Column::Role::categorical;
    else if (r == "time") col.role = ColumnSchema::Column::Role::time;
    else if (r == "event") col.role = ColumnSchema::Column::Role::event;
    else throw DataError("unknown column role '" + r + "' for column '" + name + "'");
    schema.columns.push_back(col);
  }
  if (j.contains("num_events")) schema.num_events = j["num_events"].get<int>();
  return schema;
}

SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema) {
  CsvTable table = read_csv(path);

  int time_col = -1, event_col = -1;
  std::vector<std::pair<int, ColumnSchema::Column>> feature_cols;  // csv index, schema entry
  for (const auto& col : schema.columns) {
    int idx = table.column(col.name);
    if (idx < 0) throw DataError("schema column '" + col.name + "' not found in " + path);
    switch (col.role) {
      case ColumnSchema::Column::Role::time: time_col = idx; break;
      case ColumnSchema::Column::Role::event: event_col = idx; break;
      default: feature_cols.emplace_back(idx, col); break;
    }
  }
  if (time_col < 0) throw DataError("schema names no time column");
  if (event_col < 0) throw DataError("schema names no event column");
  for (const auto& name : table.header) {
    bool known = false;
    for (const auto& col : schema.columns)
      if (col.name == name) known = true;
    if (!known) throw DataError("CSV column '" + name + "' has no role in the schema");
  }

  const std::size_t n = table.rows.size();
  const std::size_t d = feature_cols.size();
  SurvivalDataset out;
  out.x.setConstant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d),
                    std::numeric_limits<double>::quiet_NaN());
  out.times.resize(static_cast<Eigen::Index>(n));
  out.events.resize(static_cast<Eigen::Index>(n));

  // categorical level dictionaries: collect, then sort so level codes are
  // stable regardless of row order
  std::vector<std::set<std::string>> level_sets(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < d; ++f) {
      if (feature_cols[f].second.role != ColumnSchema::Column::Role::categorical) continue;
      const std::string& cell = table.rows[r][static_cast<std::size_t>(feature_cols[f].first)];
      if (!cell.empty()) level_sets[f].insert(cell);
    }
  }
  std::vector<std::vector<std::string>> levels(d);
  for (std::size_t f = 0; f < d; ++f) levels[f].assign(level_sets[f].begin(), level_sets[f].end());

  int max_event = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    const std::string& tcell = row[static_cast<std::size_t>(time_col)];
    if (tcell.empty()) throw DataError("missing time value at row " + std::to_string(r + 1));
    double t = parse_number(tcell, "time", r + 1);
    if (t < 0.0) throw DataError("negative time " + format_double(t) + " at row " + std::to_string(r + 1));
    out.times[static_cast<Eigen::Index>(r)] = t;

    const std::string& ecell = row[static_cast<std::size_t>(event_col)];
    if (ecell.empty()) throw DataError("missing event value at row " + std::to_string(r + 1));
    double ev = parse_number(ecell, "event", r + 1);
    int evi = static_cast<int>(ev);
    if (ev != static_cast<double>(evi) || evi < 0)
      throw DataError("event label '" + ecell + "' is not a nonnegative integer at row " +
                      std::to_string(r + 1));
    if (schema.num_events >= 0 && evi > schema.num_events)
      throw DataError("event label " + std::to_string(evi) + " exceeds K=" +
                      std::to_string(schema.num_events) + " at row " + std::to_string(r + 1));
    out.events[static_cast<Eigen::Index>(r)] = evi;
    max_event = std::max(max_event, evi);

    for (std::size_t f = 0; f < d; ++f) {
      const std::string& cell = row[static_cast<std::size_t>(feature_cols[f].first)];
      if (cell.empty()) continue;  // missing marker stays NaN
      if (feature_cols[f].second.role == ColumnSchema::Column::Role::categorical) {
        auto it = std::lower_bound(levels[f].begin(), levels[f].end(), cell);
        out.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) =
            static_cast<double>(it - levels[f].begin());
      } else {
        out.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) =
            parse_number(cell, "feature '" + feature_cols[f].second.name + "'", r + 1);
      }
    }
  }

  out.num_events = schema.num_events >= 0 ? schema.num_events : max_event;
  out.features.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    FeatureMeta& m = out.features[f];
    m.name = feature_cols[f].second.name;
    switch (feature_cols[f].second.role) {
      case ColumnSchema::Column::Role::numeric: m.kind = FeatureKind::numeric; break;
      case ColumnSchema::Column::Role::binary: m.kind = FeatureKind::binary; break;
      default: m.kind = FeatureKind::categorical; m.levels = levels[f]; break;
    }
  }
  out.validate();
  return out;
}

SurvivalDataset impute(const SurvivalDataset& d) {
  if (d.state.imputed) throw DataError("dataset already imputed");
  SurvivalDataset out = d;
  const Eigen::Index n = d.num_records();
  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    const FeatureMeta& meta = d.features[static_cast<std::size_t>(f)];
    std::vector<double> observed;
    observed.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r)
      if (!is_missing(d.x(r, f))) observed.push_back(d.x(r, f));
    if (observed.empty())
      throw DataError("column '" + meta.name + "' is entirely missing; cannot impute");
    if (observed.size() == static_cast<std::size_t>(n)) continue;

    double fill;
    if (meta.kind == FeatureKind::numeric) {
      // sorted accumulation keeps the fill value independent of row order
      std::sort(observed.begin(), observed.end());
      double sum = 0.0;
      for (double v : observed) sum += v;
      fill = sum / static_cast<double>(observed.size());
    } else {
      std::map<double, int> counts;
      for (double v : observed) counts[v]++;
      fill = counts.begin()->first;
      int best = counts.begin()->second;
      for (const auto& [value, count] : counts) {
        if (count > best) {  // ties keep the lowest value
          best = count;
          fill = value;
        }
      }
    }
    for (Eigen::Index r = 0; r < n; ++r)
      if (is_missing(out.x(r, f))) out.x(r, f) = fill;
  }
  out.state.imputed = true;
  return out;
}

SurvivalDataset one_hot_encode(const SurvivalDataset& d) {
  if (!d.state.imputed) throw DataError("one_hot_encode requires an imputed dataset");
  if (d.state.encoded) throw DataError("dataset already encoded");

  SurvivalDataset out;
  out.times = d.times;
  out.events = d.events;
  out.num_events = d.num_events;
  out.state = d.state;
  out.warnings = d.warnings;

  const Eigen::Index n = d.num_records();
  std::vector<Eigen::VectorXd> columns;
  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    const FeatureMeta& meta = d.features[static_cast<std::size_t>(f)];
    if (meta.kind != FeatureKind::categorical) {
      columns.push_back(d.x.col(f));
      out.features.push_back(meta);
      continue;
    }
    if (meta.levels.size() <= 1) {
      out.warnings.push_back("categorical feature '" + meta.name +
                             "' has a single level; encoded as one constant column");
    }
    for (std::size_t level = 0; level < std::max<std::size_t>(meta.levels.size(), 1); ++level) {
      Eigen::VectorXd col(n);
      for (Eigen::Index r = 0; r < n; ++r)
        col[r] = d.x(r, f) == static_cast<double>(level) ? 1.0 : 0.0;
      columns.push_back(col);
      FeatureMeta derived;
      derived.name = meta.name + "_" + (meta.levels.empty() ? "0" : meta.levels[level]);
      derived.kind = FeatureKind::binary;
      derived.origin = FeatureOrigin::one_hot_derived;
      derived.parent = meta.name;
      out.features.push_back(derived);
    }
  }
  out.x.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) out.x.col(static_cast<Eigen::Index>(c)) = columns[c];
  out.state.encoded = true;
  out.validate();
  return out;
}

NormalizeResult normalize(const SurvivalDataset& d) {
  if (!d.state.imputed || !d.state.encoded)
    throw DataError("normalize requires an imputed and encoded dataset");
  if (d.state.normalized) throw DataError("dataset already normalized");

  const Eigen::Index n = d.num_records();
  const Eigen::Index p = d.num_features();
  NormalizationParams params;
  params.mean.resize(p);
  params.stddev.resize(p);
  params.is_constant.assign(static_cast<std::size_t>(p), 0);

  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index f = 0; f < p; ++f) {
    for (Eigen::Index r = 0; r < n; ++r) column[static_cast<std::size_t>(r)] = d.x(r, f);
    // canonical accumulation order: results do not depend on row order
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n);  // population variance
    params.mean[f] = mean;
    if (var <= 0.0) {
      params.stddev[f] = 1.0;
      params.is_constant[static_cast<std::size_t>(f)] = 1;
    } else {
      params.stddev[f] = std::sqrt(var);
    }
  }

  NormalizeResult result;
  result.data = apply_normalization(d, params);
  for (Eigen::Index f = 0; f < p; ++f)
    if (params.is_constant[static_cast<std::size_t>(f)])
      result.data.warnings.push_back("feature '" + d.features[static_cast<std::size_t>(f)].name +
                                     "' is constant; centered to 0");
  result.params = params;
  return result;
}

SurvivalDataset apply_normalization(const SurvivalDataset& d, const NormalizationParams& p) {
  if (p.mean.size() != d.num_features())
    throw DataError("normalization parameters cover " + std::to_string(p.mean.size()) +
                    " columns but dataset has " + std::to_string(d.num_features()));
  SurvivalDataset out = d;
  for (Eigen::Index f = 0; f < d.num_features(); ++f)
    out.x.col(f) = (d.x.col(f).array() - p.mean[f]) / p.stddev[f];
  out.state.normalized = true;
  return out;
}

SurvivalDataset augment_synthetic(const SurvivalDataset& d, int n_synth, std::uint64_t seed) {
  if (n_synth < 0) throw DataError("n_synth must be nonnegative");
  if (n_synth == 0) return d;
  SurvivalDataset out = d;
  const Eigen::Index n = d.num_records();
  const Eigen::Index base = d.num_features();
  out.x.conservativeResize(Eigen::NoChange, base + n_synth);
  Rng rng(derive_seed(seed, "augment-synthetic"));
  for (int j = 0; j < n_synth; ++j) {
    const double p_j = rng.uniform01();
    for (Eigen::Index r = 0; r < n; ++r)
      out.x(r, base + j) = rng.bernoulli(p_j) ? 1.0 : 0.0;
    FeatureMeta meta;
    meta.name = "Synth" + std::to_string(j + 1);
    meta.kind = FeatureKind::binary;
    meta.origin = FeatureOrigin::synthetic;
    out.features.push_back(meta);
  }
  out.validate();
  return out;
}

SplitPlan kfold_split(const SurvivalDataset& d, int folds, double validation_fraction,
                      std::uint64_t seed) {
  if (folds < 2) throw DataError("fold count must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw DataError("validation fraction must lie in (0, 1)");
  const std::size_t n = static_cast<std::size_t>(d.num_records());
  if (static_cast<std::size_t>(folds) > n)
    throw DataError("fold count " + std::to_string(folds) + " exceeds record count " +
                    std::to_string(n));
  Rng rng(derive_seed(seed, "kfold"));
  std::vector<std::size_t> order = rng.permutation(n);
  SplitPlan plan;
  plan.fold_assignments.assign(n, 0);
  plan.num_folds = folds;
  plan.validation_fraction = validation_fraction;
  plan.seed = seed;
  for (std::size_t pos = 0; pos < n; ++pos)
    plan.fold_assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  return plan;
}

ToyDataset generate_toy_dataset(const ToySpec& spec) {
  if (spec.n_relevant < 1) throw DataError("toy generator needs n_relevant >= 1");
  if (spec.num_events < 1) throw DataError("toy generator needs K >= 1");
  if (spec.n_records < 1) throw DataError("toy generator needs n_records >= 1");
  if (spec.grid_bins < 2) throw DataError("toy generator needs at least 2 grid bins");

  const int K = spec.num_events;
  const int d = spec.n_relevant + spec.n_noise;
  const int T = spec.grid_bins;
  const Eigen::Index n = spec.n_records;

  Rng rng(derive_seed(spec.seed, "toy-dataset"));

  ToyGroundTruth truth;
  truth.grid_bins = T;
  truth.bin_width = 1.0;
  for (int j = 0; j < spec.n_relevant; ++j) truth.relevant.push_back(j);
  // positive coefficients: higher feature value always means higher hazard
  truth.coefficients.resize(K, spec.n_relevant);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n_relevant));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < spec.n_relevant; ++j)
      truth.coefficients(k, j) = rng.uniform(0.8, 1.2) * scale;
  // event 1 is the common event; later events are rarer
  truth.baseline_logit.resize(K);
  for (int k = 0; k < K; ++k) {
    const double rate = 0.03 * std::pow(0.5, k);
    truth.baseline_logit[k] = std::log(rate / (1.0 - rate));
  }

  std::vector<double> noise_p(static_cast<std::size_t>(spec.n_noise));
  for (auto& p : noise_p) p = rng.uniform01();

  SurvivalDataset data;
  data.x.resize(n, d);
  data.times.resize(n);
  data.events.resize(n);
  data.num_events = K;
  truth.true_cif.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(n, T));

  Eigen::VectorXd hazards(K);
  std::vector<double> cell_prob(static_cast<std::size_t>(K) * static_cast<std::size_t>(T));
  for (Eigen::Index i = 0; i < n; ++i) {
    // balanced binary signals keep every column on the same difference scale
    // as the skewed binary noise, so no ranking method is scale-favored
    for (int j = 0; j < spec.n_relevant; ++j) data.x(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    for (int j = 0; j < spec.n_noise; ++j)
      data.x(i, spec.n_relevant + j) =
          rng.bernoulli(noise_p[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;

    double total_hazard = 0.0;
    for (int k = 0; k < K; ++k) {
      double score = truth.baseline_logit[k];
      for (int j = 0; j < spec.n_relevant; ++j) score += truth.coefficients(k, j) * data.x(i, j);
      hazards[k] = 1.0 / (1.0 + std::exp(-score));
      total_hazard += hazards[k];
    }
    if (total_hazard > 0.95) {  // keep the geometric decay well defined
      hazards *= 0.95 / total_hazard;
      total_hazard = 0.95;
    }

    // joint distribution over (event, bin); final bin absorbs the tail
    double survival = 1.0;
    for (int t = 0; t < T - 1; ++t) {
      for (int k = 0; k < K; ++k)
        cell_prob[static_cast<std::size_t>(k * T + t)] = survival * hazards[k];
      survival *= 1.0 - total_hazard;
    }
    for (int k = 0; k < K; ++k)
      cell_prob[static_cast<std::size_t>(k * T + (T - 1))] = survival * hazards[k] / total_hazard;

    for (int k = 0; k < K; ++k) {
      double cum = 0.0;
      for (int t = 0; t < T; ++t) {
        cum += cell_prob[static_cast<std::size_t>(k * T + t)];
        truth.true_cif[static_cast<std::size_t>(k)](i, t) = cum;
      }
    }

    // sample (bin, event) from the joint distribution
    double u = rng.uniform01();
    int event_bin = T - 1;
    int event_type = K;
    double acc = 0.0;
    bool placed = false;
    for (int t = 0; t < T && !placed; ++t) {
      for (int k = 0; k < K && !placed; ++k) {
        acc += cell_prob[static_cast<std::size_t>(k * T + t)];
        if (u < acc) {
          event_bin = t;
          event_type = k + 1;
          placed = true;
        }
      }
    }

    if (spec.censoring_rate > 0.0 && rng.bernoulli(spec.censoring_rate)) {
      const int censor_bin = static_cast<int>(rng.uniform_below(static_cast<std::size_t>(event_bin) + 1));
      data.times[i] = static_cast<double>(censor_bin);
      data.events[i] = 0;
    } else {
      data.times[i] = static_cast<double>(event_bin);
      data.events[i] = event_type;
    }
  }

  for (int j = 0; j < d; ++j) {
    FeatureMeta meta;
    if (j < spec.n_relevant) {
      meta.name = "Signal" + std::to_string(j + 1);
      meta.kind = FeatureKind::binary;
    } else {
      meta.name = "Noise" + std::to_string(j - spec.n_relevant + 1);
      meta.kind = FeatureKind::binary;
      meta.origin = FeatureOrigin::synthetic;
    }
    data.features.push_back(meta);
  }
  data.state.imputed = true;
  data.state.encoded = true;
  data.validate();
  return ToyDataset{std::move(data), std::move(truth)};
}

namespace {

json feature_meta_to_json(const FeatureMeta& m) {
  json j;
  j["name"] = m.name;
  j["kind"] = to_string(m.kind);
  j["origin"] = to_string(m.origin);
  if (!m.parent.empty()) j["parent"] = m.parent;
  if (!m.levels.empty()) j["levels"] = m.levels;
  return j;
}

FeatureMeta feature_meta_from_json(const json& j) {
  FeatureMeta m;
  m.name = j.at("name").get<std::string>();
  m.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  m.origin = feature_origin_from_string(j.at("origin").get<std::string>());
  if (j.contains("parent")) m.parent = j["parent"].get<std::string>();
  if (j.contains("levels")) m.levels = j["levels"].get<std::vector<std::string>>();
  return m;
}

}  // namespace

void save_prepared(const SurvivalDataset& d, const NormalizationParams* params,
                   const std::string& dir) {
  std::filesystem::create_directories(dir);

  CsvTable table;
  for (const auto& meta : d.features) table.header.push_back(meta.name);
  table.header.push_back("time");
  table.header.push_back("event");
  table.rows.reserve(static_cast<std::size_t>(d.num_records()));
  for (Eigen::Index r = 0; r < d.num_records(); ++r) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(d.num_features()) + 2);
    for (Eigen::Index f = 0; f < d.num_features(); ++f) {
      double v = d.x(r, f);
      row.push_back(std::isnan(v) ? std::string() : format_double(v));
    }
    row.push_back(format_double(d.times[r]));
    row.push_back(std::to_string(d.events[r]));
    table.rows.push_back(std::move(row));
  }
  write_csv(table, dir + "/data.csv");

  json meta;
  meta["format"] = "survsel-prepared";
  meta["version"] = 1;
  meta["num_events"] = d.num_events;
  meta["state"] = {{"imputed", d.state.imputed},
                   {"encoded", d.state.encoded},
                   {"normalized", d.state.normalized}};
  meta["features"] = json::array();
  for (const auto& m : d.features) meta["features"].push_back(feature_meta_to_json(m));
  if (params) {
    json p;
    p["mean"] = std::vector<double>(params->mean.data(), params->mean.data() + params->mean.size());
    p["stddev"] =
        std::vector<double>(params->stddev.data(), params->stddev.data() + params->stddev.size());
    p["is_constant"] = params->is_constant;
    meta["normalization"] = p;
  }
  if (!d.warnings.empty()) meta["warnings"] = d.warnings;
  std::ofstream out(dir + "/meta.json");
  if (!out) throw DataError("cannot write " + dir + "/meta.json");
  out << meta.dump(2) << "\n";
}

PreparedData load_prepared(const std::string& dir) {
  std::ifstream in(dir + "/meta.json");
  if (!in) throw DataError("cannot open " + dir + "/meta.json");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw DataError("cannot parse " + dir + "/meta.json: " + e.what());
  }

  PreparedData out;
  out.data.num_events = meta.at("num_events").get<int>();
  out.data.state.imputed = meta.at("state").at("imputed").get<bool>();
  out.data.state.encoded = meta.at("state").at("encoded").get<bool>();
  out.data.state.normalized = meta.at("state").at("normalized").get<bool>();
  for (const auto& j : meta.at("features")) out.data.features.push_back(feature_meta_from_json(j));

  CsvTable table = read_csv(dir + "/data.csv");
  const std::size_t d = out.data.features.size();
  if (table.header.size() != d + 2)
    throw DataError("data.csv in " + dir + " does not match meta.json feature count");
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  out.data.x.setConstant(n, static_cast<Eigen::Index>(d), std::numeric_limits<double>::quiet_NaN());
  out.data.times.resize(n);
  out.data.events.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    for (std::size_t f = 0; f < d; ++f)
      if (!row[f].empty())
        out.data.x(r, static_cast<Eigen::Index>(f)) = parse_number(row[f], "feature", static_cast<std::size_t>(r) + 1);
    out.data.times[r] = parse_number(row[d], "time", static_cast<std::size_t>(r) + 1);
    out.data.events[r] = static_cast<int>(parse_number(row[d + 1], "event", static_cast<std::size_t>(r) + 1));
  }

  if (meta.contains("normalization")) {
    out.has_params = true;
    auto mean = meta["normalization"].at("mean").get<std::vector<double>>();
    auto sd = meta["normalization"].at("stddev").get<std::vector<double>>();
    out.params.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    out.params.stddev = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    out.params.is_constant = meta["normalization"].at("is_constant").get<std::vector<std::uint8_t>>();
  }
  out.data.validate();
  return out;
}

}  // namespace survsel
