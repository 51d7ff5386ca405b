#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "survsel/dataset.hpp"
#include "survsel/rng.hpp"

using namespace survsel;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("survsel-unit-" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

/// Small clinical-style fixture: one numeric, one binary, one categorical
/// column, with missing cells in each.
struct Fixture {
  fs::path dir;
  fs::path csv;
  fs::path schema;

  explicit Fixture(const std::string& tag) : dir(temp_dir(tag)) {
    csv = dir / "data.csv";
    schema = dir / "schema.json";
    write_file(csv,
               "age,smoker,stage,time,event\n"
               "50,1,II,12,1\n"
               "60,,I,3,0\n"
               ",0,III,26.5,2\n"
               "70,0,,8,1\n"
               "40,1,I,40,0\n");
    write_file(schema,
               "{\"columns\": {\"age\": \"numeric\", \"smoker\": \"binary\","
               " \"stage\": \"categorical\", \"time\": \"time\","
               " \"event\": \"event\"}, \"num_events\": 2}");
  }
};

SurvivalDataset permute_rows(const SurvivalDataset& d, const std::vector<std::size_t>& order) {
  return subset(d, order);
}

}  // namespace

TEST_CASE("csv loading keeps roles, missing cells, and sorted categorical levels") {
  Fixture fx("load");
  ColumnSchema schema = load_schema(fx.schema.string());
  SurvivalDataset d = load_csv(fx.csv.string(), schema);

  CHECK(d.num_records() == 5);
  CHECK(d.num_features() == 3);
  CHECK(d.num_events == 2);
  const int age = d.feature_index("age");
  const int smoker = d.feature_index("smoker");
  const int stage = d.feature_index("stage");
  CHECK(d.x(0, age) == 50.0);
  CHECK(std::isnan(d.x(2, age)));
  CHECK(std::isnan(d.x(1, smoker)));
  CHECK(d.features[static_cast<std::size_t>(stage)].levels ==
        std::vector<std::string>{"I", "II", "III"});
  // level codes follow the sorted level list
  CHECK(d.x(0, stage) == 1.0);  // II
  CHECK(d.x(1, stage) == 0.0);  // I
  CHECK(d.x(2, stage) == 2.0);  // III
  CHECK(std::isnan(d.x(3, stage)));
  CHECK(d.times[2] == 26.5);
  CHECK(d.events[2] == 2);
  CHECK_FALSE(d.state.imputed);
}

TEST_CASE("csv loading rejects malformed structure") {
  Fixture fx("load-bad");
  ColumnSchema schema = load_schema(fx.schema.string());

  SUBCASE("negative time") {
    write_file(fx.csv, "age,smoker,stage,time,event\n50,1,II,-1,1\n");
    CHECK_THROWS_AS(load_csv(fx.csv.string(), schema), DataError);
  }
  SUBCASE("event above K") {
    write_file(fx.csv, "age,smoker,stage,time,event\n50,1,II,5,3\n");
    CHECK_THROWS_AS(load_csv(fx.csv.string(), schema), DataError);
  }
  SUBCASE("non-integer event") {
    write_file(fx.csv, "age,smoker,stage,time,event\n50,1,II,5,1.5\n");
    CHECK_THROWS_AS(load_csv(fx.csv.string(), schema), DataError);
  }
  SUBCASE("ragged row") {
    write_file(fx.csv, "age,smoker,stage,time,event\n50,1,II,5\n");
    CHECK_THROWS_AS(load_csv(fx.csv.string(), schema), DataError);
  }
  SUBCASE("column missing from schema") {
    write_file(fx.csv, "age,smoker,stage,extra,time,event\n50,1,II,9,5,1\n");
    CHECK_THROWS_AS(load_csv(fx.csv.string(), schema), DataError);
  }
  SUBCASE("K inferred from data when schema omits it") {
    write_file(fx.csv, "age,smoker,stage,time,event\n50,1,II,5,2\n40,0,I,3,0\n");
    ColumnSchema open = schema;
    open.num_events = -1;
    CHECK(load_csv(fx.csv.string(), open).num_events == 2);
  }
}

TEST_CASE("imputation fills numeric means and modal categories") {
  Fixture fx("impute");
  SurvivalDataset d = load_csv(fx.csv.string(), load_schema(fx.schema.string()));
  SurvivalDataset imp = impute(d);

  const int age = d.feature_index("age");
  const int smoker = d.feature_index("smoker");
  const int stage = d.feature_index("stage");
  CHECK(imp.x(2, age) == doctest::Approx((50.0 + 60.0 + 70.0 + 40.0) / 4.0).epsilon(1e-15));
  // smoker observed values {1,0,0,1}: tie on count, lowest value wins
  CHECK(imp.x(1, smoker) == 0.0);
  // stage observed levels {II,I,III,I}: mode is I (code 0)
  CHECK(imp.x(3, stage) == 0.0);
  CHECK(imp.state.imputed);
  CHECK_THROWS_AS(impute(imp), DataError);
}

TEST_CASE("imputation rejects a fully missing column") {
  Fixture fx("impute-empty");
  write_file(fx.csv,
             "age,smoker,stage,time,event\n"
             ",1,II,12,1\n"
             ",0,I,3,0\n");
  SurvivalDataset d = load_csv(fx.csv.string(), load_schema(fx.schema.string()));
  CHECK_THROWS_AS(impute(d), DataError);
}

TEST_CASE("one-hot encoding expands categorical features") {
  Fixture fx("encode");
  SurvivalDataset d = impute(load_csv(fx.csv.string(), load_schema(fx.schema.string())));
  SurvivalDataset enc = one_hot_encode(d);

  CHECK(enc.num_features() == 2 + 3);
  CHECK(enc.feature_index("stage_I") >= 0);
  CHECK(enc.feature_index("stage_II") >= 0);
  CHECK(enc.feature_index("stage_III") >= 0);
  const int s1 = enc.feature_index("stage_I");
  const int s2 = enc.feature_index("stage_II");
  const int s3 = enc.feature_index("stage_III");
  // row 0 was stage II
  CHECK(enc.x(0, s1) == 0.0);
  CHECK(enc.x(0, s2) == 1.0);
  CHECK(enc.x(0, s3) == 0.0);
  // each row activates exactly one stage column
  for (Eigen::Index r = 0; r < enc.num_records(); ++r)
    CHECK(enc.x(r, s1) + enc.x(r, s2) + enc.x(r, s3) == 1.0);
  const auto& meta = enc.features[static_cast<std::size_t>(s2)];
  CHECK(meta.kind == FeatureKind::binary);
  CHECK(meta.origin == FeatureOrigin::one_hot_derived);
  CHECK(meta.parent == "stage");
  CHECK_THROWS_AS(one_hot_encode(enc), DataError);
}

TEST_CASE("encoding requires imputation and warns on single-level categories") {
  Fixture fx("encode-guards");
  SurvivalDataset raw = load_csv(fx.csv.string(), load_schema(fx.schema.string()));
  CHECK_THROWS_AS(one_hot_encode(raw), DataError);

  write_file(fx.csv,
             "age,smoker,stage,time,event\n"
             "50,1,II,12,1\n"
             "60,0,II,3,0\n");
  SurvivalDataset single = impute(load_csv(fx.csv.string(), load_schema(fx.schema.string())));
  SurvivalDataset enc = one_hot_encode(single);
  CHECK(enc.feature_index("stage_II") >= 0);
  bool warned = false;
  for (const auto& w : enc.warnings)
    if (w.find("single level") != std::string::npos) warned = true;
  CHECK(warned);
}

TEST_CASE("normalization standardizes with population variance") {
  SurvivalDataset d;
  d.x.resize(3, 2);
  d.x << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
  d.times.resize(3);
  d.times << 1.0, 2.0, 3.0;
  d.events.resize(3);
  d.events << 1, 0, 1;
  d.num_events = 1;
  d.features = {FeatureMeta{"a", FeatureKind::numeric, FeatureOrigin::original, "", {}},
                FeatureMeta{"c", FeatureKind::numeric, FeatureOrigin::original, "", {}}};
  d.state.imputed = true;
  d.state.encoded = true;

  NormalizeResult res = normalize(d);
  const double z = 1.0 / std::sqrt(2.0 / 3.0);
  CHECK(res.data.x(0, 0) == doctest::Approx(-z).epsilon(1e-14));
  CHECK(res.data.x(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(res.data.x(2, 0) == doctest::Approx(z).epsilon(1e-14));
  CHECK(res.params.mean[0] == doctest::Approx(2.0));
  CHECK(res.params.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  // constant column: centered, flagged, stddev kept at 1
  CHECK(res.params.is_constant[1] == 1);
  CHECK(res.params.stddev[1] == 1.0);
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(res.data.x(r, 1) == 0.0);
  CHECK(res.data.state.normalized);
  CHECK_THROWS_AS(normalize(res.data), DataError);

  SUBCASE("stored statistics transfer to unseen data") {
    SurvivalDataset test = d;
    test.x(0, 0) = 4.0;
    SurvivalDataset applied = apply_normalization(test, res.params);
    CHECK(applied.x(0, 0) == doctest::Approx((4.0 - 2.0) / std::sqrt(2.0 / 3.0)).epsilon(1e-14));

    NormalizationParams wrong = res.params;
    wrong.mean.resize(1);
    CHECK_THROWS_AS(apply_normalization(test, wrong), DataError);
  }
}

TEST_CASE("preprocessing statistics are independent of record storage order") {
  ToySpec spec;
  spec.n_records = 64;
  spec.n_relevant = 3;
  spec.n_noise = 2;
  spec.num_events = 2;
  spec.seed = 9;
  SurvivalDataset d = generate_toy_dataset(spec).data;
  // knock out a few cells so imputation has work to do
  d.state.imputed = false;
  d.state.encoded = false;
  d.x(3, 0) = std::numeric_limits<double>::quiet_NaN();
  d.x(10, 1) = std::numeric_limits<double>::quiet_NaN();
  d.x(20, 3) = std::numeric_limits<double>::quiet_NaN();

  Rng rng(derive_seed(123, "unit-order"));
  std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(d.num_records()));
  SurvivalDataset shuffled = permute_rows(d, order);
  shuffled.state = d.state;

  SurvivalDataset imp_a = impute(d);
  SurvivalDataset imp_b = impute(shuffled);
  imp_a.state.encoded = imp_b.state.encoded = true;
  NormalizeResult na = normalize(imp_a);
  NormalizeResult nb = normalize(imp_b);
  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    CHECK(na.params.mean[f] == nb.params.mean[f]);
    CHECK(na.params.stddev[f] == nb.params.stddev[f]);
  }
}

TEST_CASE("synthetic augmentation appends seeded Bernoulli noise columns") {
  ToySpec spec;
  spec.n_records = 200;
  spec.seed = 4;
  SurvivalDataset d = generate_toy_dataset(spec).data;

  SurvivalDataset a = augment_synthetic(d, 3, 77);
  CHECK(a.num_features() == d.num_features() + 3);
  CHECK(a.features.back().name == "Synth3");
  CHECK(a.features.back().origin == FeatureOrigin::synthetic);
  CHECK(a.features.back().kind == FeatureKind::binary);
  for (Eigen::Index r = 0; r < a.num_records(); ++r)
    for (Eigen::Index f = d.num_features(); f < a.num_features(); ++f)
      CHECK((a.x(r, f) == 0.0 || a.x(r, f) == 1.0));
  // original columns untouched
  CHECK(a.x.leftCols(d.num_features()) == d.x);

  SurvivalDataset b = augment_synthetic(d, 3, 77);
  CHECK(a.x == b.x);
  SurvivalDataset c = augment_synthetic(d, 3, 78);
  CHECK(a.x.rightCols(3) != c.x.rightCols(3));
  CHECK(augment_synthetic(d, 0, 1).num_features() == d.num_features());
  CHECK_THROWS_AS(augment_synthetic(d, -1, 1), DataError);
}

TEST_CASE("k-fold split partitions records with balanced folds") {
  ToySpec spec;
  spec.n_records = 103;
  spec.seed = 2;
  SurvivalDataset d = generate_toy_dataset(spec).data;
  SplitPlan plan = kfold_split(d, 5, 0.2, 42);

  std::vector<int> sizes(5, 0);
  for (int f : plan.fold_assignments) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    sizes[static_cast<std::size_t>(f)]++;
  }
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  CHECK(*hi - *lo <= 1);

  for (int fold = 0; fold < 5; ++fold) {
    auto test = plan.test_indices(fold);
    auto train = plan.train_indices(fold);
    CHECK(test.size() + train.size() == 103);
    std::set<std::size_t> seen(test.begin(), test.end());
    for (std::size_t i : train) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 103);

    auto fv = plan.fit_validation(fold);
    CHECK(fv.fit.size() + fv.validation.size() == train.size());
    CHECK(fv.validation.size() ==
          static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(train.size()))));
    std::set<std::size_t> train_set(train.begin(), train.end());
    for (std::size_t i : fv.validation) CHECK(train_set.count(i) == 1);
    for (std::size_t i : fv.fit) CHECK(train_set.count(i) == 1);
    std::set<std::size_t> val_set(fv.validation.begin(), fv.validation.end());
    for (std::size_t i : fv.fit) CHECK(val_set.count(i) == 0);
  }

  SplitPlan again = kfold_split(d, 5, 0.2, 42);
  CHECK(plan.fold_assignments == again.fold_assignments);
  SplitPlan other = kfold_split(d, 5, 0.2, 43);
  CHECK(plan.fold_assignments != other.fold_assignments);

  CHECK_THROWS_AS(kfold_split(d, 1, 0.2, 1), DataError);
  CHECK_THROWS_AS(kfold_split(d, 5, 0.0, 1), DataError);
  CHECK_THROWS_AS(kfold_split(d, 200, 0.2, 1), DataError);
}

TEST_CASE("toy generator exposes its ground truth") {
  ToySpec spec;
  spec.n_records = 400;
  spec.n_relevant = 2;
  spec.n_noise = 3;
  spec.num_events = 2;
  spec.seed = 11;
  spec.grid_bins = 60;
  ToyDataset toy = generate_toy_dataset(spec);
  const SurvivalDataset& d = toy.data;
  const ToyGroundTruth& g = toy.truth;

  CHECK(d.num_records() == 400);
  CHECK(d.num_features() == 5);
  CHECK(d.num_events == 2);
  CHECK(d.state.imputed);
  CHECK(d.state.encoded);
  CHECK_FALSE(d.state.normalized);
  CHECK(d.features[0].name == "Signal1");
  CHECK(d.features[1].name == "Signal2");
  CHECK(d.features[2].name == "Noise1");
  CHECK(d.features[2].kind == FeatureKind::binary);
  CHECK(g.relevant == std::vector<int>{0, 1});
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j) CHECK(g.coefficients(k, j) > 0.0);

  // joint cell probabilities form a distribution: the per-event CIFs are
  // nondecreasing and their final values sum to one
  REQUIRE(g.true_cif.size() == 2);
  for (Eigen::Index i = 0; i < d.num_records(); ++i) {
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
      for (int t = 1; t < g.grid_bins; ++t)
        CHECK(g.true_cif[static_cast<std::size_t>(k)](i, t) >=
              g.true_cif[static_cast<std::size_t>(k)](i, t - 1));
      total += g.true_cif[static_cast<std::size_t>(k)](i, g.grid_bins - 1);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  // uncensored spec: every record carries a real event inside the grid
  for (Eigen::Index i = 0; i < d.num_records(); ++i) {
    CHECK(d.events[i] >= 1);
    CHECK(d.times[i] >= 0.0);
    CHECK(d.times[i] <= static_cast<double>(spec.grid_bins - 1));
    CHECK(d.times[i] == std::floor(d.times[i]));
  }

  SUBCASE("same seed reproduces the dataset") {
    ToyDataset again = generate_toy_dataset(spec);
    CHECK(toy.data.x == again.data.x);
    CHECK(toy.data.times == again.data.times);
    CHECK(toy.data.events == again.data.events);
  }

  SUBCASE("censoring produces earlier censored copies") {
    ToySpec cens = spec;
    cens.censoring_rate = 0.5;
    ToyDataset tc = generate_toy_dataset(cens);
    int censored = 0;
    for (Eigen::Index i = 0; i < tc.data.num_records(); ++i)
      if (tc.data.events[i] == 0) ++censored;
    CHECK(censored > 100);
    CHECK(censored < 300);
  }

  SUBCASE("higher signal value means earlier expected event") {
    // positive coefficients: records in the top signal quartile should fail
    // faster on average than the bottom quartile
    std::vector<double> score(static_cast<std::size_t>(d.num_records()));
    for (Eigen::Index i = 0; i < d.num_records(); ++i) score[static_cast<std::size_t>(i)] = d.x(i, 0) + d.x(i, 1);
    std::vector<std::size_t> idx(score.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    double low_mean = 0.0, high_mean = 0.0;
    const std::size_t q = idx.size() / 4;
    for (std::size_t i = 0; i < q; ++i) {
      low_mean += d.times[static_cast<Eigen::Index>(idx[i])];
      high_mean += d.times[static_cast<Eigen::Index>(idx[idx.size() - 1 - i])];
    }
    CHECK(high_mean / static_cast<double>(q) < low_mean / static_cast<double>(q));
  }
}

TEST_CASE("prepared datasets round-trip through disk bitwise") {
  ToySpec spec;
  spec.n_records = 50;
  spec.n_relevant = 2;
  spec.n_noise = 1;
  spec.num_events = 2;
  spec.censoring_rate = 0.3;
  spec.seed = 5;
  SurvivalDataset d = generate_toy_dataset(spec).data;
  NormalizeResult norm = normalize(d);

  fs::path dir = temp_dir("prepared");
  save_prepared(norm.data, &norm.params, (dir / "a").string());
  PreparedData loaded = load_prepared((dir / "a").string());

  CHECK(loaded.data.x == norm.data.x);
  CHECK(loaded.data.times == norm.data.times);
  CHECK(loaded.data.events == norm.data.events);
  CHECK(loaded.data.num_events == 2);
  CHECK(loaded.data.state.normalized);
  REQUIRE(loaded.data.features.size() == norm.data.features.size());
  for (std::size_t f = 0; f < loaded.data.features.size(); ++f) {
    CHECK(loaded.data.features[f].name == norm.data.features[f].name);
    CHECK(loaded.data.features[f].kind == norm.data.features[f].kind);
    CHECK(loaded.data.features[f].origin == norm.data.features[f].origin);
  }
  REQUIRE(loaded.has_params);
  CHECK(loaded.params.mean == norm.params.mean);
  CHECK(loaded.params.stddev == norm.params.stddev);
  CHECK(loaded.params.is_constant == norm.params.is_constant);

  SUBCASE("second save is byte-identical") {
    save_prepared(norm.data, &norm.params, (dir / "b").string());
    std::ifstream fa(dir / "a" / "data.csv", std::ios::binary);
    std::ifstream fb(dir / "b" / "data.csv", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
  }

  SUBCASE("missing directory raises a data error") {
    CHECK_THROWS_AS(load_prepared((dir / "missing").string()), DataError);
  }
}

TEST_CASE("subset keeps metadata and selects the requested rows") {
  ToySpec spec;
  spec.n_records = 10;
  spec.seed = 8;
  SurvivalDataset d = generate_toy_dataset(spec).data;
  SurvivalDataset s = subset(d, {7, 2, 2});
  CHECK(s.num_records() == 3);
  CHECK(s.x.row(0) == d.x.row(7));
  CHECK(s.x.row(1) == d.x.row(2));
  CHECK(s.x.row(2) == d.x.row(2));
  CHECK(s.times[0] == d.times[7]);
  CHECK(s.events[1] == d.events[2]);
  CHECK(s.features.size() == d.features.size());
  CHECK(s.num_events == d.num_events);
}
