#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "survsel/network.hpp"
#include "survsel/rng.hpp"

using namespace survsel;

namespace {

NetworkConfig base_config(Variant variant, int K = 2, int T = 10, int d = 5) {
  NetworkConfig c;
  c.num_events = K;
  c.num_bins = T;
  c.bin_width = 1.0;
  c.input_dim = d;
  c.shared_layers = 1;
  c.shared_width = 4;
  c.cause_layers.assign(static_cast<std::size_t>(K), 1);
  c.cause_width.assign(static_cast<std::size_t>(K), 4);
  c.variant = variant;
  return c;
}

Eigen::MatrixXd random_batch(int rows, int cols, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "unit-batch"));
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("config validation rejects inconsistent setups") {
  NetworkConfig c = base_config(Variant::plain);
  CHECK_NOTHROW(c.validate());

  SUBCASE("filter variant needs a selection") {
    c.variant = Variant::filter;
    CHECK_THROWS_AS(c.validate(), DataError);
  }
  SUBCASE("non-filter variants must not carry a selection") {
    FeatureSelection sel;
    sel.per_event = {{0}, {1}};
    c.selection = sel;
    CHECK_THROWS_AS(c.validate(), DataError);
  }
  SUBCASE("selected indices must exist") {
    c.variant = Variant::filter;
    FeatureSelection sel;
    sel.per_event = {{0, 5}, {1}};  // 5 is out of range for d=5
    c.selection = sel;
    CHECK_THROWS_AS(c.validate(), DataError);
  }
  SUBCASE("every event needs at least one feature under the filter variant") {
    c.variant = Variant::filter;
    FeatureSelection sel;
    sel.per_event = {{0}, {}};
    c.selection = sel;
    CHECK_THROWS_AS(c.validate(), DataError);
  }
  SUBCASE("cause stack lists must match the event count") {
    c.cause_layers = {1};
    CHECK_THROWS_AS(c.validate(), DataError);
  }
  SUBCASE("dimensions must be positive") {
    c.input_dim = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
  }
}

TEST_CASE("built parameters have the documented shapes") {
  NetworkConfig c = base_config(Variant::plain);
  Parameters p = build(c, 42);

  REQUIRE(p.shared.size() == 1);
  CHECK(p.shared[0].w.rows() == 4);
  CHECK(p.shared[0].w.cols() == 5);
  CHECK(p.shared[0].b == Eigen::VectorXd::Zero(4));

  REQUIRE(p.cause.size() == 2);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(p.cause[static_cast<std::size_t>(k)].size() == 1);
    // cause stacks see the shared output next to the full input
    CHECK(p.cause[static_cast<std::size_t>(k)][0].w.rows() == 4);
    CHECK(p.cause[static_cast<std::size_t>(k)][0].w.cols() == 4 + 5);
    CHECK(p.head[static_cast<std::size_t>(k)].w.rows() == 10);
    CHECK(p.head[static_cast<std::size_t>(k)].w.cols() == 4);
    CHECK(p.head[static_cast<std::size_t>(k)].b == Eigen::VectorXd::Zero(10));
  }
  CHECK(p.sparse_shared.size() == 0);
  CHECK(p.sparse_cause.empty());

  // symmetric uniform fan-in/fan-out initialization stays inside its bound
  const double bound = std::sqrt(6.0 / (4 + 5));
  for (Eigen::Index r = 0; r < p.shared[0].w.rows(); ++r)
    for (Eigen::Index col = 0; col < p.shared[0].w.cols(); ++col)
      CHECK(std::abs(p.shared[0].w(r, col)) <= bound);

  SUBCASE("the seed pins the draw") {
    Parameters q = build(c, 42);
    CHECK(p.shared[0].w == q.shared[0].w);
    CHECK(p.head[1].w == q.head[1].w);
    Parameters r = build(c, 43);
    CHECK(p.shared[0].w != r.shared[0].w);
  }
  SUBCASE("sparse variant adds unit input scalings") {
    NetworkConfig sc = base_config(Variant::sparse);
    Parameters sp = build(sc, 42);
    CHECK(sp.sparse_shared == Eigen::VectorXd::Ones(5));
    REQUIRE(sp.sparse_cause.size() == 2);
    CHECK(sp.sparse_cause[0] == Eigen::VectorXd::Ones(4 + 5));
  }
}

TEST_CASE("tensor views cover every parameter exactly once") {
  NetworkConfig c = base_config(Variant::sparse);
  Parameters p = build(c, 1);
  auto views = tensor_views(p);
  Eigen::Index total = 0;
  for (const auto& v : views) total += v.size;
  // shared W+b, two cause W+b, two head W+b, sparse masks
  const Eigen::Index expected = (4 * 5 + 4) + 2 * (4 * 9 + 4) + 2 * (10 * 4 + 10) + 5 + 2 * 9;
  CHECK(total == expected);

  Parameters z = zeros_like(p);
  for (const auto& v : tensor_views(z))
    for (Eigen::Index i = 0; i < v.size; ++i) CHECK(v.data[i] == 0.0);
  CHECK(z.shared[0].w.rows() == p.shared[0].w.rows());
}

TEST_CASE("probabilities form one distribution over all event and bin cells") {
  for (Variant variant : {Variant::plain, Variant::sparse}) {
    NetworkConfig c = base_config(variant, 3, 7, 6);
    Parameters p = build(c, 5);
    Eigen::MatrixXd x = random_batch(17, 6, 2);
    Eigen::MatrixXd prob = forward(p, c, x);
    REQUIRE(prob.rows() == 3 * 7);
    REQUIRE(prob.cols() == 17);
    for (Eigen::Index col = 0; col < prob.cols(); ++col) {
      CHECK(prob.col(col).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(prob.col(col).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("input scalings multiply features one to one") {
  NetworkConfig c = base_config(Variant::sparse, 1, 4, 3);
  Parameters p = build(c, 3);
  p.sparse_shared << 0.0, 1.0, 0.5;

  Eigen::MatrixXd x(1, 3);
  x << 1.0, 2.0, 3.0;
  ForwardCache cache;
  forward(p, c, x, &cache);
  CHECK(cache.shared_in(0, 0) == 0.0);
  CHECK(cache.shared_in(1, 0) == 2.0);
  CHECK(cache.shared_in(2, 0) == 1.5);

  // the cause mask scales the concatenated shared output and raw input
  CHECK(cache.cause_masked[0].rows() == 4 + 3);
  p.sparse_cause[0].setZero();
  Eigen::MatrixXd prob = forward(p, c, x, &cache);
  CHECK(cache.cause_masked[0] == Eigen::MatrixXd::Zero(7, 1));
  // with a zeroed cause input only the biases act: a uniform distribution
  for (Eigen::Index r = 0; r < prob.rows(); ++r)
    CHECK(prob(r, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("unit input scalings reproduce the unscaled network exactly") {
  NetworkConfig pc = base_config(Variant::plain, 2, 6, 4);
  NetworkConfig sc = base_config(Variant::sparse, 2, 6, 4);
  Parameters pp = build(pc, 11);
  Parameters sp = build(sc, 11);
  // identical dense draws under the same seed; scalings start at one
  CHECK(pp.shared[0].w == sp.shared[0].w);

  Eigen::MatrixXd x = random_batch(9, 4, 8);
  CHECK(forward(pp, pc, x) == forward(sp, sc, x));
}

TEST_CASE("unselected features cannot influence the filter variant") {
  NetworkConfig c = base_config(Variant::filter, 2, 5, 6);
  FeatureSelection sel;
  sel.per_event = {{0, 2}, {0, 4}};
  sel.shared = {0};
  sel.sizes = {2, 2};
  c.selection = sel;
  Parameters p = build(c, 9);

  Eigen::MatrixXd x = random_batch(5, 6, 3);
  Eigen::MatrixXd before = forward(p, c, x);
  Eigen::MatrixXd perturbed = x;
  perturbed.col(1).array() += 100.0;
  perturbed.col(3).array() -= 7.0;
  perturbed.col(5).array() *= -3.0;
  CHECK(forward(p, c, perturbed) == before);

  // a selected feature does influence the output
  Eigen::MatrixXd active = x;
  active.col(0).array() += 1.0;
  CHECK(forward(p, c, active) != before);
}

TEST_CASE("an empty shared selection removes the shared stack") {
  NetworkConfig c = base_config(Variant::filter, 2, 5, 6);
  FeatureSelection sel;
  sel.per_event = {{0, 2}, {1, 4}};
  sel.shared = {};  // disjoint per-event sets
  sel.sizes = {2, 2};
  c.selection = sel;
  CHECK_FALSE(c.has_shared());
  CHECK(c.shared_output_dim() == 0);
  CHECK(c.cause_input_dim(0) == 2);

  Parameters p = build(c, 4);
  CHECK(p.shared.empty());
  CHECK(p.cause[0][0].w.cols() == 2);

  Eigen::MatrixXd x = random_batch(4, 6, 1);
  Eigen::MatrixXd prob = forward(p, c, x);
  for (Eigen::Index col = 0; col < prob.cols(); ++col)
    CHECK(prob.col(col).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cumulative incidence accumulates cell probabilities per event") {
  // two events, three bins, one record; columns sum to one
  Eigen::MatrixXd prob(6, 1);
  prob << 0.1, 0.2, 0.0, 0.3, 0.3, 0.1;

  CHECK(cif(prob, 3, 0, 0)(0) == doctest::Approx(0.1));
  CHECK(cif(prob, 3, 0, 1)(0) == doctest::Approx(0.3));
  CHECK(cif(prob, 3, 0, 2)(0) == doctest::Approx(0.3));
  CHECK(cif(prob, 3, 1, 0)(0) == doctest::Approx(0.3));
  CHECK(cif(prob, 3, 1, 2)(0) == doctest::Approx(0.7));
  CHECK(cif_value(prob, 3, 0, 1, 0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(cif(prob, 3, 0, 3), DataError);

  SUBCASE("network outputs give nondecreasing curves") {
    NetworkConfig c = base_config(Variant::plain, 2, 8, 4);
    Parameters p = build(c, 6);
    Eigen::MatrixXd out = forward(p, c, random_batch(6, 4, 4));
    for (int k = 0; k < 2; ++k) {
      Eigen::RowVectorXd prev = cif(out, 8, k, 0);
      for (int t = 1; t < 8; ++t) {
        Eigen::RowVectorXd cur = cif(out, 8, k, t);
        for (Eigen::Index col = 0; col < cur.size(); ++col) CHECK(cur[col] >= prev[col]);
        prev = cur;
      }
    }
  }
}

TEST_CASE("horizons map to the last fully covered bin") {
  // monthly bins: month 12 ends bin 11
  CHECK(map_horizon_to_bin(12.0, 1.0, 121) == 11);
  CHECK(map_horizon_to_bin(1.0, 1.0, 121) == 0);
  CHECK(map_horizon_to_bin(0.5, 1.0, 121) == 0);
  bool clamped = false;
  CHECK(map_horizon_to_bin(200.0, 1.0, 121, &clamped) == 120);
  CHECK(clamped);
  clamped = true;
  CHECK(map_horizon_to_bin(60.0, 1.0, 121, &clamped) == 59);
  CHECK_FALSE(clamped);
  CHECK(map_horizon_to_bin(24.0, 2.0, 20) == 11);
  CHECK_THROWS_AS(map_horizon_to_bin(0.0, 1.0, 10), DataError);

  SUBCASE("observed times fall into their covering bin") {
    CHECK(time_to_bin(5.7, 1.0, 121) == 5);
    CHECK(time_to_bin(0.0, 1.0, 121) == 0);
    bool c2 = false;
    CHECK(time_to_bin(500.0, 1.0, 121, &c2) == 120);
    CHECK(c2);
  }
}

TEST_CASE("first-layer weights move with a feature reordering") {
  NetworkConfig c = base_config(Variant::plain, 2, 6, 5);
  Parameters p = build(c, 15);
  Eigen::MatrixXd x = random_batch(7, 5, 9);

  // permute the feature columns and carry the matching weight columns along
  std::vector<int> perm{3, 0, 4, 1, 2};  // new column j reads old column perm[j]
  Eigen::MatrixXd xp(x.rows(), x.cols());
  for (int j = 0; j < 5; ++j) xp.col(j) = x.col(perm[static_cast<std::size_t>(j)]);

  Parameters pp = p;
  for (int j = 0; j < 5; ++j) {
    pp.shared[0].w.col(j) = p.shared[0].w.col(perm[static_cast<std::size_t>(j)]);
    for (int k = 0; k < 2; ++k)
      pp.cause[static_cast<std::size_t>(k)][0].w.col(4 + j) =
          p.cause[static_cast<std::size_t>(k)][0].w.col(4 + perm[static_cast<std::size_t>(j)]);
  }

  Eigen::MatrixXd a = forward(p, c, x);
  Eigen::MatrixXd b = forward(pp, c, xp);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  NetworkConfig c = base_config(Variant::filter, 2, 6, 5);
  FeatureSelection sel;
  sel.per_event = {{0, 2, 3}, {1, 2}};
  sel.shared = {2};
  sel.sizes = {3, 2};
  c.selection = sel;

  Checkpoint ckpt;
  ckpt.config = c;
  ckpt.params = build(c, 77);
  NormalizationParams norm;
  norm.mean = Eigen::VectorXd::LinSpaced(5, -1.0, 3.0);
  norm.stddev = Eigen::VectorXd::LinSpaced(5, 0.5, 2.5);
  norm.is_constant = {0, 0, 1, 0, 0};
  ckpt.normalization = norm;
  for (int f = 0; f < 5; ++f) {
    FeatureMeta m;
    m.name = "feat" + std::to_string(f);
    m.kind = f == 2 ? FeatureKind::binary : FeatureKind::numeric;
    ckpt.features.push_back(m);
  }

  auto dir = std::filesystem::temp_directory_path() / "survsel-unit-ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.json").string();
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.config.num_events == 2);
  CHECK(loaded.config.variant == Variant::filter);
  REQUIRE(loaded.config.selection.has_value());
  CHECK(loaded.config.selection->per_event == sel.per_event);
  CHECK(loaded.config.selection->shared == sel.shared);
  REQUIRE(loaded.params.shared.size() == ckpt.params.shared.size());
  CHECK(loaded.params.shared[0].w == ckpt.params.shared[0].w);
  CHECK(loaded.params.cause[1][0].w == ckpt.params.cause[1][0].w);
  CHECK(loaded.params.head[0].b == ckpt.params.head[0].b);
  REQUIRE(loaded.normalization.has_value());
  CHECK(loaded.normalization->mean == norm.mean);
  CHECK(loaded.normalization->stddev == norm.stddev);
  CHECK(loaded.normalization->is_constant == norm.is_constant);
  REQUIRE(loaded.features.size() == 5);
  CHECK(loaded.features[2].kind == FeatureKind::binary);

  // the restored model predicts identically
  Eigen::MatrixXd x = random_batch(4, 5, 12);
  CHECK(forward(loaded.params, loaded.config, x) == forward(ckpt.params, ckpt.config, x));

  SUBCASE("sparse scalings survive the round trip") {
    NetworkConfig scfg = base_config(Variant::sparse, 1, 3, 2);
    Checkpoint sc;
    sc.config = scfg;
    sc.params = build(scfg, 3);
    sc.params.sparse_shared << 0.25, -1.5;
    const std::string spath = (dir / "sparse.json").string();
    save_checkpoint(sc, spath);
    Checkpoint sl = load_checkpoint(spath);
    CHECK(sl.params.sparse_shared == sc.params.sparse_shared);
    CHECK(sl.params.sparse_cause[0] == sc.params.sparse_cause[0]);
  }
  SUBCASE("malformed files are rejected") {
    const std::string bad = (dir / "bad.json").string();
    std::ofstream(bad) << "{\"format\": \"something-else\"}";
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    std::ofstream(bad) << "not json";
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), DataError);
  }
}

TEST_CASE("forward rejects mismatched input width") {
  NetworkConfig c = base_config(Variant::plain, 1, 3, 4);
  Parameters p = build(c, 2);
  CHECK_THROWS_AS(forward(p, c, random_batch(3, 5, 1)), DataError);
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::plain, Variant::filter, Variant::sparse})
    CHECK(variant_from_string(to_string(v)) == v);
  CHECK_THROWS_AS(variant_from_string("dense"), DataError);
}
