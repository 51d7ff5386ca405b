#include "survsel/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "survsel/rng.hpp"

namespace survsel {

namespace {

using json = nlohmann::json;

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("checkpoint matrix rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json layer_to_json(const DenseLayer& l) {
  return json{{"w", matrix_to_json(l.w)}, {"b", vector_to_json(l.b)}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l;
  l.w = matrix_from_json(j.at("w"));
  l.b = vector_from_json(j.at("b"));
  return l;
}

DenseLayer init_layer(int out_dim, int in_dim, Rng& rng) {
  DenseLayer l;
  l.w.resize(out_dim, in_dim);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (Eigen::Index r = 0; r < l.w.rows(); ++r)
    for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = rng.uniform(-bound, bound);
  l.b = Eigen::VectorXd::Zero(out_dim);
  return l;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::filter: return "filter";
    case Variant::sparse: return "sparse";
  }
  return "plain";
}

Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "filter") return Variant::filter;
  if (s == "sparse") return Variant::sparse;
  throw DataError("unknown network variant: " + s);
}

void NetworkConfig::validate() const {
  if (num_events < 1) throw DataError("network needs at least one event");
  if (num_bins < 1) throw DataError("network needs at least one time bin");
  if (!(bin_width > 0.0)) throw DataError("bin width must be positive");
  if (input_dim < 1) throw DataError("input dimension must be at least 1");
  if (shared_width < 1) throw DataError("shared width must be positive");
  if (shared_layers < 1) throw DataError("shared layer count must be at least 1");
  if (static_cast<int>(cause_layers.size()) != num_events ||
      static_cast<int>(cause_width.size()) != num_events)
    throw DataError("cause stack configuration must list one entry per event");
  for (int k = 0; k < num_events; ++k) {
    if (cause_layers[static_cast<std::size_t>(k)] < 1 ||
        cause_width[static_cast<std::size_t>(k)] < 1)
      throw DataError("cause stack sizes must be positive");
  }
  if (variant == Variant::filter) {
    if (!selection) throw DataError("filter variant requires a feature selection");
    if (static_cast<int>(selection->per_event.size()) != num_events)
      throw DataError("feature selection event count does not match the network");
    for (const auto& v : selection->per_event) {
      if (v.empty()) throw DataError("filter variant needs at least one feature per event");
      for (int f : v)
        if (f < 0 || f >= input_dim) throw DataError("selected feature index out of range");
    }
  } else if (selection) {
    throw DataError("only the filter variant carries a feature selection");
  }
}

bool NetworkConfig::has_shared() const {
  if (variant == Variant::filter) return selection && !selection->shared.empty();
  return true;
}

int NetworkConfig::shared_input_dim() const {
  if (variant == Variant::filter) return static_cast<int>(selection->shared.size());
  return input_dim;
}

int NetworkConfig::shared_output_dim() const { return has_shared() ? shared_width : 0; }

int NetworkConfig::cause_own_input_dim(int event_idx) const {
  if (variant == Variant::filter)
    return static_cast<int>(selection->per_event[static_cast<std::size_t>(event_idx)].size());
  return input_dim;
}

int NetworkConfig::cause_input_dim(int event_idx) const {
  return shared_output_dim() + cause_own_input_dim(event_idx);
}

std::vector<TensorView> tensor_views(Parameters& p) {
  std::vector<TensorView> out;
  auto add_layer = [&](DenseLayer& l) {
    out.push_back({l.w.data(), l.w.size()});
    out.push_back({l.b.data(), l.b.size()});
  };
  for (auto& l : p.shared) add_layer(l);
  for (auto& stack : p.cause)
    for (auto& l : stack) add_layer(l);
  for (auto& l : p.head) add_layer(l);
  if (p.sparse_shared.size() > 0) out.push_back({p.sparse_shared.data(), p.sparse_shared.size()});
  for (auto& v : p.sparse_cause) out.push_back({v.data(), v.size()});
  return out;
}

Parameters zeros_like(const Parameters& p) {
  Parameters z = p;
  for (auto& view : tensor_views(z)) std::fill(view.data, view.data + view.size, 0.0);
  return z;
}

Parameters build(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "network-init"));
  Parameters p;

  if (config.has_shared()) {
    int in_dim = config.shared_input_dim();
    for (int l = 0; l < config.shared_layers; ++l) {
      p.shared.push_back(init_layer(config.shared_width, in_dim, rng));
      in_dim = config.shared_width;
    }
  }

  for (int k = 0; k < config.num_events; ++k) {
    std::vector<DenseLayer> stack;
    int in_dim = config.cause_input_dim(k);
    const int width = config.cause_width[static_cast<std::size_t>(k)];
    for (int l = 0; l < config.cause_layers[static_cast<std::size_t>(k)]; ++l) {
      stack.push_back(init_layer(width, in_dim, rng));
      in_dim = width;
    }
    p.cause.push_back(std::move(stack));
    p.head.push_back(init_layer(config.num_bins, in_dim, rng));
  }

  if (config.variant == Variant::sparse) {
    p.sparse_shared = Eigen::VectorXd::Ones(config.shared_input_dim());
    for (int k = 0; k < config.num_events; ++k)
      p.sparse_cause.push_back(Eigen::VectorXd::Ones(config.cause_input_dim(k)));
  }
  return p;
}

Eigen::MatrixXd forward(const Parameters& params, const NetworkConfig& config,
                        const Eigen::MatrixXd& x, ForwardCache* cache) {
  if (x.cols() != config.input_dim)
    throw DataError("forward input has " + std::to_string(x.cols()) + " features, expected " +
                    std::to_string(config.input_dim));
  const Eigen::Index batch = x.rows();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  c.input = x.transpose();

  Eigen::MatrixXd shared_out(0, batch);
  if (config.has_shared()) {
    if (config.variant == Variant::filter) {
      const auto& vs = config.selection->shared;
      c.shared_in.resize(static_cast<Eigen::Index>(vs.size()), batch);
      for (std::size_t r = 0; r < vs.size(); ++r) c.shared_in.row(static_cast<Eigen::Index>(r)) = c.input.row(vs[r]);
    } else if (config.variant == Variant::sparse) {
      c.shared_in = params.sparse_shared.asDiagonal() * c.input;
    } else {
      c.shared_in = c.input;
    }
    c.shared_pre.clear();
    c.shared_act.clear();
    const Eigen::MatrixXd* prev = &c.shared_in;
    for (const auto& l : params.shared) {
      c.shared_pre.push_back((l.w * (*prev)).colwise() + l.b);
      c.shared_act.push_back(relu(c.shared_pre.back()));
      prev = &c.shared_act.back();
    }
    shared_out = c.shared_act.back();
  }

  c.cause_raw.assign(static_cast<std::size_t>(config.num_events), {});
  c.cause_masked.assign(static_cast<std::size_t>(config.num_events), {});
  c.cause_pre.assign(static_cast<std::size_t>(config.num_events), {});
  c.cause_act.assign(static_cast<std::size_t>(config.num_events), {});
  c.logits.resize(static_cast<Eigen::Index>(config.num_events) * config.num_bins, batch);

  for (int k = 0; k < config.num_events; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    Eigen::MatrixXd own;
    if (config.variant == Variant::filter) {
      const auto& vk = config.selection->per_event[ks];
      own.resize(static_cast<Eigen::Index>(vk.size()), batch);
      for (std::size_t r = 0; r < vk.size(); ++r) own.row(static_cast<Eigen::Index>(r)) = c.input.row(vk[r]);
    } else {
      own = c.input;
    }
    Eigen::MatrixXd& raw = c.cause_raw[ks];
    raw.resize(shared_out.rows() + own.rows(), batch);
    if (shared_out.rows() > 0) raw.topRows(shared_out.rows()) = shared_out;
    raw.bottomRows(own.rows()) = own;

    const Eigen::MatrixXd* prev;
    if (config.variant == Variant::sparse) {
      c.cause_masked[ks] = params.sparse_cause[ks].asDiagonal() * raw;
      prev = &c.cause_masked[ks];
    } else {
      prev = &raw;
    }
    for (const auto& l : params.cause[ks]) {
      c.cause_pre[ks].push_back((l.w * (*prev)).colwise() + l.b);
      c.cause_act[ks].push_back(relu(c.cause_pre[ks].back()));
      prev = &c.cause_act[ks].back();
    }
    c.logits.middleRows(static_cast<Eigen::Index>(k) * config.num_bins, config.num_bins) =
        (params.head[ks].w * (*prev)).colwise() + params.head[ks].b;
  }

  c.prob.resizeLike(c.logits);
  for (Eigen::Index col = 0; col < batch; ++col) {
    const double m = c.logits.col(col).maxCoeff();
    c.prob.col(col) = (c.logits.col(col).array() - m).exp();
    c.prob.col(col) /= c.prob.col(col).sum();
  }
  return c.prob;
}

Eigen::RowVectorXd cif(const Eigen::MatrixXd& prob, int num_bins, int event_idx, int t_bin) {
  if (event_idx < 0 || t_bin < 0 || t_bin >= num_bins)
    throw DataError("cif indices out of range");
  return prob.middleRows(static_cast<Eigen::Index>(event_idx) * num_bins, t_bin + 1).colwise().sum();
}

double cif_value(const Eigen::MatrixXd& prob, int num_bins, int event_idx, int t_bin,
                 Eigen::Index record) {
  double total = 0.0;
  const Eigen::Index base = static_cast<Eigen::Index>(event_idx) * num_bins;
  for (int u = 0; u <= t_bin; ++u) total += prob(base + u, record);
  return total;
}

int map_horizon_to_bin(double horizon, double bin_width, int num_bins, bool* clamped) {
  if (!(horizon > 0.0)) throw DataError("horizon must be positive");
  const int bin = static_cast<int>(std::floor(horizon / bin_width)) - 1;
  if (clamped) *clamped = bin >= num_bins;
  return std::clamp(bin, 0, num_bins - 1);
}

int time_to_bin(double time, double bin_width, int num_bins, bool* clamped) {
  const int bin = static_cast<int>(std::floor(time / bin_width));
  if (clamped) *clamped = bin >= num_bins;
  return std::clamp(bin, 0, num_bins - 1);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["format"] = "survsel-checkpoint";
  j["version"] = 1;

  json cfg;
  cfg["num_events"] = ckpt.config.num_events;
  cfg["num_bins"] = ckpt.config.num_bins;
  cfg["bin_width"] = ckpt.config.bin_width;
  cfg["input_dim"] = ckpt.config.input_dim;
  cfg["shared_layers"] = ckpt.config.shared_layers;
  cfg["shared_width"] = ckpt.config.shared_width;
  cfg["cause_layers"] = ckpt.config.cause_layers;
  cfg["cause_width"] = ckpt.config.cause_width;
  cfg["variant"] = to_string(ckpt.config.variant);
  if (ckpt.config.selection) {
    cfg["selection"] = json{{"per_event", ckpt.config.selection->per_event},
                            {"shared", ckpt.config.selection->shared},
                            {"sizes", ckpt.config.selection->sizes}};
  }
  j["config"] = std::move(cfg);

  json params;
  params["shared"] = json::array();
  for (const auto& l : ckpt.params.shared) params["shared"].push_back(layer_to_json(l));
  params["cause"] = json::array();
  for (const auto& stack : ckpt.params.cause) {
    json s = json::array();
    for (const auto& l : stack) s.push_back(layer_to_json(l));
    params["cause"].push_back(std::move(s));
  }
  params["head"] = json::array();
  for (const auto& l : ckpt.params.head) params["head"].push_back(layer_to_json(l));
  if (ckpt.params.sparse_shared.size() > 0)
    params["sparse_shared"] = vector_to_json(ckpt.params.sparse_shared);
  if (!ckpt.params.sparse_cause.empty()) {
    params["sparse_cause"] = json::array();
    for (const auto& v : ckpt.params.sparse_cause) params["sparse_cause"].push_back(vector_to_json(v));
  }
  j["params"] = std::move(params);

  if (ckpt.normalization) {
    json n;
    n["mean"] = vector_to_json(ckpt.normalization->mean);
    n["stddev"] = vector_to_json(ckpt.normalization->stddev);
    n["is_constant"] = ckpt.normalization->is_constant;
    j["normalization"] = std::move(n);
  }

  if (!ckpt.features.empty()) {
    json feats = json::array();
    for (const auto& f : ckpt.features) {
      json fj;
      fj["name"] = f.name;
      fj["kind"] = to_string(f.kind);
      fj["origin"] = to_string(f.origin);
      if (!f.parent.empty()) fj["parent"] = f.parent;
      feats.push_back(std::move(fj));
    }
    j["features"] = std::move(feats);
  }

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "survsel-checkpoint")
    throw DataError("not a model checkpoint: " + path);
  if (j.value("version", 0) != 1)
    throw DataError("unsupported checkpoint version in " + path);

  Checkpoint ckpt;
  const json& cfg = j.at("config");
  ckpt.config.num_events = cfg.at("num_events").get<int>();
  ckpt.config.num_bins = cfg.at("num_bins").get<int>();
  ckpt.config.bin_width = cfg.at("bin_width").get<double>();
  ckpt.config.input_dim = cfg.at("input_dim").get<int>();
  ckpt.config.shared_layers = cfg.at("shared_layers").get<int>();
  ckpt.config.shared_width = cfg.at("shared_width").get<int>();
  ckpt.config.cause_layers = cfg.at("cause_layers").get<std::vector<int>>();
  ckpt.config.cause_width = cfg.at("cause_width").get<std::vector<int>>();
  ckpt.config.variant = variant_from_string(cfg.at("variant").get<std::string>());
  if (cfg.contains("selection")) {
    FeatureSelection sel;
    sel.per_event = cfg.at("selection").at("per_event").get<std::vector<std::vector<int>>>();
    sel.shared = cfg.at("selection").at("shared").get<std::vector<int>>();
    sel.sizes = cfg.at("selection").at("sizes").get<std::vector<int>>();
    ckpt.config.selection = std::move(sel);
  }

  const json& params = j.at("params");
  for (const auto& l : params.at("shared")) ckpt.params.shared.push_back(layer_from_json(l));
  for (const auto& stack : params.at("cause")) {
    std::vector<DenseLayer> s;
    for (const auto& l : stack) s.push_back(layer_from_json(l));
    ckpt.params.cause.push_back(std::move(s));
  }
  for (const auto& l : params.at("head")) ckpt.params.head.push_back(layer_from_json(l));
  if (params.contains("sparse_shared"))
    ckpt.params.sparse_shared = vector_from_json(params.at("sparse_shared"));
  if (params.contains("sparse_cause"))
    for (const auto& v : params.at("sparse_cause"))
      ckpt.params.sparse_cause.push_back(vector_from_json(v));

  if (j.contains("normalization")) {
    NormalizationParams n;
    n.mean = vector_from_json(j.at("normalization").at("mean"));
    n.stddev = vector_from_json(j.at("normalization").at("stddev"));
    n.is_constant = j.at("normalization").at("is_constant").get<std::vector<std::uint8_t>>();
    ckpt.normalization = std::move(n);
  }

  if (j.contains("features")) {
    for (const auto& fj : j.at("features")) {
      FeatureMeta f;
      f.name = fj.at("name").get<std::string>();
      f.kind = feature_kind_from_string(fj.at("kind").get<std::string>());
      f.origin = feature_origin_from_string(fj.at("origin").get<std::string>());
      f.parent = fj.value("parent", "");
      ckpt.features.push_back(std::move(f));
    }
  }

  ckpt.config.validate();
  return ckpt;
}

}  // namespace survsel
