#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survsel/filters.hpp"
#include "survsel/types.hpp"

namespace survsel {

enum class Variant { plain, filter, sparse };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Discrete-time competing-risks model: a shared ReLU stack feeds
// event-specific ReLU stacks whose linear heads are concatenated into a
// single softmax over all K*T (event, bin) cells.
struct NetworkConfig {
  int num_events = 1;    // K
  int num_bins = 1;      // T
  double bin_width = 1.0;
  int input_dim = 0;     // feature count the model was built for
  int shared_layers = 1;
  int shared_width = 50;
  std::vector<int> cause_layers;  // one entry per event
  std::vector<int> cause_width;
  Variant variant = Variant::plain;
  std::optional<FeatureSelection> selection;  // filter variant only

  void validate() const;
  // false only for the filter variant with an empty shared set
  bool has_shared() const;
  int shared_input_dim() const;
  int shared_output_dim() const;  // 0 when has_shared() is false
  // event-specific stacks see the shared output concatenated with their
  // own input features (all features, or v_k for the filter variant)
  int cause_own_input_dim(int event_idx) const;
  int cause_input_dim(int event_idx) const;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

struct Parameters {
  std::vector<DenseLayer> shared;
  std::vector<std::vector<DenseLayer>> cause;  // [event][layer]
  std::vector<DenseLayer> head;                // [event], linear, width -> T
  // one-to-one input scalings, sparse variant only (empty otherwise)
  Eigen::VectorXd sparse_shared;
  std::vector<Eigen::VectorXd> sparse_cause;
};

// Flat views over every tensor, in a fixed order shared by params,
// gradients, and optimizer state.
struct TensorView {
  double* data;
  Eigen::Index size;
};
std::vector<TensorView> tensor_views(Parameters& p);
Parameters zeros_like(const Parameters& p);

Parameters build(const NetworkConfig& config, std::uint64_t seed);

struct ForwardCache {
  Eigen::MatrixXd input;      // d x B
  Eigen::MatrixXd shared_in;  // masked or selected shared input
  std::vector<Eigen::MatrixXd> shared_pre;
  std::vector<Eigen::MatrixXd> shared_act;
  std::vector<Eigen::MatrixXd> cause_raw;     // concat(shared out, own input)
  std::vector<Eigen::MatrixXd> cause_masked;  // after sparse scaling
  std::vector<std::vector<Eigen::MatrixXd>> cause_pre;
  std::vector<std::vector<Eigen::MatrixXd>> cause_act;
  Eigen::MatrixXd logits;  // (K*T) x B
  Eigen::MatrixXd prob;    // (K*T) x B, columns sum to 1
};

// x holds records as rows (B x d). Returns the joint distribution as a
// (K*T) x B matrix; row k*T + t is P[event k+1][bin t].
Eigen::MatrixXd forward(const Parameters& params, const NetworkConfig& config,
                        const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

// F_k(t_bin | record) for every column of a forward result; event_idx is
// zero-based.
Eigen::RowVectorXd cif(const Eigen::MatrixXd& prob, int num_bins, int event_idx, int t_bin);
double cif_value(const Eigen::MatrixXd& prob, int num_bins, int event_idx, int t_bin,
                 Eigen::Index record);

// Largest bin whose right edge lies at or before the horizon, clamped to
// [0, T-1]; bins cover [t*w, (t+1)*w).
int map_horizon_to_bin(double horizon, double bin_width, int num_bins, bool* clamped = nullptr);

// Bin containing an observed time, clamped to the final bin.
int time_to_bin(double time, double bin_width, int num_bins, bool* clamped = nullptr);

// Versioned JSON checkpoint; round-trips configs and tensors bit-exactly.
struct Checkpoint {
  NetworkConfig config;
  Parameters params;
  std::optional<NormalizationParams> normalization;
  std::vector<FeatureMeta> features;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace survsel
