#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survsel/network.hpp"
#include "survsel/rng.hpp"
#include "survsel/types.hpp"

namespace survsel {

// Loss = likelihood + beta * sum_k ranking_k + gamma_s|w_s|_1 + sum_k gamma_k|w_k|_1.
// The L1 terms apply only to the sparse variant.
struct LossConfig {
  double beta = 1.0;
  double sigma = 1.0;
  std::vector<double> gamma_event;  // one per event; empty means all 0
  double gamma_shared = -1.0;       // < 0 means mean of gamma_event

  double effective_gamma_shared() const;
  double gamma_for_event(int event_idx) const;
  void validate(const NetworkConfig& config) const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossBreakdown {
  double likelihood = 0.0;
  std::vector<double> ranking;  // per event, unweighted
  double l1 = 0.0;
  double total = 0.0;
  long clamped_times = 0;
};

// prob: (K*T) x B forward output for the batch; times/events are the batch
// labels. Mean over records; times beyond the grid fall into the last bin.
double likelihood_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                       const Eigen::VectorXi& events, const NetworkConfig& config,
                       long* clamped = nullptr);

// Mean of exp(-(F_k(t_i|i) - F_k(t_i|j)) / sigma) over pairs with
// events[i] == k and times[i] < times[j]; 0 when no such pair exists.
double ranking_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                    const Eigen::VectorXi& events, const NetworkConfig& config, double sigma,
                    int event);

LossBreakdown total_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                         const Eigen::VectorXi& events, const Parameters& params,
                         const NetworkConfig& config, const LossConfig& loss);

// Analytic gradients of the total loss for one batch (x: B x d rows).
// Returns the batch loss breakdown alongside.
LossBreakdown gradients(const Parameters& params, const NetworkConfig& config,
                        const Eigen::MatrixXd& x, const Eigen::VectorXd& times,
                        const Eigen::VectorXi& events, const LossConfig& loss, Parameters* grad);

struct AdamState {
  Parameters m;
  Parameters v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(Parameters& params, Parameters& grad, AdamState& state, double learning_rate);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double likelihood = 0.0;
  double ranking = 0.0;  // beta-weighted sum over events
  double l1 = 0.0;
  std::vector<double> validation_cells;  // per event x horizon, NaN when undefined
  double validation_metric = 0.0;        // mean over defined cells
};

struct FitResult {
  Parameters params;  // parameters from the best validation epoch
  double best_metric = 0.0;
  int best_epoch = 0;  // 1-based
  int epochs_run = 0;
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
  long clamped_times = 0;
};

// Mini-batch Adam with early stopping on the validation C-index averaged
// over events and horizons (defined cells only).
FitResult fit(const NetworkConfig& config, const SurvivalDataset& fit_set,
              const SurvivalDataset& validation, const TrainConfig& train,
              const LossConfig& loss, const std::vector<double>& horizons);

void write_training_log(const FitResult& result, int num_events,
                        const std::vector<double>& horizons, const std::string& path);

// Discrete choice sets for random hyperparameter search. Singleton sets pin
// a value; sampling draws uniformly and independently per set.
struct SearchSpace {
  std::vector<double> beta{0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<double> sigma{0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<int> shared_layers{1, 2, 3};
  std::vector<int> shared_width{50, 100, 200};
  std::vector<int> cause_layers{1, 2, 3};
  std::vector<int> cause_width{50, 100, 200};
  std::vector<int> selection_size{20, 40, 60};   // filter and hybrid variants
  std::vector<double> gamma{1e-5, 1e-4, 1e-3};   // sparse variant

  void validate() const;
};

struct Hyperparams {
  double beta = 1.0;
  double sigma = 1.0;
  int shared_layers = 1;
  int shared_width = 50;
  int cause_layers = 1;
  int cause_width = 50;
  int selection_size = 20;
  double gamma = 1e-4;
};

Hyperparams sample_hyperparams(const SearchSpace& space, Rng& rng);

struct TrialResult {
  int trial = 0;
  Hyperparams hp;
  double metric = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  Hyperparams best;
  int best_trial = -1;
  double best_metric = 0.0;
  std::vector<TrialResult> log;
};

// Runs `iterations` seeded uniform draws, scoring each with the callback
// (validation stopping statistic). A NumericError marks the trial failed
// and the search continues; ties keep the earliest trial.
SearchResult random_search(const SearchSpace& space, int iterations, std::uint64_t seed,
                           const std::function<double(const Hyperparams&, int)>& evaluate_trial);

}  // namespace survsel
