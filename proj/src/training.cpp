#include "survsel/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "survsel/csv.hpp"
#include "survsel/evaluation.hpp"

namespace survsel {

namespace {

constexpr double kProbFloor = 1e-12;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// dL/dP for one batch, kept as direct cell terms plus per-event dF
// coefficients; a suffix sum over bins turns dF terms into dP terms.
struct ProbGradient {
  Eigen::MatrixXd direct;           // (K*T) x B
  std::vector<Eigen::MatrixXd> df;  // per event, T x B
};

LossBreakdown loss_and_prob_gradient(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                                     const Eigen::VectorXi& events, const NetworkConfig& config,
                                     const LossConfig& loss, const Parameters& params,
                                     ProbGradient* pg) {
  const Eigen::Index batch = prob.cols();
  if (batch == 0) throw DataError("loss needs a non-empty batch");
  if (times.size() != batch || events.size() != batch)
    throw DataError("batch labels do not match probability columns");
  const int T = config.num_bins;
  const int K = config.num_events;
  LossBreakdown out;
  out.ranking.assign(static_cast<std::size_t>(K), 0.0);

  if (pg) {
    pg->direct = Eigen::MatrixXd::Zero(prob.rows(), batch);
    pg->df.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(T, batch));
  }

  std::vector<int> bin(static_cast<std::size_t>(batch));
  for (Eigen::Index i = 0; i < batch; ++i) {
    bool clamped = false;
    bin[static_cast<std::size_t>(i)] = time_to_bin(times[i], config.bin_width, T, &clamped);
    if (clamped) ++out.clamped_times;
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int t = bin[static_cast<std::size_t>(i)];
    if (events[i] > 0) {
      const Eigen::Index cell = static_cast<Eigen::Index>(events[i] - 1) * T + t;
      const double p = prob(cell, i);
      if (p > kProbFloor) {
        nll -= std::log(p);
        if (pg) pg->direct(cell, i) -= inv_batch / p;
      } else {
        nll -= std::log(kProbFloor);
      }
    } else {
      double risk = 0.0;
      for (int k = 0; k < K; ++k)
        for (int u = 0; u <= t; ++u) risk += prob(static_cast<Eigen::Index>(k) * T + u, i);
      const double surv = 1.0 - risk;
      if (surv > kProbFloor) {
        nll -= std::log(surv);
        if (pg)
          for (int k = 0; k < K; ++k) pg->df[static_cast<std::size_t>(k)](t, i) += inv_batch / surv;
      } else {
        nll -= std::log(kProbFloor);
      }
    }
  }
  out.likelihood = nll * inv_batch;

  double ranking_total = 0.0;
  for (int k = 1; k <= K; ++k) {
    // acceptable pairs: i saw event k strictly before j's observed time
    long pairs = 0;
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (events[i] != k) continue;
      for (Eigen::Index j = 0; j < batch; ++j)
        if (times[i] < times[j]) ++pairs;
    }
    if (pairs == 0) continue;
    const double inv_pairs = 1.0 / static_cast<double>(pairs);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (events[i] != k) continue;
      const int t = bin[static_cast<std::size_t>(i)];
      const double fi = cif_value(prob, T, k - 1, t, i);
      for (Eigen::Index j = 0; j < batch; ++j) {
        if (!(times[i] < times[j])) continue;
        const double fj = cif_value(prob, T, k - 1, t, j);
        const double term = std::exp(-(fi - fj) / loss.sigma);
        sum += term;
        if (pg && loss.beta > 0.0) {
          const double c = loss.beta * term * inv_pairs / loss.sigma;
          pg->df[static_cast<std::size_t>(k - 1)](t, i) -= c;
          pg->df[static_cast<std::size_t>(k - 1)](t, j) += c;
        }
      }
    }
    out.ranking[static_cast<std::size_t>(k - 1)] = sum * inv_pairs;
    ranking_total += loss.beta * sum * inv_pairs;
  }

  if (config.variant == Variant::sparse && params.sparse_cause.size() == static_cast<std::size_t>(K)) {
    double l1 = loss.effective_gamma_shared() * params.sparse_shared.lpNorm<1>();
    for (int k = 0; k < K; ++k)
      l1 += loss.gamma_for_event(k) * params.sparse_cause[static_cast<std::size_t>(k)].lpNorm<1>();
    out.l1 = l1;
  }

  out.total = out.likelihood + ranking_total + out.l1;
  return out;
}

// dP[k*T+u] += sum_{t >= u} dF_k(t)
void fold_df_into_direct(ProbGradient& pg, int num_events, int num_bins) {
  for (int k = 0; k < num_events; ++k) {
    Eigen::MatrixXd& c = pg.df[static_cast<std::size_t>(k)];
    for (int t = num_bins - 2; t >= 0; --t) c.row(t) += c.row(t + 1);
    pg.direct.middleRows(static_cast<Eigen::Index>(k) * num_bins, num_bins) += c;
  }
}

}  // namespace

double LossConfig::effective_gamma_shared() const {
  if (gamma_shared >= 0.0) return gamma_shared;
  if (gamma_event.empty()) return 0.0;
  double sum = 0.0;
  for (double g : gamma_event) sum += g;
  return sum / static_cast<double>(gamma_event.size());
}

double LossConfig::gamma_for_event(int event_idx) const {
  if (gamma_event.empty()) return 0.0;
  return gamma_event[static_cast<std::size_t>(event_idx)];
}

void LossConfig::validate(const NetworkConfig& config) const {
  if (beta < 0.0) throw DataError("ranking weight beta must be nonnegative");
  if (!(sigma > 0.0)) throw DataError("kernel scale sigma must be positive");
  if (!gamma_event.empty() && static_cast<int>(gamma_event.size()) != config.num_events)
    throw DataError("gamma_event must list one weight per event");
  for (double g : gamma_event)
    if (g < 0.0) throw DataError("L1 weights must be nonnegative");
  if (config.variant != Variant::sparse) {
    for (double g : gamma_event)
      if (g != 0.0) throw DataError("nonzero L1 weights require the sparse variant");
    if (gamma_shared > 0.0) throw DataError("nonzero L1 weights require the sparse variant");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (batch_size < 1) throw DataError("batch size must be positive");
  if (max_epochs < 1) throw DataError("max epochs must be positive");
  if (patience < 0) throw DataError("patience must be nonnegative");
}

double likelihood_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                       const Eigen::VectorXi& events, const NetworkConfig& config,
                       long* clamped) {
  LossConfig lc;
  lc.beta = 0.0;
  Parameters dummy;
  const LossBreakdown b = loss_and_prob_gradient(prob, times, events, config, lc, dummy, nullptr);
  if (clamped) *clamped = b.clamped_times;
  return b.likelihood;
}

double ranking_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                    const Eigen::VectorXi& events, const NetworkConfig& config, double sigma,
                    int event) {
  if (!(sigma > 0.0)) throw DataError("kernel scale sigma must be positive");
  if (event < 1 || event > config.num_events) throw DataError("event out of range");
  LossConfig lc;
  lc.beta = 1.0;
  lc.sigma = sigma;
  Parameters dummy;
  const LossBreakdown b = loss_and_prob_gradient(prob, times, events, config, lc, dummy, nullptr);
  return b.ranking[static_cast<std::size_t>(event - 1)];
}

LossBreakdown total_loss(const Eigen::MatrixXd& prob, const Eigen::VectorXd& times,
                         const Eigen::VectorXi& events, const Parameters& params,
                         const NetworkConfig& config, const LossConfig& loss) {
  loss.validate(config);
  return loss_and_prob_gradient(prob, times, events, config, loss, params, nullptr);
}

LossBreakdown gradients(const Parameters& params, const NetworkConfig& config,
                        const Eigen::MatrixXd& x, const Eigen::VectorXd& times,
                        const Eigen::VectorXi& events, const LossConfig& loss,
                        Parameters* grad) {
  if (x.rows() == 0) throw DataError("gradients need a non-empty batch");
  loss.validate(config);
  ForwardCache cache;
  const Eigen::MatrixXd prob = forward(params, config, x, &cache);

  ProbGradient pg;
  const LossBreakdown breakdown =
      loss_and_prob_gradient(prob, times, events, config, loss, params, &pg);
  if (!grad) return breakdown;
  fold_df_into_direct(pg, config.num_events, config.num_bins);

  *grad = zeros_like(params);
  const Eigen::Index batch = x.rows();
  const int T = config.num_bins;
  const int hs = config.shared_output_dim();

  // softmax backward per column: dG = P .* (dP - <dP, P>)
  Eigen::MatrixXd dlogits(prob.rows(), batch);
  for (Eigen::Index col = 0; col < batch; ++col) {
    const double dot = pg.direct.col(col).dot(prob.col(col));
    dlogits.col(col) =
        prob.col(col).cwiseProduct(pg.direct.col(col) - Eigen::VectorXd::Constant(prob.rows(), dot));
  }

  Eigen::MatrixXd dshared_out = Eigen::MatrixXd::Zero(hs, batch);
  for (int k = 0; k < config.num_events; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd dg = dlogits.middleRows(static_cast<Eigen::Index>(k) * T, T);

    const auto& stack = params.cause[ks];
    const Eigen::MatrixXd& top_act = cache.cause_act[ks].back();
    grad->head[ks].w += dg * top_act.transpose();
    grad->head[ks].b += dg.rowwise().sum();
    Eigen::MatrixXd da = params.head[ks].w.transpose() * dg;

    for (int l = static_cast<int>(stack.size()) - 1; l >= 0; --l) {
      const std::size_t ls = static_cast<std::size_t>(l);
      const Eigen::MatrixXd dz =
          da.cwiseProduct((cache.cause_pre[ks][ls].array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd& below =
          l == 0 ? (config.variant == Variant::sparse ? cache.cause_masked[ks]
                                                      : cache.cause_raw[ks])
                 : cache.cause_act[ks][ls - 1];
      grad->cause[ks][ls].w += dz * below.transpose();
      grad->cause[ks][ls].b += dz.rowwise().sum();
      da = stack[ls].w.transpose() * dz;
    }

    // da now targets the (possibly masked) event-specific input
    Eigen::MatrixXd draw;
    if (config.variant == Variant::sparse) {
      grad->sparse_cause[ks] += da.cwiseProduct(cache.cause_raw[ks]).rowwise().sum();
      draw = params.sparse_cause[ks].asDiagonal() * da;
    } else {
      draw = std::move(da);
    }
    if (hs > 0) dshared_out += draw.topRows(hs);
    // remaining rows feed raw covariates, which carry no parameters
  }

  if (config.has_shared()) {
    Eigen::MatrixXd da = std::move(dshared_out);
    for (int l = static_cast<int>(params.shared.size()) - 1; l >= 0; --l) {
      const std::size_t ls = static_cast<std::size_t>(l);
      const Eigen::MatrixXd dz =
          da.cwiseProduct((cache.shared_pre[ls].array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd& below = l == 0 ? cache.shared_in : cache.shared_act[ls - 1];
      grad->shared[ls].w += dz * below.transpose();
      grad->shared[ls].b += dz.rowwise().sum();
      da = params.shared[ls].w.transpose() * dz;
    }
    if (config.variant == Variant::sparse)
      grad->sparse_shared += da.cwiseProduct(cache.input).rowwise().sum();
  }

  if (config.variant == Variant::sparse) {
    const double gs = loss.effective_gamma_shared();
    for (Eigen::Index i = 0; i < grad->sparse_shared.size(); ++i)
      grad->sparse_shared[i] += gs * sign(params.sparse_shared[i]);
    for (int k = 0; k < config.num_events; ++k) {
      const double gk = loss.gamma_for_event(k);
      auto& gv = grad->sparse_cause[static_cast<std::size_t>(k)];
      const auto& pv = params.sparse_cause[static_cast<std::size_t>(k)];
      for (Eigen::Index i = 0; i < gv.size(); ++i) gv[i] += gk * sign(pv[i]);
    }
  }
  return breakdown;
}

void adam_step(Parameters& params, Parameters& grad, AdamState& state, double learning_rate) {
  if (state.step == 0) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  auto pv = tensor_views(params);
  auto gv = tensor_views(grad);
  auto mv = tensor_views(state.m);
  auto vv = tensor_views(state.v);
  if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size())
    throw DataError("optimizer state does not match parameter shapes");

  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].size != gv[t].size || pv[t].size != mv[t].size || pv[t].size != vv[t].size)
      throw DataError("optimizer state does not match parameter shapes");
    for (Eigen::Index i = 0; i < pv[t].size; ++i) {
      const double g = gv[t].data[i];
      mv[t].data[i] = state.beta1 * mv[t].data[i] + (1.0 - state.beta1) * g;
      vv[t].data[i] = state.beta2 * vv[t].data[i] + (1.0 - state.beta2) * g * g;
      const double mhat = mv[t].data[i] / bc1;
      const double vhat = vv[t].data[i] / bc2;
      pv[t].data[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

namespace {

// True when some pair satisfies the concordance conditions for this event
// at one of the horizons; depends only on times and events.
bool event_has_comparable_pairs(const SurvivalDataset& d, int event,
                                const std::vector<double>& horizons) {
  for (Eigen::Index i = 0; i < d.num_records(); ++i) {
    if (d.events[i] != event) continue;
    bool before_some_horizon = false;
    for (double h : horizons)
      if (d.times[i] < h) before_some_horizon = true;
    if (!before_some_horizon) continue;
    for (Eigen::Index j = 0; j < d.num_records(); ++j)
      if (d.times[i] < d.times[j]) return true;
  }
  return false;
}

}  // namespace

FitResult fit(const NetworkConfig& config, const SurvivalDataset& fit_set,
              const SurvivalDataset& validation, const TrainConfig& train,
              const LossConfig& loss, const std::vector<double>& horizons) {
  config.validate();
  train.validate();
  loss.validate(config);
  if (fit_set.num_records() == 0) throw DataError("fit set is empty");
  if (validation.num_records() == 0) throw DataError("validation set is empty");
  if (horizons.empty()) throw DataError("fit needs at least one evaluation horizon");
  if (fit_set.num_features() != config.input_dim || validation.num_features() != config.input_dim)
    throw DataError("dataset feature count does not match the network input dimension");

  FitResult result;
  bool any_event_defined = false;
  for (int k = 1; k <= config.num_events; ++k) {
    if (event_has_comparable_pairs(validation, k, horizons)) {
      any_event_defined = true;
    } else {
      result.warnings.push_back("event " + std::to_string(k) +
                                " has no comparable validation pairs at any horizon; excluded "
                                "from the stopping statistic");
    }
  }
  if (!any_event_defined)
    throw DataError("validation set has no comparable pairs for any event at any horizon");

  Parameters params = build(config, train.seed);
  AdamState adam;

  const Eigen::Index n = fit_set.num_records();
  result.best_metric = -std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= train.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(train.seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = shuffle_rng.permutation(static_cast<std::size_t>(n));

    double loss_sum = 0.0, like_sum = 0.0, rank_sum = 0.0, l1_sum = 0.0;
    Eigen::Index batch_index = 0;
    for (Eigen::Index start = 0; start < n; start += train.batch_size, ++batch_index) {
      const Eigen::Index size = std::min<Eigen::Index>(train.batch_size, n - start);
      Eigen::MatrixXd bx(size, fit_set.num_features());
      Eigen::VectorXd bt(size);
      Eigen::VectorXi be(size);
      for (Eigen::Index r = 0; r < size; ++r) {
        const Eigen::Index src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + r)]);
        bx.row(r) = fit_set.x.row(src);
        bt[r] = fit_set.times[src];
        be[r] = fit_set.events[src];
      }
      Parameters grad;
      const LossBreakdown b = gradients(params, config, bx, bt, be, loss, &grad);
      if (!std::isfinite(b.total))
        throw NumericError("loss became non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      result.clamped_times += b.clamped_times;
      const double w = static_cast<double>(size);
      loss_sum += b.total * w;
      like_sum += b.likelihood * w;
      l1_sum += b.l1 * w;
      for (double r : b.ranking) rank_sum += loss.beta * r * w;
      adam_step(params, grad, adam, train.learning_rate);
    }

    const EvaluationGrid grid = evaluate(params, config, validation, horizons);
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(n);
    entry.likelihood = like_sum / static_cast<double>(n);
    entry.ranking = rank_sum / static_cast<double>(n);
    entry.l1 = l1_sum / static_cast<double>(n);
    for (int k = 1; k <= config.num_events; ++k)
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        const CIndexResult& cell = grid.cell(k, h);
        entry.validation_cells.push_back(
            cell.defined ? cell.value : std::numeric_limits<double>::quiet_NaN());
      }
    entry.validation_metric = grid.mean;
    result.log.push_back(entry);
    result.epochs_run = epoch;

    if (grid.mean > result.best_metric) {
      result.best_metric = grid.mean;
      result.best_epoch = epoch;
      result.params = params;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs > train.patience) break;
    }
  }
  return result;
}

void write_training_log(const FitResult& result, int num_events,
                        const std::vector<double>& horizons, const std::string& path) {
  CsvTable table;
  table.header = {"epoch", "train_loss", "likelihood", "ranking", "l1"};
  for (int k = 1; k <= num_events; ++k)
    for (double h : horizons)
      table.header.push_back("val_c_event" + std::to_string(k) + "_dt" + format_double(h));
  table.header.push_back("val_metric");
  for (const auto& e : result.log) {
    std::vector<std::string> row;
    row.push_back(std::to_string(e.epoch));
    row.push_back(format_double(e.train_loss));
    row.push_back(format_double(e.likelihood));
    row.push_back(format_double(e.ranking));
    row.push_back(format_double(e.l1));
    for (double c : e.validation_cells)
      row.push_back(std::isnan(c) ? std::string() : format_double(c));
    row.push_back(format_double(e.validation_metric));
    table.rows.push_back(std::move(row));
  }
  write_csv(table, path);
}

void SearchSpace::validate() const {
  if (beta.empty() || sigma.empty() || shared_layers.empty() || shared_width.empty() ||
      cause_layers.empty() || cause_width.empty() || selection_size.empty() || gamma.empty())
    throw DataError("every search space choice set must be non-empty");
}

Hyperparams sample_hyperparams(const SearchSpace& space, Rng& rng) {
  // one draw per set, in a fixed documented order
  Hyperparams hp;
  hp.beta = space.beta[rng.uniform_below(space.beta.size())];
  hp.sigma = space.sigma[rng.uniform_below(space.sigma.size())];
  hp.shared_layers = space.shared_layers[rng.uniform_below(space.shared_layers.size())];
  hp.shared_width = space.shared_width[rng.uniform_below(space.shared_width.size())];
  hp.cause_layers = space.cause_layers[rng.uniform_below(space.cause_layers.size())];
  hp.cause_width = space.cause_width[rng.uniform_below(space.cause_width.size())];
  hp.selection_size = space.selection_size[rng.uniform_below(space.selection_size.size())];
  hp.gamma = space.gamma[rng.uniform_below(space.gamma.size())];
  return hp;
}

SearchResult random_search(const SearchSpace& space, int iterations, std::uint64_t seed,
                           const std::function<double(const Hyperparams&, int)>& evaluate_trial) {
  space.validate();
  if (iterations < 1) throw DataError("random search needs at least one iteration");
  Rng rng(derive_seed(seed, "search-sample"));
  SearchResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < iterations; ++trial) {
    TrialResult tr;
    tr.trial = trial;
    tr.hp = sample_hyperparams(space, rng);
    try {
      tr.metric = evaluate_trial(tr.hp, trial);
    } catch (const NumericError& e) {
      tr.failed = true;
      tr.error = e.what();
    }
    if (!tr.failed && tr.metric > result.best_metric) {
      result.best_metric = tr.metric;
      result.best = tr.hp;
      result.best_trial = trial;
    }
    result.log.push_back(std::move(tr));
  }
  if (result.best_trial < 0) throw NumericError("every random search trial failed");
  return result;
}

}  // namespace survsel
