#include "survsel/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>

#include "survsel/csv.hpp"
#include "survsel/rng.hpp"

namespace survsel {

std::string to_string(FilterMethod m) {
  switch (m) {
    case FilterMethod::anova: return "anova";
    case FilterMethod::svm: return "svm";
    case FilterMethod::relieff: return "relieff";
  }
  return "anova";
}

FilterMethod filter_method_from_string(const std::string& s) {
  if (s == "anova") return FilterMethod::anova;
  if (s == "svm") return FilterMethod::svm;
  if (s == "relieff") return FilterMethod::relieff;
  throw DataError("unknown filter method: " + s);
}

TimeFixedLabels time_fixed_labels(const SurvivalDataset& d, int event, double horizon) {
  if (event < 1 || event > d.num_events)
    throw DataError("event must lie in {1,...," + std::to_string(d.num_events) + "}");
  if (!(horizon > 0.0)) throw DataError("horizon must be positive");
  TimeFixedLabels out;
  out.event = event;
  out.horizon = horizon;
  out.labels.resize(static_cast<std::size_t>(d.num_records()));
  for (Eigen::Index i = 0; i < d.num_records(); ++i) {
    // strict inequality: an event exactly at the horizon counts as 0
    const bool positive = d.times[i] < horizon && d.events[i] == event;
    out.labels[static_cast<std::size_t>(i)] = positive ? 1 : 0;
    (positive ? out.positives : out.negatives)++;
  }
  return out;
}

std::vector<std::size_t> canonical_record_order(const SurvivalDataset& d) {
  std::vector<std::size_t> order(static_cast<std::size_t>(d.num_records()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Eigen::Index ia = static_cast<Eigen::Index>(a);
    const Eigen::Index ib = static_cast<Eigen::Index>(b);
    for (Eigen::Index f = 0; f < d.num_features(); ++f) {
      if (d.x(ia, f) < d.x(ib, f)) return true;
      if (d.x(ia, f) > d.x(ib, f)) return false;
    }
    if (d.times[ia] != d.times[ib]) return d.times[ia] < d.times[ib];
    return d.events[ia] < d.events[ib];
  });
  return order;
}

AnovaScores anova_score(const SurvivalDataset& d, const TimeFixedLabels& labels) {
  if (!labels.has_both_classes())
    throw DataError("degenerate horizon: time-fixed labels contain a single class");
  const Eigen::Index n = d.num_records();
  if (static_cast<std::size_t>(n) != labels.labels.size())
    throw DataError("label count does not match record count");

  AnovaScores out;
  out.f_stat.resize(d.num_features());
  out.p_value.resize(d.num_features());
  out.constant.assign(static_cast<std::size_t>(d.num_features()), 0);

  const double df_within = static_cast<double>(n - 2);
  boost::math::fisher_f f_dist(1.0, df_within);

  std::vector<double> group[2];
  for (Eigen::Index f = 0; f < d.num_features(); ++f) {
    group[0].clear();
    group[1].clear();
    for (Eigen::Index i = 0; i < n; ++i)
      group[labels.labels[static_cast<std::size_t>(i)]].push_back(d.x(i, f));
    // value-sorted accumulation: identical sums under any record permutation
    std::sort(group[0].begin(), group[0].end());
    std::sort(group[1].begin(), group[1].end());

    double sum[2] = {0.0, 0.0};
    for (int g = 0; g < 2; ++g)
      for (double v : group[g]) sum[g] += v;
    const double n0 = static_cast<double>(group[0].size());
    const double n1 = static_cast<double>(group[1].size());
    const double mean0 = sum[0] / n0;
    const double mean1 = sum[1] / n1;
    const double grand = (sum[0] + sum[1]) / static_cast<double>(n);

    double ss_within = 0.0;
    for (double v : group[0]) ss_within += (v - mean0) * (v - mean0);
    for (double v : group[1]) ss_within += (v - mean1) * (v - mean1);
    const double ss_between = n0 * (mean0 - grand) * (mean0 - grand) +
                              n1 * (mean1 - grand) * (mean1 - grand);

    if (ss_between <= 0.0 && ss_within <= 0.0) {
      out.constant[static_cast<std::size_t>(f)] = 1;
      out.f_stat[f] = 0.0;
      out.p_value[f] = 1.0;
    } else if (ss_within <= 0.0) {
      out.f_stat[f] = kPerfectSeparationF;
      out.p_value[f] = 0.0;
    } else {
      const double f_value = (ss_between / 1.0) / (ss_within / df_within);
      out.f_stat[f] = f_value;
      out.p_value[f] = boost::math::cdf(boost::math::complement(f_dist, f_value));
    }
  }
  return out;
}

Eigen::VectorXd svm_score(const SurvivalDataset& d, const TimeFixedLabels& labels,
                          const SvmOptions& options, std::uint64_t seed) {
  if (!d.state.normalized)
    throw DataError("svm_score requires a normalized dataset; weights are not comparable otherwise");
  if (!labels.has_both_classes())
    throw DataError("degenerate horizon: time-fixed labels contain a single class");
  if (options.reg <= 0.0) throw DataError("svm regularization must be positive");
  if (options.epochs < 1) throw DataError("svm epochs must be positive");

  const Eigen::Index n = d.num_records();
  const std::vector<std::size_t> canonical = canonical_record_order(d);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d.num_features());
  const double lambda = options.reg;
  const double radius = 1.0 / std::sqrt(lambda);
  Rng rng(derive_seed(seed, "svm-pegasos"));
  std::vector<std::size_t> visit = canonical;
  long t = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    visit = canonical;
    rng.shuffle(visit);
    for (std::size_t pos = 0; pos < static_cast<std::size_t>(n); ++pos) {
      const Eigen::Index i = static_cast<Eigen::Index>(visit[pos]);
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = labels.labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      const double margin = y * w.dot(d.x.row(i).transpose());
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) w += (eta * y) * d.x.row(i).transpose();
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
    }
  }
  return w.cwiseAbs();
}

Eigen::VectorXd relieff_score(const SurvivalDataset& d, const TimeFixedLabels& labels,
                              const ReliefFOptions& options, std::uint64_t seed,
                              std::vector<std::string>* warnings) {
  if (options.k_neighbors < 1) throw DataError("relieff k_neighbors must be at least 1");
  const Eigen::Index n = d.num_records();
  if (!labels.has_both_classes())
    throw DataError("degenerate horizon: time-fixed labels contain a single class");

  int sample_count = options.sample_count;
  if (sample_count <= 0) sample_count = static_cast<int>(std::min<Eigen::Index>(n, 1000));
  if (sample_count > n)
    throw DataError("relieff sample_count exceeds record count");

  const int count1 = labels.positives;
  const int count0 = labels.negatives;
  int k = std::min(options.k_neighbors, std::min(count0, count1) - 1);
  if (k < options.k_neighbors && warnings)
    warnings->push_back("relieff: reduced k from " + std::to_string(options.k_neighbors) + " to " +
                        std::to_string(std::max(k, 0)) + " (smallest class has " +
                        std::to_string(std::min(count0, count1)) + " records)");
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(d.num_features());
  if (k < 1) {
    if (warnings) warnings->push_back("relieff: not enough records per class for any neighbor; scores are 0");
    return scores;
  }

  // per-feature value ranges for the numeric diff
  Eigen::VectorXd range(d.num_features());
  for (Eigen::Index f = 0; f < d.num_features(); ++f)
    range[f] = d.x.col(f).maxCoeff() - d.x.col(f).minCoeff();

  const std::vector<std::size_t> canonical = canonical_record_order(d);
  std::vector<std::size_t> rank_of(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < canonical.size(); ++pos) rank_of[canonical[pos]] = pos;

  Rng rng(derive_seed(seed, "relieff-sample"));
  std::vector<std::size_t> sample_order = canonical;
  rng.shuffle(sample_order);
  sample_order.resize(static_cast<std::size_t>(sample_count));

  const double m = static_cast<double>(sample_count);
  const double norm = 1.0 / (m * static_cast<double>(k));

  using Neighbor = std::pair<double, std::size_t>;  // (squared distance, canonical rank)
  std::vector<Neighbor> hits, misses;
  std::vector<std::size_t> selected;
  auto diff = [&](Eigen::Index f, Eigen::Index a, Eigen::Index b) {
    if (d.features[static_cast<std::size_t>(f)].kind == FeatureKind::numeric)
      return range[f] > 0.0 ? std::abs(d.x(a, f) - d.x(b, f)) / range[f] : 0.0;
    return d.x(a, f) == d.x(b, f) ? 0.0 : 1.0;
  };

  for (std::size_t si = 0; si < sample_order.size(); ++si) {
    const Eigen::Index i = static_cast<Eigen::Index>(sample_order[si]);
    const std::uint8_t label_i = labels.labels[static_cast<std::size_t>(i)];
    hits.clear();
    misses.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dist = (d.x.row(i) - d.x.row(j)).squaredNorm();
      auto& bucket = labels.labels[static_cast<std::size_t>(j)] == label_i ? hits : misses;
      bucket.emplace_back(dist, rank_of[static_cast<std::size_t>(j)]);
    }
    // ties decided by (distance, canonical rank) so neighbor sets do not
    // depend on storage order
    auto take_nearest = [&](std::vector<Neighbor>& pool) {
      const std::size_t kk = static_cast<std::size_t>(k);
      std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk - 1), pool.end());
      std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk));
      selected.clear();
      for (std::size_t q = 0; q < kk; ++q) selected.push_back(pool[q].second);
    };

    take_nearest(hits);
    for (std::size_t q = 0; q < selected.size(); ++q) {
      const Eigen::Index h = static_cast<Eigen::Index>(canonical[selected[q]]);
      for (Eigen::Index f = 0; f < d.num_features(); ++f) scores[f] -= diff(f, i, h) * norm;
    }
    take_nearest(misses);
    for (std::size_t q = 0; q < selected.size(); ++q) {
      const Eigen::Index mr = static_cast<Eigen::Index>(canonical[selected[q]]);
      for (Eigen::Index f = 0; f < d.num_features(); ++f) scores[f] += diff(f, i, mr) * norm;
    }
  }
  return scores;
}

std::vector<FeatureScore> average_over_horizons(const std::vector<HorizonScores>& horizons,
                                                FilterMethod method,
                                                std::vector<std::string>* warnings) {
  if (horizons.empty()) throw DataError("average_over_horizons needs at least one horizon");
  Eigen::Index n_features = -1;
  for (const auto& h : horizons) {
    if (h.degenerate) continue;
    if (n_features < 0) n_features = h.scores.size();
    else if (n_features != h.scores.size())
      throw DataError("horizon score vectors differ in length");
  }
  if (n_features < 0) throw DataError("every horizon is degenerate; no scores to average");

  for (const auto& h : horizons)
    if (h.degenerate && warnings)
      warnings->push_back("horizon " + format_double(h.horizon) +
                          " excluded from averaging (single-class labels)");

  std::vector<FeatureScore> out(static_cast<std::size_t>(n_features));
  for (Eigen::Index f = 0; f < n_features; ++f) {
    FeatureScore& fs = out[static_cast<std::size_t>(f)];
    fs.feature = static_cast<int>(f);
    fs.method = method;
    double sum = 0.0;
    int defined = 0;
    for (const auto& h : horizons) {
      if (h.degenerate) {
        fs.per_horizon.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        fs.per_horizon.push_back(h.scores[f]);
        sum += h.scores[f];
        ++defined;
      }
    }
    fs.averaged = sum / static_cast<double>(defined);
  }
  return out;
}

FeatureSelection select_features(const std::vector<std::vector<FeatureScore>>& ranking_per_event,
                                 const std::vector<int>& m) {
  if (ranking_per_event.size() != m.size())
    throw DataError("per-event sizes do not match number of event rankings");
  FeatureSelection sel;
  sel.sizes = m;
  for (std::size_t k = 0; k < ranking_per_event.size(); ++k) {
    const auto& scores = ranking_per_event[k];
    if (m[k] < 0 || static_cast<std::size_t>(m[k]) > scores.size())
      throw DataError("m_k = " + std::to_string(m[k]) + " exceeds feature count " +
                      std::to_string(scores.size()));
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[static_cast<std::size_t>(a)].averaged != scores[static_cast<std::size_t>(b)].averaged)
        return scores[static_cast<std::size_t>(a)].averaged > scores[static_cast<std::size_t>(b)].averaged;
      return scores[static_cast<std::size_t>(a)].feature < scores[static_cast<std::size_t>(b)].feature;
    });
    std::vector<int> selected;
    for (int r = 0; r < m[k]; ++r) selected.push_back(scores[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])].feature);
    std::sort(selected.begin(), selected.end());
    sel.per_event.push_back(std::move(selected));
  }
  // v_s = intersection of all v_k
  if (!sel.per_event.empty()) {
    sel.shared = sel.per_event[0];
    for (std::size_t k = 1; k < sel.per_event.size(); ++k) {
      std::vector<int> next;
      std::set_intersection(sel.shared.begin(), sel.shared.end(), sel.per_event[k].begin(),
                            sel.per_event[k].end(), std::back_inserter(next));
      sel.shared = std::move(next);
    }
  }
  return sel;
}

FilterRanking rank_features_for_event(const SurvivalDataset& d, int event,
                                      const RankOptions& options, std::uint64_t seed) {
  if (options.horizons.empty()) throw DataError("rank_features needs at least one horizon");
  FilterRanking out;
  out.event = event;

  std::vector<HorizonScores> per_horizon;
  std::vector<Eigen::VectorXd> anova_p;
  for (std::size_t h = 0; h < options.horizons.size(); ++h) {
    const double horizon = options.horizons[h];
    TimeFixedLabels labels = time_fixed_labels(d, event, horizon);
    HorizonScores hs;
    hs.horizon = horizon;
    if (!labels.has_both_classes()) {
      hs.degenerate = true;
      per_horizon.push_back(std::move(hs));
      continue;
    }
    switch (options.method) {
      case FilterMethod::anova: {
        AnovaScores a = anova_score(d, labels);
        hs.scores = a.f_stat;
        break;
      }
      case FilterMethod::svm: {
        hs.scores = svm_score(d, labels, options.svm,
                              derive_seed(seed, "svm-horizon", static_cast<std::uint64_t>(h)));
        break;
      }
      case FilterMethod::relieff: {
        hs.scores = relieff_score(d, labels, options.relieff,
                                  derive_seed(seed, "relieff-horizon", static_cast<std::uint64_t>(h)),
                                  &out.warnings);
        break;
      }
    }
    per_horizon.push_back(std::move(hs));
  }

  out.scores = average_over_horizons(per_horizon, options.method, &out.warnings);

  if (options.method == FilterMethod::anova) {
    // report a p-value consistent with the averaged-F ranking: all horizons
    // share the same group-size degrees of freedom
    const double df_within = static_cast<double>(d.num_records() - 2);
    boost::math::fisher_f f_dist(1.0, df_within);
    for (auto& fs : out.scores) {
      if (fs.averaged >= kPerfectSeparationF) fs.p_value = 0.0;
      else fs.p_value = boost::math::cdf(boost::math::complement(f_dist, fs.averaged));
    }
  }
  return out;
}

void write_ranking_report(const FilterRanking& ranking, const std::vector<double>& horizons,
                          const std::vector<FeatureMeta>& features, const std::string& path) {
  CsvTable table;
  table.header = {"rank", "feature", "method"};
  for (double h : horizons) table.header.push_back("score_dt" + format_double(h));
  table.header.push_back("averaged_score");
  table.header.push_back("p_value");

  std::vector<const FeatureScore*> order;
  for (const auto& fs : ranking.scores) order.push_back(&fs);
  std::sort(order.begin(), order.end(), [](const FeatureScore* a, const FeatureScore* b) {
    if (a->averaged != b->averaged) return a->averaged > b->averaged;
    return a->feature < b->feature;
  });

  int rank = 1;
  for (const FeatureScore* fs : order) {
    std::vector<std::string> row;
    row.push_back(std::to_string(rank++));
    row.push_back(features[static_cast<std::size_t>(fs->feature)].name);
    row.push_back(to_string(fs->method));
    for (double v : fs->per_horizon)
      row.push_back(std::isnan(v) ? std::string() : format_double(v));
    row.push_back(format_double(fs->averaged));
    row.push_back(std::isnan(fs->p_value) ? std::string() : format_double(fs->p_value));
    table.rows.push_back(std::move(row));
  }
  write_csv(table, path);
}

}  // namespace survsel
