#pragma once

// Stratified shuffled k-fold cross-validation, pooled evaluation reports and
// randomized hyperparameter search.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "forest.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "random.hpp"

namespace esdgait::forest {

/// Partitions [0, N) into k folds. Each class's indices are shuffled with
/// `shuffle_seed` and dealt round-robin; the dealing position carries over
/// from one class to the next, so both per-class and total fold sizes differ
/// by at most one.
inline std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                              std::uint64_t shuffle_seed) {
  if (k < 2) throw ValidationError("stratified_kfold: k must be >= 2");
  if (k > labels.size()) throw ValidationError("stratified_kfold: k exceeds the number of samples");
  int top = -1;
  for (int y : labels) {
    if (y < 0) throw ValidationError("stratified_kfold: negative label");
    top = std::max(top, y);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(top + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  Rng rng(shuffle_seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) {
      folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct EvalReport {
  double accuracy = 0.0;
  double cohens_kappa = 0.0;
  double auroc = 0.5;
  ConfusionMatrix confusion_matrix;
  std::vector<double> per_fold_accuracies;
  std::vector<double> importances;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<int> predictions;  // pooled, indexed like the dataset rows
  std::size_t n_samples = 0;
  std::size_t folds = 0;
  std::string protocol = "stratified_kfold";

  nlohmann::json to_json() const {
    nlohmann::json imp = nlohmann::json::array();
    for (std::size_t j = 0; j < importances.size(); ++j)
      imp.push_back({{"feature", feature_names[j]}, {"importance", importances[j]}});
    return {{"protocol", protocol},
            {"n_samples", n_samples},
            {"folds", folds},
            {"accuracy", accuracy},
            {"cohens_kappa", cohens_kappa},
            {"auroc", auroc},
            {"class_names", class_names},
            {"confusion_matrix", confusion_matrix},
            {"per_fold_accuracies", per_fold_accuracies},
            {"predictions", predictions},
            {"importances", imp}};
  }
};

namespace detail {

inline std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> held_out) {
  std::vector<bool> out(n, false);
  for (std::size_t i : held_out) out[i] = true;
  std::vector<std::size_t> rest;
  rest.reserve(n - held_out.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!out[i]) rest.push_back(i);
  return rest;
}

inline void finalize_report(EvalReport& report, const Dataset& data, const std::vector<std::vector<double>>& proba,
                            std::span<const std::size_t> scored) {
  std::vector<int> pred, truth;
  std::vector<std::vector<double>> scores;
  for (std::size_t i : scored) {
    pred.push_back(report.predictions[i]);
    truth.push_back(data.labels[i]);
    scores.push_back(proba[i]);
  }
  report.accuracy = accuracy(pred, truth);
  report.confusion_matrix = confusion_matrix(pred, truth, data.n_classes());
  report.cohens_kappa = cohens_kappa(report.confusion_matrix);
  report.auroc = forest::auroc(scores, truth).value;
}

}  // namespace detail

/// Trains on k-1 folds and predicts the held-out fold, for every fold. Metrics
/// come from the pooled predictions; importances are the mean of the fold
/// models' MDI vectors.
inline EvalReport cross_validate(const Dataset& data, const ForestParams& params, std::size_t k,
                                 std::uint64_t seed, unsigned jobs = 1) {
  data.validate();
  const auto folds = stratified_kfold(data.labels, k, seed);

  EvalReport report;
  report.n_samples = data.n_rows;
  report.folds = k;
  report.feature_names = data.feature_names;
  report.class_names = data.class_names;
  report.predictions.assign(data.n_rows, -1);
  report.importances.assign(data.n_cols, 0.0);
  std::vector<std::vector<double>> proba(data.n_rows);
  std::size_t importance_folds = 0;

  for (const auto& test : folds) {
    // A training split may lack a rare class; that class then never wins a vote.
    const Dataset train = data.subset(detail::complement(data.n_rows, test));
    const RandomForestModel model = fit_forest(train, params, jobs);
    std::size_t hits = 0;
    for (std::size_t i : test) {
      proba[i] = predict_proba(model, data.row(i));
      report.predictions[i] = argmax(proba[i]);
      hits += report.predictions[i] == data.labels[i];
    }
    report.per_fold_accuracies.push_back(static_cast<double>(hits) / static_cast<double>(test.size()));
    try {
      const auto imp = mdi_importance(model);
      for (std::size_t j = 0; j < imp.size(); ++j) report.importances[j] += imp[j];
      ++importance_folds;
    } catch (const UndefinedImportanceError&) {
      log::warn("cross_validate: fold model has no splits; excluded from importances");
    }
  }
  if (importance_folds > 0)
    for (double& v : report.importances) v /= static_cast<double>(importance_folds);

  std::vector<std::size_t> all(data.n_rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  detail::finalize_report(report, data, proba, all);
  return report;
}

/// Single stratified holdout: one fold of round(1 / test_fraction) is held out.
inline EvalReport holdout_evaluate(const Dataset& data, const ForestParams& params, double test_fraction,
                                   std::uint64_t seed, unsigned jobs = 1) {
  data.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must be in (0, 1)");
  const auto k = static_cast<std::size_t>(std::llround(1.0 / test_fraction));
  const auto folds = stratified_kfold(data.labels, std::max<std::size_t>(k, 2), seed);
  const auto& test = folds.front();

  EvalReport report;
  report.protocol = "stratified_holdout";
  report.n_samples = test.size();
  report.folds = 1;
  report.feature_names = data.feature_names;
  report.class_names = data.class_names;
  report.predictions.assign(data.n_rows, -1);

  Dataset train = data.subset(detail::complement(data.n_rows, test));
  const RandomForestModel model = fit_forest(train, params, jobs);
  std::vector<std::vector<double>> proba(data.n_rows);
  for (std::size_t i : test) {
    proba[i] = predict_proba(model, data.row(i));
    report.predictions[i] = argmax(proba[i]);
  }
  detail::finalize_report(report, data, proba, test);
  report.per_fold_accuracies = {report.accuracy};
  report.importances = mdi_importance(model);
  return report;
}

// --- randomized search -----------------------------------------------------

/// Candidate values per hyperparameter; the search samples from the product.
struct SearchSpace {
  std::vector<std::size_t> n_estimators;
  std::vector<std::size_t> max_depth;
  std::vector<std::size_t> min_samples_split;
  std::vector<std::size_t> min_samples_leaf;
  std::vector<MaxFeatures> max_features;
  std::vector<bool> bootstrap;

  std::size_t size() const {
    return n_estimators.size() * max_depth.size() * min_samples_split.size() * min_samples_leaf.size() *
           max_features.size() * bootstrap.size();
  }

  void validate() const {
    if (n_estimators.empty() || max_depth.empty() || min_samples_split.empty() || min_samples_leaf.empty() ||
        max_features.empty() || bootstrap.empty())
      throw ValidationError("search space has an empty grid");
  }

  /// Decodes a mixed-radix index into parameters (other fields from `base`).
  ForestParams at(std::size_t index, ForestParams base) const {
    auto take = [&index](const auto& axis) {
      const auto v = axis[index % axis.size()];
      index /= axis.size();
      return v;
    };
    base.n_estimators = take(n_estimators);
    base.max_depth = take(max_depth);
    base.min_samples_split = take(min_samples_split);
    base.min_samples_leaf = take(min_samples_leaf);
    base.max_features = take(max_features);
    base.bootstrap = take(bootstrap);
    return base;
  }

  /// Shipped default grid: 10 * 11 * 6 * 6 * 2 * 1 = 7920 combinations.
  static SearchSpace default_space() {
    SearchSpace s;
    s.n_estimators = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    s.max_depth = {5, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100};
    s.min_samples_split = {2, 3, 4, 5, 6, 8};
    s.min_samples_leaf = {1, 2, 3, 4, 5, 6};
    s.max_features = {{MaxFeatures::Kind::sqrt, 0.0}, {MaxFeatures::Kind::log2, 0.0}};
    s.bootstrap = {false};
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json mf = nlohmann::json::array();
    for (const auto& m : max_features) mf.push_back(m.to_json());
    return {{"n_estimators", n_estimators}, {"max_depth", max_depth},
            {"min_samples_split", min_samples_split}, {"min_samples_leaf", min_samples_leaf},
            {"max_features", mf},           {"bootstrap", std::vector<bool>(bootstrap)}};
  }

  static SearchSpace from_json(const nlohmann::json& j) {
    SearchSpace s = default_space();
    auto read = [&j](const char* key, auto& axis) {
      if (j.contains(key)) axis = j.at(key).get<std::decay_t<decltype(axis)>>();
    };
    read("n_estimators", s.n_estimators);
    read("max_depth", s.max_depth);
    read("min_samples_split", s.min_samples_split);
    read("min_samples_leaf", s.min_samples_leaf);
    if (j.contains("bootstrap")) {
      s.bootstrap.clear();
      for (const auto& b : j.at("bootstrap")) s.bootstrap.push_back(b.get<bool>());
    }
    if (j.contains("max_features")) {
      s.max_features.clear();
      for (const auto& m : j.at("max_features")) s.max_features.push_back(MaxFeatures::from_json(m));
    }
    s.validate();
    return s;
  }
};

struct SearchTrial {
  std::size_t grid_index = 0;
  ForestParams params;
  double mean_accuracy = 0.0;
};

struct SearchResult {
  ForestParams best;
  std::vector<SearchTrial> trials;  // in sampling order

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& t : trials)
      rows.push_back({{"grid_index", t.grid_index}, {"params", t.params.to_json()}, {"mean_accuracy", t.mean_accuracy}});
    return {{"best", best.to_json()}, {"trials", rows}};
  }
};

/// Grid indices of `n_iter` distinct combinations, uniformly without replacement.
inline std::vector<std::size_t> sample_grid_indices(std::size_t grid_size, std::size_t n_iter, std::uint64_t seed) {
  if (n_iter > grid_size) {
    log::warn("randomized_search: n_iter " + std::to_string(n_iter) + " exceeds grid size " +
              std::to_string(grid_size) + "; searching the whole grid");
    n_iter = grid_size;
  }
  Rng rng(seed);
  std::vector<std::size_t> picked;
  std::set<std::size_t> seen;
  while (picked.size() < n_iter) {
    const std::size_t i = uniform_index(rng, grid_size);
    if (seen.insert(i).second) picked.push_back(i);
  }
  return picked;
}

/// Scores each sampled combination by mean stratified k-fold accuracy and
/// returns the best (ties: first sampled).
inline SearchResult randomized_search(const Dataset& data, const SearchSpace& space, std::size_t n_iter,
                                      std::size_t k, std::uint64_t seed, const ForestParams& base = {},
                                      unsigned jobs = 1) {
  space.validate();
  if (n_iter == 0) throw ValidationError("randomized_search: n_iter must be >= 1");
  SearchResult result;
  const auto indices = sample_grid_indices(space.size(), n_iter, derive_seed(seed, 0x5ea4c4));
  bool have_best = false;
  double best_score = -1.0;
  for (std::size_t idx : indices) {
    const ForestParams p = space.at(idx, base);
    const EvalReport r = cross_validate(data, p, k, seed, jobs);
    double mean = 0.0;
    for (double a : r.per_fold_accuracies) mean += a;
    mean /= static_cast<double>(r.per_fold_accuracies.size());
    result.trials.push_back({idx, p, mean});
    if (!have_best || mean > best_score) {
      best_score = mean;
      result.best = p;
      have_best = true;
    }
  }
  return result;
}

}  // namespace esdgait::forest
