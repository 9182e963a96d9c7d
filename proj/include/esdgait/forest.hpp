#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "tree.hpp"

namespace esdgait::forest {

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::uint64_t> per_tree_seeds;

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_classes() const { return class_names.size(); }
};

/// Seed of tree `index` for a forest seeded with `forest_seed`.
inline std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t index) {
  return derive_seed(forest_seed, index);
}

/// Trains params.n_estimators trees in parallel. Without bootstrap every tree
/// sees every row and diversity comes only from per-split feature sampling.
/// The result does not depend on `jobs`.
inline RandomForestModel fit_forest(const Dataset& data, const ForestParams& params, unsigned jobs = 1) {
  params.validate();
  data.validate(false);
  RandomForestModel model;
  model.params = params;
  model.feature_names = data.feature_names;
  model.class_names = data.class_names;
  model.per_tree_seeds.resize(params.n_estimators);
  for (std::size_t t = 0; t < params.n_estimators; ++t) model.per_tree_seeds[t] = tree_seed(params.seed, t);
  model.trees.resize(params.n_estimators);

  parallel_for(params.n_estimators, jobs, [&](std::size_t t) {
    std::vector<std::size_t> rows;
    std::uint64_t split_seed = model.per_tree_seeds[t];
    if (params.bootstrap) {
      Rng draw(derive_seed(split_seed, 0xb007));
      rows.resize(data.n_rows);
      for (auto& r : rows) r = uniform_index(draw, data.n_rows);
    }
    model.trees[t] = fit_tree(data, params, split_seed, std::move(rows));
  });
  return model;
}

/// Mean over trees of the leaf class frequencies.
inline std::vector<double> predict_proba(const RandomForestModel& model, std::span<const double> row) {
  if (row.size() != model.n_features()) {
    throw ValidationError("predict_proba: row has " + std::to_string(row.size()) + " features, model expects " +
                          std::to_string(model.n_features()));
  }
  std::vector<double> p(model.n_classes(), 0.0);
  for (const auto& tree : model.trees) {
    const auto q = tree.predict_proba(row);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += q[k];
  }
  for (double& v : p) v /= static_cast<double>(model.trees.size());
  return p;
}

/// Index of the largest probability; ties go to the lowest class id.
inline int argmax(std::span<const double> p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline int predict(const RandomForestModel& model, std::span<const double> row) {
  return argmax(predict_proba(model, row));
}

/// Probability rows for every row of `data`, computed in parallel.
inline std::vector<std::vector<double>> predict_proba_all(const RandomForestModel& model, const Dataset& data,
                                                          unsigned jobs = 1) {
  std::vector<std::vector<double>> out(data.n_rows);
  parallel_for(data.n_rows, jobs, [&](std::size_t i) { out[i] = predict_proba(model, data.row(i)); });
  return out;
}

/// Mean decrease in impurity. Each tree's sample-weighted Gini decreases are
/// summed per feature and normalized to 1; the tree vectors are then averaged
/// over the trees that split at least once.
inline std::vector<double> mdi_importance(const RandomForestModel& model) {
  const std::size_t d = model.n_features();
  std::vector<double> total(d, 0.0);
  std::size_t contributing = 0;
  for (const auto& tree : model.trees) {
    std::vector<double> per_tree(d, 0.0);
    double sum = 0.0;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      per_tree[static_cast<std::size_t>(node.feature)] += node.weighted_impurity_decrease;
      sum += node.weighted_impurity_decrease;
    }
    if (!(sum > 0.0)) continue;
    for (std::size_t j = 0; j < d; ++j) total[j] += per_tree[j] / sum;
    ++contributing;
  }
  if (contributing == 0) throw UndefinedImportanceError("forest has no internal nodes; MDI is undefined");
  for (double& v : total) v /= static_cast<double>(contributing);
  return total;
}

/// Always predicts the most frequent training class (ties: lowest id).
struct MajorityClassifier {
  int majority_class = 0;
  std::size_t n_classes = 0;

  int predict() const { return majority_class; }
  std::vector<double> predict_proba() const {
    std::vector<double> p(n_classes, 0.0);
    p[static_cast<std::size_t>(majority_class)] = 1.0;
    return p;
  }
};

inline MajorityClassifier or_baseline(std::span<const int> train_labels, std::size_t n_classes = 0) {
  if (train_labels.empty()) throw ValidationError("or_baseline: no labels");
  const int max_label = *std::max_element(train_labels.begin(), train_labels.end());
  const std::size_t k = std::max(n_classes, static_cast<std::size_t>(max_label) + 1);
  std::vector<std::size_t> counts(k, 0);
  for (int y : train_labels) {
    if (y < 0) throw ValidationError("or_baseline: negative label");
    ++counts[static_cast<std::size_t>(y)];
  }
  const auto best = std::max_element(counts.begin(), counts.end());
  return {static_cast<int>(best - counts.begin()), k};
}

}  // namespace esdgait::forest
