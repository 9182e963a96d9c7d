#pragma once

// CART classification trees with Gini impurity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "random.hpp"

namespace esdgait::forest {

/// N x D feature table with integer class labels in [0, K).
struct Dataset {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> features;  // row-major
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  std::size_t n_classes() const { return class_names.size(); }

  std::span<const double> row(std::size_t i) const { return {features.data() + i * n_cols, n_cols}; }
  double at(std::size_t i, std::size_t j) const { return features[i * n_cols + j]; }

  /// With `require_every_class` false a class may be absent (training folds).
  void validate(bool require_every_class = true) const {
    const std::size_t k = n_classes();
    if (features.size() != n_rows * n_cols) throw ValidationError("dataset feature table size mismatch");
    if (labels.size() != n_rows) throw ValidationError("dataset label count mismatch");
    if (feature_names.size() != n_cols) throw ValidationError("dataset feature name count mismatch");
    if (k < 2 || (require_every_class && n_rows < k)) throw ValidationError("dataset needs N >= K >= 2");
    if (n_rows == 0) throw ValidationError("dataset has no rows");
    std::vector<std::size_t> counts(k, 0);
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= k) throw ValidationError("label outside [0, K)");
      ++counts[static_cast<std::size_t>(y)];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (require_every_class && counts[c] == 0) throw ValidationError("class '" + class_names[c] + "' has no samples");
    for (double v : features)
      if (!std::isfinite(v)) throw ValidationError("dataset contains a non-finite feature value");
  }

  /// Rows `indices` (in order) as a new dataset with the same schema.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.n_rows = indices.size();
    out.n_cols = n_cols;
    out.feature_names = feature_names;
    out.class_names = class_names;
    out.features.reserve(indices.size() * n_cols);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
      const auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

/// Per-split feature subsample rule.
struct MaxFeatures {
  enum class Kind { sqrt, log2, all, count, fraction };
  Kind kind = Kind::sqrt;
  double value = 0.0;  // for count / fraction

  std::size_t resolve(std::size_t n_features) const {
    const double d = static_cast<double>(n_features);
    std::size_t k = n_features;
    switch (kind) {
      case Kind::sqrt: k = static_cast<std::size_t>(std::floor(std::sqrt(d))); break;
      case Kind::log2: k = static_cast<std::size_t>(std::floor(std::log2(d))); break;
      case Kind::all: k = n_features; break;
      case Kind::count: k = static_cast<std::size_t>(value); break;
      case Kind::fraction: k = static_cast<std::size_t>(std::floor(value * d)); break;
    }
    return std::clamp<std::size_t>(k, 1, n_features);
  }

  nlohmann::json to_json() const {
    switch (kind) {
      case Kind::sqrt: return "sqrt";
      case Kind::log2: return "log2";
      case Kind::all: return "all";
      case Kind::count: return static_cast<std::int64_t>(value);
      case Kind::fraction: return value;
    }
    return "sqrt";
  }

  static MaxFeatures from_json(const nlohmann::json& j) {
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "sqrt") return {Kind::sqrt, 0.0};
      if (s == "log2") return {Kind::log2, 0.0};
      if (s == "all") return {Kind::all, 0.0};
      throw ValidationError("unknown max_features rule '" + s + "'");
    }
    if (j.is_number_integer()) {
      if (j.get<std::int64_t>() < 1) throw ValidationError("max_features count must be >= 1");
      return {Kind::count, static_cast<double>(j.get<std::int64_t>())};
    }
    if (j.is_number_float()) {
      const double f = j.get<double>();
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("max_features fraction must be in (0, 1]");
      return {Kind::fraction, f};
    }
    throw ValidationError("max_features must be a rule name, count or fraction");
  }

  bool operator==(const MaxFeatures&) const = default;
};

/// Defaults are the published hyperparameters; max_features is our choice.
struct ForestParams {
  std::size_t n_estimators = 100;
  std::size_t min_samples_split = 5;
  std::size_t min_samples_leaf = 4;
  std::size_t max_depth = 100;
  bool bootstrap = false;
  MaxFeatures max_features{};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 1) throw ValidationError("n_estimators must be >= 1");
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (min_samples_split < 2) throw ValidationError("min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"n_estimators", n_estimators}, {"min_samples_split", min_samples_split},
            {"min_samples_leaf", min_samples_leaf}, {"max_depth", max_depth},
            {"bootstrap", bootstrap},       {"max_features", max_features.to_json()},
            {"seed", seed}};
  }

  static ForestParams from_json(const nlohmann::json& j) {
    ForestParams p;
    p.n_estimators = j.value("n_estimators", p.n_estimators);
    p.min_samples_split = j.value("min_samples_split", p.min_samples_split);
    p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    if (j.contains("max_features")) p.max_features = MaxFeatures::from_json(j.at("max_features"));
    p.seed = j.value("seed", p.seed);
    p.validate();
    return p;
  }

  bool operator==(const ForestParams&) const = default;
};

/// 1 - sum_k (n_k / N)^2.
inline double gini_impurity(std::span<const double> class_counts) {
  double total = 0.0;
  for (double c : class_counts) {
    if (c < 0.0) throw DomainError("gini_impurity: negative class count");
    total += c;
  }
  if (!(total > 0.0)) throw DomainError("gini_impurity: empty histogram");
  double sum_sq = 0.0;
  for (double c : class_counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // go left when x <= threshold
  int left = -1;
  int right = -1;
  std::size_t n_samples = 0;
  std::size_t depth = 0;
  double impurity = 0.0;
  // (n_node / N_root) * (impurity - weighted child impurity); 0 for leaves
  double weighted_impurity_decrease = 0.0;
  std::vector<double> class_counts;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t n_features = 0;
  std::size_t n_classes = 0;

  const TreeNode& leaf_for(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }

  /// Class frequencies of the leaf reached by `row`.
  std::vector<double> predict_proba(std::span<const double> row) const {
    const TreeNode& leaf = leaf_for(row);
    std::vector<double> p = leaf.class_counts;
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
    return p;
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }

  std::size_t internal_node_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }

  bool operator==(const DecisionTree& o) const {
    if (nodes.size() != o.nodes.size() || n_features != o.n_features || n_classes != o.n_classes) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto &a = nodes[i], &b = o.nodes[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
          a.n_samples != b.n_samples || a.class_counts != b.class_counts ||
          a.weighted_impurity_decrease != b.weighted_impurity_decrease)
        return false;
    }
    return true;
  }
};

namespace detail {

class TreeBuilder {
public:
  TreeBuilder(const Dataset& data, const ForestParams& params, std::uint64_t seed, std::vector<std::size_t> samples)
      : data_(data), params_(params), rng_(seed), samples_(std::move(samples)) {
    k_ = data.n_classes();
    n_try_ = params.max_features.resolve(data.n_cols);
    root_n_ = static_cast<double>(samples_.size());
    feature_pool_.resize(data.n_cols);
    order_.reserve(samples_.size());
  }

  DecisionTree build() {
    tree_.n_features = data_.n_cols;
    tree_.n_classes = k_;
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -1.0;  // sum over children of sum_k n_k^2 / n_child; larger is better
    std::size_t n_left = 0;
  };

  int grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    TreeNode node;
    node.n_samples = n;
    node.depth = depth;
    node.class_counts.assign(k_, 0.0);
    for (std::size_t i = begin; i < end; ++i) node.class_counts[static_cast<std::size_t>(data_.labels[samples_[i]])] += 1.0;
    node.impurity = gini_impurity(node.class_counts);

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(node);

    const bool stop = node.impurity == 0.0 || n < params_.min_samples_split || depth >= params_.max_depth ||
                      n < 2 * params_.min_samples_leaf;
    if (stop) return id;

    const std::optional<Split> split = best_split(begin, end, node.class_counts);
    if (!split) return id;

    // Parent score is sum_k n_k^2 / n; decrease * n = child score - parent score.
    double parent_score = 0.0;
    for (double c : node.class_counts) parent_score += c * c;
    parent_score /= static_cast<double>(n);
    const double decrease = (split->score - parent_score) / static_cast<double>(n);
    if (!(decrease > 1e-12)) return id;

    const auto mid = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                           samples_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t s) {
                                             return data_.at(s, split->feature) <= split->threshold;
                                           });
    const std::size_t cut = static_cast<std::size_t>(mid - samples_.begin());

    const int left = grow(begin, cut, depth + 1);
    const int right = grow(cut, end, depth + 1);
    TreeNode& self = tree_.nodes[static_cast<std::size_t>(id)];
    self.feature = static_cast<int>(split->feature);
    self.threshold = split->threshold;
    self.left = left;
    self.right = right;
    self.weighted_impurity_decrease = static_cast<double>(n) / root_n_ * decrease;
    return id;
  }

  std::vector<std::size_t> sample_features() {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_try_; ++i) {
      const std::size_t j = i + uniform_index(rng_, feature_pool_.size() - i);
      std::swap(feature_pool_[i], feature_pool_[j]);
    }
    std::vector<std::size_t> chosen(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(n_try_));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  std::optional<Split> best_split(std::size_t begin, std::size_t end, const std::vector<double>& counts) {
    const std::size_t n = end - begin;
    const std::size_t min_leaf = params_.min_samples_leaf;
    std::optional<Split> best;
    std::vector<double> left(k_), right(k_);

    for (std::size_t f : sample_features()) {
      order_.clear();
      for (std::size_t i = begin; i < end; ++i) order_.emplace_back(data_.at(samples_[i], f), data_.labels[samples_[i]]);
      std::sort(order_.begin(), order_.end());
      if (order_.front().first == order_.back().first) continue;

      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      double left_sq = 0.0, right_sq = 0.0;
      for (double c : right) right_sq += c * c;

      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto y = static_cast<std::size_t>(order_[i].second);
        left_sq += 2.0 * left[y] + 1.0;
        right_sq -= 2.0 * right[y] - 1.0;
        left[y] += 1.0;
        right[y] -= 1.0;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf) continue;
        if (n - n_left < min_leaf) break;
        if (order_[i].first == order_[i + 1].first) continue;
        const double score = left_sq / static_cast<double>(n_left) + right_sq / static_cast<double>(n - n_left);
        if (!best || score > best->score) {
          double threshold = 0.5 * (order_[i].first + order_[i + 1].first);
          if (threshold >= order_[i + 1].first) threshold = order_[i].first;
          best = Split{f, threshold, score, n_left};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestParams& params_;
  Rng rng_;
  std::vector<std::size_t> samples_;
  std::size_t k_ = 0;
  std::size_t n_try_ = 1;
  double root_n_ = 0.0;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::pair<double, int>> order_;
  DecisionTree tree_;
};

}  // namespace detail

/// Greedy CART growth on `samples` (all rows when empty; duplicates allowed).
/// Splits consider `max_features` features drawn without replacement per node
/// and midpoints between consecutive distinct values. Ties in impurity
/// decrease go to the lowest feature index, then the lowest threshold.
inline DecisionTree fit_tree(const Dataset& data, const ForestParams& params, std::uint64_t rng_seed,
                             std::vector<std::size_t> samples = {}) {
  params.validate();
  if (samples.empty()) {
    samples.resize(data.n_rows);
    std::iota(samples.begin(), samples.end(), std::size_t{0});
  }
  return detail::TreeBuilder(data, params, rng_seed, std::move(samples)).build();
}

}  // namespace esdgait::forest
