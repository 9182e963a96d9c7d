#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "log.hpp"

namespace esdgait::forest {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [truth][predicted]

inline std::size_t infer_class_count(std::span<const int> a, std::span<const int> b) {
  int top = -1;
  for (int v : a) top = std::max(top, v);
  for (int v : b) top = std::max(top, v);
  return static_cast<std::size_t>(top + 1);
}

inline ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, std::size_t n_classes = 0) {
  if (pred.size() != truth.size()) throw ValidationError("prediction/truth length mismatch");
  const std::size_t k = std::max(n_classes, infer_class_count(pred, truth));
  ConfusionMatrix m(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) throw ValidationError("negative class id");
    ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return m;
}

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ValidationError("prediction/truth length mismatch");
  if (pred.empty()) throw ValidationError("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Cohen's kappa from a confusion matrix: (p_o - p_e) / (1 - p_e).
/// Returns 0 for the degenerate p_e = 1 case.
inline double cohens_kappa(const ConfusionMatrix& m) {
  const std::size_t k = m.size();
  double n = 0.0, agree = 0.0;
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(m[i][j]);
      n += v;
      rows[i] += v;
      cols[j] += v;
      if (i == j) agree += v;
    }
  }
  if (n == 0.0) throw ValidationError("cohens_kappa of an empty confusion matrix");
  const double p_o = agree / n;
  double p_e = 0.0;
  for (std::size_t i = 0; i < k; ++i) p_e += rows[i] * cols[i];
  p_e /= n * n;
  if (p_e >= 1.0) return 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

inline double cohens_kappa(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ValidationError("cohens_kappa: length mismatch");
  if (pred.empty()) throw ValidationError("cohens_kappa: empty input");
  return cohens_kappa(confusion_matrix(pred, truth));
}

/// Mann-Whitney AUROC of `scores` for positives (nonzero flag) vs negatives;
/// ties count 1/2.
inline double binary_auroc(std::span<const double> scores, std::span<const unsigned char> positive) {
  if (scores.size() != positive.size()) throw ValidationError("binary_auroc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average 1-based ranks over tie groups.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw ValidationError("binary_auroc needs both positives and negatives");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct AurocResult {
  double value = 0.5;
  std::vector<std::size_t> skipped_classes;  // absent from truth (or the only class present)
};

/// Binary: Mann-Whitney on the class-1 column. Multiclass: unweighted mean of
/// one-vs-rest AUROCs over the classes that have both positives and negatives.
inline AurocResult auroc(const std::vector<std::vector<double>>& scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw ValidationError("auroc: score/truth length mismatch");
  if (scores.empty()) throw ValidationError("auroc: empty input");
  const std::size_t k = scores.front().size();
  for (const auto& row : scores)
    if (row.size() != k) throw ValidationError("auroc: ragged probability rows");
  if (k < 2) throw ValidationError("auroc needs at least two classes");

  std::vector<double> column(scores.size());
  std::vector<unsigned char> positive(scores.size());
  auto one_vs_rest = [&](std::size_t c) -> std::optional<double> {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      column[i] = scores[i][c];
      positive[i] = truth[i] == static_cast<int>(c);
      n_pos += positive[i];
    }
    if (n_pos == 0 || n_pos == scores.size()) return std::nullopt;
    return binary_auroc(column, positive);
  };

  AurocResult result;
  if (k == 2) {
    if (auto v = one_vs_rest(1)) {
      result.value = *v;
      return result;
    }
    throw ValidationError("auroc: truth contains a single class");
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (auto v = one_vs_rest(c)) {
      sum += *v;
      ++used;
    } else {
      result.skipped_classes.push_back(c);
      if (log::enabled(log::Level::warn))
        log::warn("auroc: class " + std::to_string(c) + " has no positives or no negatives; one-vs-rest term skipped");
    }
  }
  if (used == 0) throw ValidationError("auroc: no class has both positives and negatives");
  result.value = sum / static_cast<double>(used);
  return result;
}

}  // namespace esdgait::forest
