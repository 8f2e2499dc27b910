#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "core/common.hpp"

namespace celnet {

// Accuracy at probability threshold 0.5 (p >= 0.5 predicts positive).
inline double accuracy(const std::vector<double>& probs, const std::vector<uint8_t>& labels) {
  CELNET_CHECK_ARG(probs.size() == labels.size() && !probs.empty(), "empty or misaligned inputs");
  int64_t correct = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    int pred = probs[i] >= 0.5 ? 1 : 0;
    correct += pred == int(labels[i]) ? 1 : 0;
  }
  return double(correct) / double(probs.size());
}

// ROC AUC by trapezoidal integration over the tie-grouped threshold sweep.
// Absent for single-class inputs.
inline std::optional<double> roc_auc(const std::vector<double>& scores,
                                     const std::vector<uint8_t>& labels) {
  CELNET_CHECK_ARG(scores.size() == labels.size(), "scores/labels misaligned");
  int64_t pos = 0, neg = 0;
  for (uint8_t l : labels) (l ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double auc = 0.0;
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    // advance over the tie group as one ROC segment
    size_t j = i;
    double dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? dtp : dfp) += 1.0;
      ++j;
    }
    // trapezoid between (fp, tp) and (fp+dfp, tp+dtp)
    auc += dfp / double(neg) * (tp + dtp / 2.0) / double(pos);
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return auc;
}

}  // namespace celnet
