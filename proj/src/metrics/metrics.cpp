#include "mgnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <vector>

#include "mgnet/errors.hpp"

namespace mgnet {
namespace {

void check_labels(std::span<const int> labels) {
  for (int l : labels) {
    if (l != 0 && l != 1) throw ArgumentError("labels must be 0 or 1");
  }
}

}  // namespace

Confusion confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw ArgumentError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                        std::to_string(predictions.size()) + " predictions");
  }
  if (labels.empty()) throw ArgumentError("confusion: empty input");
  check_labels(labels);
  check_labels(predictions);
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predictions[i] == 1 ? c.tp : c.fn)++;
    } else {
      (predictions[i] == 1 ? c.fp : c.tn)++;
    }
  }
  return c;
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ArgumentError("roc_auc: length mismatch");
  check_labels(labels);
  for (double s : scores) {
    if (!std::isfinite(s)) throw ArgumentError("roc_auc: non-finite score");
  }
  const std::size_t n = labels.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ArgumentError("roc_auc needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep tie groups in ascending score order. Each positive beats every
  // negative seen in earlier groups and ties half of the negatives in its own.
  // Counts are kept doubled so every intermediate is an exact integer.
  std::uint64_t twice_wins = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_here = 0, neg_here = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos_here : neg_here)++;
      ++j;
    }
    twice_wins += pos_here * (2 * neg_below + neg_here);
    neg_below += neg_here;
    i = j;
  }
  return static_cast<double>(twice_wins) / 2.0 /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalMetrics compute_metrics(std::span<const int> labels, std::span<const int> predictions,
                            std::span<const double> scores) {
  EvalMetrics m;
  m.counts = confusion(labels, predictions);
  const Confusion& c = m.counts;
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw ArgumentError("metrics need at least one positive and one negative label");
  }
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  m.auc = roc_auc(labels, scores);
  return m;
}

std::string format_metrics_block(const EvalMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "accuracy=%.6f\nauc=%.6f\nsensitivity=%.6f\nspecificity=%.6f\n"
                "tp=%zu\ntn=%zu\nfp=%zu\nfn=%zu\n",
                m.accuracy, m.auc, m.sensitivity, m.specificity, m.counts.tp, m.counts.tn,
                m.counts.fp, m.counts.fn);
  return buf;
}

}  // namespace mgnet
