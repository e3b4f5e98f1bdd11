#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace mgnet {

/// Binary confusion counts; class 1 (AD) is the positive class.
struct Confusion {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

struct EvalMetrics {
  Confusion counts;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
};

/// ArgumentError on length mismatch, empty input or labels outside {0,1}.
Confusion confusion(std::span<const int> labels, std::span<const int> predictions);

/// Mann-Whitney estimate of ROC AUC: fraction of (positive, negative) pairs
/// ranked correctly, ties counting one half. ArgumentError unless both
/// classes are present and all scores are finite.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// All four metrics. ArgumentError when either class is absent, since
/// sensitivity, specificity and AUC are then undefined.
EvalMetrics compute_metrics(std::span<const int> labels, std::span<const int> predictions,
                            std::span<const double> scores);

/// Lines accuracy=, auc=, sensitivity=, specificity=, tp=, tn=, fp=, fn=.
std::string format_metrics_block(const EvalMetrics& m);

}  // namespace mgnet
