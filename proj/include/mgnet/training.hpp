#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgnet/dataset.hpp"
#include "mgnet/metrics.hpp"
#include "mgnet/model.hpp"

namespace mgnet {

enum class Aggregation {
  kScan,     // every scan counts once
  kSubject,  // scan probabilities averaged per subject
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 2;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// Running training metrics are reported every log_every epochs (0 = never).
  std::size_t log_every = 1;

  void validate() const;
};

/// A volume resident in memory, ready for the model.
struct Sample {
  Tensor volume;
  int label = 0;
  std::string subject_id;
  std::string scan_id;
};

/// Loads the listed manifest records (all when `indices` is empty), z-scoring
/// each volume when `normalize_volumes` is set.
std::vector<Sample> load_samples(const Manifest& manifest, std::span<const std::size_t> indices,
                                 bool normalize_volumes);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  /// Metrics over the predictions made during the epoch, before each update.
  std::optional<EvalMetrics> train_metrics;
  double seconds = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;

  /// `epoch=<n> loss=<f> acc=<f> auc=<f>` per epoch. Wall-clock goes on
  /// separate lines starting with `time=` when include_time is set.
  std::string to_log(bool include_time) const;
};

struct TrainResult {
  MgNetParams params;
  RunHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD on mean cross-entropy. Throws ArgumentError on an empty
/// or single-class training set, DivergenceError on a non-finite loss.
TrainResult train(const MgNetConfig& model_config, std::span<const Sample> train_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Prediction {
  int label = 0;
  int predicted = 0;
  double score = 0.0;  // softmax probability of class 1
  std::string subject_id;
};

std::vector<Prediction> predict(const MgNetParams& params, std::span<const Sample> samples);

/// Forward-only evaluation; ShapeError when a sample does not match the
/// model geometry.
EvalMetrics evaluate(const MgNetParams& params, std::span<const Sample> samples,
                     Aggregation aggregation = Aggregation::kScan);
EvalMetrics metrics_from_predictions(std::span<const Prediction> predictions,
                                     Aggregation aggregation);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

struct CvResult {
  std::vector<EvalMetrics> folds;
  std::vector<RunHistory> histories;
  MetricSummary accuracy, sensitivity, specificity, auc;

  /// fold=<i> followed by a metrics block, per fold, then mean_/std_ lines.
  std::string report() const;
};

struct CvOptions {
  bool normalize_volumes = true;
  Aggregation aggregation = Aggregation::kScan;
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
};

/// Trains a freshly initialised model per fold on the other folds and
/// evaluates on the held-out one. StateError if a fold's train and test
/// subjects ever overlap.
CvResult cross_validate(const MgNetConfig& model_config, const Manifest& manifest,
                        const FoldAssignment& folds, const TrainConfig& cfg,
                        const CvOptions& options = {});

MetricSummary summarize(std::span<const double> values);

std::string format_double(double v);

}  // namespace mgnet
