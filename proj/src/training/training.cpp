#include "mgnet/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "mgnet/errors.hpp"
#include "mgnet/graph.hpp"
#include "mgnet/optim.hpp"
#include "mgnet/random.hpp"
#include "mgnet/volume_io.hpp"

namespace mgnet {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
}

std::vector<Sample> load_samples(const Manifest& manifest, std::span<const std::size_t> indices,
                                 bool normalize_volumes) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(manifest.records.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const VolumeRecord& r = manifest.records.at(i);
    Tensor v = load_volume(r.volume_path);
    if (!manifest.geometry.empty() && v.shape() != manifest.geometry) {
      throw DataError(r.volume_path.string() + ": geometry " + shape_str(v.shape()) +
                      " differs from manifest geometry " + shape_str(manifest.geometry));
    }
    if (normalize_volumes) v = normalize(v);
    out.push_back(Sample{std::move(v), r.label, r.subject_id, r.scan_id});
  }
  return out;
}

std::string RunHistory::to_log(bool include_time) const {
  std::string out;
  for (const EpochRecord& e : epochs) {
    const std::string acc = e.train_metrics ? format_double(e.train_metrics->accuracy) : "nan";
    const std::string auc = e.train_metrics ? format_double(e.train_metrics->auc) : "nan";
    out += "epoch=" + std::to_string(e.epoch) + " loss=" + format_double(e.mean_loss) +
           " acc=" + acc + " auc=" + auc + "\n";
    if (include_time) {
      out += "time=" + format_double(e.seconds) + " epoch=" + std::to_string(e.epoch) + "\n";
    }
  }
  return out;
}

namespace {

void require_binary(const MgNetConfig& config) {
  if (config.num_classes != 2) {
    throw ArgumentError("binary metrics need num_classes == 2, got " +
                        std::to_string(config.num_classes));
  }
}

int argmax(std::span<const float> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

Prediction make_prediction(const Tensor& logits, const Sample& s) {
  const auto p = softmax(logits.data());
  return Prediction{s.label, argmax(logits.data()), p.size() > 1 ? p[1] : 0.0, s.subject_id};
}

}  // namespace

TrainResult train(const MgNetConfig& model_config, std::span<const Sample> train_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  bool seen[2] = {false, false};
  for (const Sample& s : train_set) {
    if (s.label != 0 && s.label != 1) throw ArgumentError("training labels must be 0 or 1");
    seen[s.label] = true;
  }
  if (!seen[0] || !seen[1]) throw ArgumentError("training set contains a single class");

  MgNetConfig config = model_config;
  const Shape& first = train_set.front().volume.shape();
  const Shape spatial(first.begin() + 1, first.end());
  for (const Sample& s : train_set) {
    if (s.volume.shape() != first) {
      throw ShapeError("training volumes differ in geometry: " + shape_str(first) + " vs " +
                       shape_str(s.volume.shape()));
    }
  }
  if (config.input_spatial.empty()) config.input_spatial = spatial;

  TrainResult result{build(config), {}};
  MgNetParams& params = result.params;
  std::vector<Tensor> tensors = params.tensors();
  params.zero_grad();

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const float lr = static_cast<float>(cfg.learning_rate);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Prediction> seen_predictions;
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - begin);
      Graph g;
      Tensor total;
      for (std::size_t j = begin; j < end; ++j) {
        const Sample& s = train_set[order[j]];
        const Tensor logits = forward(g, params, s.volume);
        seen_predictions.push_back(make_prediction(logits, s));
        const Tensor loss = g.softmax_cross_entropy(logits, static_cast<std::size_t>(s.label));
        loss_sum += loss.item();
        const Tensor weighted = g.scale(loss, inv_batch);
        total = total.defined() ? g.add(total, weighted) : weighted;
      }
      if (!std::isfinite(total.item())) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                  std::to_string(batch_index + 1),
                              static_cast<int>(epoch), static_cast<int>(batch_index + 1));
      }
      g.backward(total);
      sgd_step(tensors, lr);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(order.size());
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0) {
      record.train_metrics = metrics_from_predictions(seen_predictions, Aggregation::kScan);
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  params.clear_grad();
  return result;
}

std::vector<Prediction> predict(const MgNetParams& params, std::span<const Sample> samples) {
  require_binary(params.config);
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    Graph g(Graph::Recording::kOff);
    out.push_back(make_prediction(forward(g, params, s.volume), s));
  }
  return out;
}

EvalMetrics metrics_from_predictions(std::span<const Prediction> predictions,
                                     Aggregation aggregation) {
  std::vector<int> labels, predicted;
  std::vector<double> scores;
  if (aggregation == Aggregation::kScan) {
    for (const Prediction& p : predictions) {
      labels.push_back(p.label);
      predicted.push_back(p.predicted);
      scores.push_back(p.score);
    }
  } else {
    struct Acc {
      int label;
      double score_sum = 0.0;
      std::size_t n = 0;
    };
    std::map<std::string, Acc> by_subject;
    for (const Prediction& p : predictions) {
      auto [it, inserted] = by_subject.try_emplace(p.subject_id, Acc{p.label});
      if (it->second.label != p.label) {
        throw ArgumentError("subject " + p.subject_id + " has scans with different labels");
      }
      it->second.score_sum += p.score;
      ++it->second.n;
    }
    for (const auto& [subject, acc] : by_subject) {
      const double score = acc.score_sum / static_cast<double>(acc.n);
      labels.push_back(acc.label);
      predicted.push_back(score > 0.5 ? 1 : 0);
      scores.push_back(score);
    }
  }
  return compute_metrics(labels, predicted, scores);
}

EvalMetrics evaluate(const MgNetParams& params, std::span<const Sample> samples,
                     Aggregation aggregation) {
  if (samples.empty()) throw ArgumentError("evaluate needs at least one sample");
  return metrics_from_predictions(predict(params, samples), aggregation);
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string CvResult::report() const {
  std::string out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    out += "fold=" + std::to_string(f) + "\n" + format_metrics_block(folds[f]);
  }
  const std::pair<const char*, const MetricSummary*> rows[] = {
      {"accuracy", &accuracy}, {"auc", &auc}, {"sensitivity", &sensitivity},
      {"specificity", &specificity}};
  for (const auto& [name, s] : rows) {
    out += std::string("mean_") + name + "=" + format_double(s->mean) + "\n";
    out += std::string("std_") + name + "=" + format_double(s->stddev) + "\n";
  }
  return out;
}

CvResult cross_validate(const MgNetConfig& model_config, const Manifest& manifest,
                        const FoldAssignment& folds, const TrainConfig& cfg,
                        const CvOptions& options) {
  cfg.validate();
  if (folds.k < 2) throw ArgumentError("cross-validation needs k >= 2");
  const std::vector<Sample> all = load_samples(manifest, {}, options.normalize_volumes);

  CvResult result;
  for (std::size_t f = 0; f < folds.k; ++f) {
    const auto train_idx = folds.train_indices(manifest, f);
    const auto test_idx = folds.test_indices(manifest, f);
    std::set<std::string> train_subjects;
    for (std::size_t i : train_idx) train_subjects.insert(manifest.records[i].subject_id);
    for (std::size_t i : test_idx) {
      if (train_subjects.count(manifest.records[i].subject_id)) {
        throw StateError("subject " + manifest.records[i].subject_id +
                         " appears in both train and test of fold " + std::to_string(f));
      }
    }
    if (test_idx.empty()) throw ArgumentError("fold " + std::to_string(f) + " is empty");

    std::vector<Sample> train_set, test_set;
    for (std::size_t i : train_idx) train_set.push_back(all[i]);
    for (std::size_t i : test_idx) test_set.push_back(all[i]);

    EpochCallback cb;
    if (options.on_epoch) cb = [&](const EpochRecord& e) { options.on_epoch(f, e); };
    TrainResult trained = train(model_config, train_set, cfg, cb);
    result.folds.push_back(evaluate(trained.params, test_set, options.aggregation));
    result.histories.push_back(std::move(trained.history));
  }

  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const EvalMetrics& m : result.folds) v.push_back(m.*field);
    return summarize(v);
  };
  result.accuracy = collect(&EvalMetrics::accuracy);
  result.sensitivity = collect(&EvalMetrics::sensitivity);
  result.specificity = collect(&EvalMetrics::specificity);
  result.auc = collect(&EvalMetrics::auc);
  return result;
}

}  // namespace mgnet
