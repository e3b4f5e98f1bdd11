#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet {

// Records executed operations so their adjoints can be replayed in reverse.
//
// Gradients accumulate into the grad buffer of every tensor that requires
// one (parameters marked with set_requires_grad, plus intermediates derived
// from them). A Graph constructed with Recording::kOff evaluates the same
// operations without keeping a tape, for inference.
class Graph {
 public:
  enum class Recording { kOn, kOff };

  explicit Graph(Recording mode = Recording::kOn) : recording_(mode == Recording::kOn) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// 3x3x3 convolution with zero padding 1; stride 1 or 2; no bias.
  Tensor conv3d(const Tensor& input, const Tensor& kernel, int stride = 1);
  Tensor relu(const Tensor& x);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& x, float factor);
  /// Shape-preserving 3x3x3 average, valid-count divisor at borders.
  Tensor avg_pool3d(const Tensor& x);
  /// [c,D,H,W] -> [c], per-channel spatial mean.
  Tensor global_avg_pool(const Tensor& x);
  /// y = W x + b with x:[c], W:[k,c], b:[k].
  Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
  /// -log softmax(logits)[label], as a [1] tensor.
  Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);
  /// Sum of all elements, as a [1] tensor.
  Tensor sum(const Tensor& x);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Throws
  /// ArgumentError when loss is not a single-element tensor.
  void backward(const Tensor& loss);

  /// Order in which backward() visited nodes during its last call, as
  /// indices into the execution order. Exposed for tests.
  const std::vector<std::size_t>& last_replay_order() const { return replay_order_; }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(Node&)> adjoint;
  };

  Tensor record(Tensor output, std::vector<Tensor> inputs, std::function<void(Node&)> adjoint);

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> replay_order_;
};

/// Softmax of a logits vector, computed with max subtraction.
std::vector<double> softmax(std::span<const float> logits);

}  // namespace mgnet
