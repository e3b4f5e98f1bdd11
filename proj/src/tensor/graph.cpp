#include "mgnet/graph.hpp"

#include <algorithm>
#include <cmath>

#include "mgnet/errors.hpp"
#include "mgnet/ops.hpp"
#include "mgnet/simd/kernels.hpp"

namespace mgnet {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Grad buffer of an input that needs one, allocating zeros on first touch.
std::span<float> grad_slot(Tensor& t) {
  if (!t.has_grad()) t.zero_grad();
  return t.mutable_grad();
}

}  // namespace

std::vector<double> softmax(std::span<const float> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - peak);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor Graph::record(Tensor output, std::vector<Tensor> inputs,
                     std::function<void(Node&)> adjoint) {
  if (!recording_) return output;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return output;
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), output, std::move(adjoint)});
  return output;
}

Tensor Graph::conv3d(const Tensor& input, const Tensor& kernel, int stride) {
  const ops::Conv3dDims dims = ops::Conv3dDims::from(input.shape(), kernel.shape(), stride);
  Tensor out({dims.out_channels, dims.out_depth, dims.out_height, dims.out_width});
  ops::conv3d_forward(dims, input.data(), kernel.data(), out.mutable_data());
  return record(out, {input, kernel}, [dims](Node& n) {
    const auto g = n.output.grad();
    if (n.inputs[0].requires_grad()) {
      ops::conv3d_backward_input(dims, g, n.inputs[1].data(), grad_slot(n.inputs[0]));
    }
    if (n.inputs[1].requires_grad()) {
      ops::conv3d_backward_kernel(dims, g, n.inputs[0].data(), grad_slot(n.inputs[1]));
    }
  });
}

Tensor Graph::relu(const Tensor& x) {
  Tensor out(x.shape());
  simd::active().relu(x.data().data(), out.mutable_data().data(), x.numel());
  return record(out, {x}, [](Node& n) {
    Tensor& in = n.inputs[0];
    simd::active().relu_backward(in.data().data(), n.output.grad().data(),
                                 grad_slot(in).data(), in.numel());
  });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  simd::active().add(a.data().data(), b.data().data(), out.mutable_data().data(), a.numel());
  return record(out, {a, b}, [](Node& n) {
    const auto g = n.output.grad();
    for (Tensor& in : n.inputs) {
      if (in.requires_grad()) simd::active().accumulate(grad_slot(in).data(), g.data(), g.size());
    }
  });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  simd::active().sub(a.data().data(), b.data().data(), out.mutable_data().data(), a.numel());
  return record(out, {a, b}, [](Node& n) {
    const auto g = n.output.grad();
    if (n.inputs[0].requires_grad()) {
      simd::active().accumulate(grad_slot(n.inputs[0]).data(), g.data(), g.size());
    }
    if (n.inputs[1].requires_grad()) {
      auto gb = grad_slot(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor Graph::scale(const Tensor& x, float factor) {
  Tensor out = x.clone();
  out.set_requires_grad(false);
  simd::active().scale(out.mutable_data().data(), factor, out.numel());
  return record(out, {x}, [factor](Node& n) {
    simd::active().axpy(grad_slot(n.inputs[0]).data(), n.output.grad().data(), factor,
                        n.output.numel());
  });
}

Tensor Graph::avg_pool3d(const Tensor& x) {
  Tensor out(x.shape());
  ops::avg_pool3d_forward(x.shape(), x.data(), out.mutable_data());
  return record(out, {x}, [](Node& n) {
    ops::avg_pool3d_backward(n.inputs[0].shape(), n.output.grad(), grad_slot(n.inputs[0]));
  });
}

Tensor Graph::global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool expects [c,D,H,W], got " + shape_str(x.shape()));
  const std::size_t channels = x.dim(0);
  const std::size_t plane = x.numel() / channels;
  Tensor out({channels});
  auto o = out.mutable_data();
  const auto in = x.data();
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[c * plane + i];
    o[c] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return record(out, {x}, [channels, plane](Node& n) {
    const auto g = n.output.grad();
    auto gx = grad_slot(n.inputs[0]);
    const float inv = 1.0f / static_cast<float>(plane);
    for (std::size_t c = 0; c < channels; ++c) {
      const float share = g[c] * inv;
      for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += share;
    }
  });
}

Tensor Graph::linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 1 || weight.rank() != 2 || bias.rank() != 1 || weight.dim(1) != x.dim(0) ||
      weight.dim(0) != bias.dim(0)) {
    throw ShapeError("linear: incompatible shapes x" + shape_str(x.shape()) + " W" +
                     shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
  }
  const std::size_t rows = weight.dim(0), cols = weight.dim(1);
  Tensor out({rows});
  auto y = out.mutable_data();
  const auto w = weight.data();
  const auto xv = x.data();
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * xv[c];
    y[r] = acc + b[r];
  }
  return record(out, {x, weight, bias}, [rows, cols](Node& n) {
    const auto g = n.output.grad();
    Tensor& xin = n.inputs[0];
    Tensor& win = n.inputs[1];
    Tensor& bin = n.inputs[2];
    if (xin.requires_grad()) {
      auto gx = grad_slot(xin);
      const auto w = win.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gx[c] += w[r * cols + c] * g[r];
      }
    }
    if (win.requires_grad()) {
      auto gw = grad_slot(win);
      const auto xv = xin.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] += g[r] * xv[c];
      }
    }
    if (bin.requires_grad()) {
      auto gb = grad_slot(bin);
      for (std::size_t r = 0; r < rows; ++r) gb[r] += g[r];
    }
  });
}

Tensor Graph::softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) {
    throw ShapeError("softmax_cross_entropy expects [k] logits, got " + shape_str(logits.shape()));
  }
  if (label >= logits.numel()) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(logits.numel()) + " classes");
  }
  const auto l = logits.data();
  const double peak = *std::max_element(l.begin(), l.end());
  double total = 0.0;
  for (float v : l) total += std::exp(static_cast<double>(v) - peak);
  const double loss = peak + std::log(total) - static_cast<double>(l[label]);
  Tensor out = Tensor::scalar(static_cast<float>(loss));
  return record(out, {logits}, [label](Node& n) {
    const float g = n.output.grad()[0];
    const auto p = softmax(n.inputs[0].data());
    auto gl = grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < p.size(); ++i) {
      gl[i] += g * static_cast<float>(p[i] - (i == label ? 1.0 : 0.0));
    }
  });
}

Tensor Graph::sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return record(Tensor::scalar(static_cast<float>(acc)), {x}, [](Node& n) {
    const float g = n.output.grad()[0];
    for (float& v : grad_slot(n.inputs[0])) v += g;
  });
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ArgumentError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  replay_order_.clear();
  if (!loss.requires_grad()) return;
  Tensor root = loss;
  root.zero_grad();
  root.mutable_grad()[0] = 1.0f;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;
    replay_order_.push_back(i);
    node.adjoint(node);
    // Intermediate adjoints are consumed exactly once.
    node.output.clear_grad();
  }
}

}  // namespace mgnet
