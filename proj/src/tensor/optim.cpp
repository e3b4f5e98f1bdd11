#include "mgnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "mgnet/errors.hpp"

namespace mgnet {

void sgd_step(std::span<Tensor> params, float lr) {
  if (!(lr >= 0.0f) || !std::isfinite(lr)) {
    throw ArgumentError("learning rate must be finite and non-negative");
  }
  for (const Tensor& p : params) {
    if (!p.has_grad()) throw StateError("sgd_step: parameter " + shape_str(p.shape()) + " has no gradient");
  }
  for (Tensor& p : params) {
    auto values = p.mutable_data();
    auto grad = p.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
    std::fill(grad.begin(), grad.end(), 0.0f);
  }
}

}  // namespace mgnet
