#pragma once

#include <span>

#include "mgnet/tensor.hpp"

namespace mgnet {

/// p <- p - lr * grad for every tensor, then zeroes the gradients. Throws
/// StateError if a tensor has no gradient buffer and ArgumentError if lr is
/// negative or not finite. lr == 0 leaves parameters untouched.
void sgd_step(std::span<Tensor> params, float lr);

}  // namespace mgnet
