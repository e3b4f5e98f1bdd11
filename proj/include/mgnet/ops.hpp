#pragma once

// Raw forward/adjoint kernels over contiguous float buffers. Graph wraps
// these with shape checks and tape recording; tests call them directly.

#include <cstddef>
#include <span>

#include "mgnet/tensor.hpp"

namespace mgnet::ops {

inline constexpr std::size_t kKernelExtent = 3;
inline constexpr std::size_t kKernelTaps = 27;
inline constexpr std::size_t kPadding = 1;

/// floor((n + 2*pad - 3) / stride) + 1, or 0 when that would not be positive.
std::size_t conv_out_extent(std::size_t n, int stride);

/// Output shape of a padded 3x3x3 convolution. Throws ShapeError on channel
/// mismatch, bad stride, or a non-positive output extent.
Shape conv3d_output_shape(const Shape& input, const Shape& kernel, int stride);

struct Conv3dDims {
  std::size_t in_channels, depth, height, width;
  std::size_t out_channels, out_depth, out_height, out_width;
  int stride;

  static Conv3dDims from(const Shape& input, const Shape& kernel, int stride);
  std::size_t in_plane() const { return depth * height * width; }
  std::size_t out_plane() const { return out_depth * out_height * out_width; }
};

/// out = conv(input, kernel); out is overwritten.
void conv3d_forward(const Conv3dDims& d, std::span<const float> input,
                    std::span<const float> kernel, std::span<float> out);
/// grad_input += adjoint of conv w.r.t. its input.
void conv3d_backward_input(const Conv3dDims& d, std::span<const float> grad_out,
                           std::span<const float> kernel, std::span<float> grad_input);
/// grad_kernel += adjoint of conv w.r.t. the kernel.
void conv3d_backward_kernel(const Conv3dDims& d, std::span<const float> grad_out,
                            std::span<const float> input, std::span<float> grad_kernel);

/// Shape-preserving 3x3x3 mean with stride 1; border windows divide by the
/// number of in-bounds voxels.
void avg_pool3d_forward(const Shape& shape, std::span<const float> input,
                        std::span<float> out);
void avg_pool3d_backward(const Shape& shape, std::span<const float> grad_out,
                         std::span<float> grad_input);

}  // namespace mgnet::ops
