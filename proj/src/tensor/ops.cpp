#include "mgnet/ops.hpp"

#include <algorithm>
#include <vector>

#include "mgnet/errors.hpp"
#include "mgnet/parallel.hpp"
#include "mgnet/simd/kernels.hpp"

namespace mgnet::ops {

std::size_t conv_out_extent(std::size_t n, int stride) {
  if (stride < 1 || n + 2 * kPadding < kKernelExtent) return 0;
  return (n + 2 * kPadding - kKernelExtent) / static_cast<std::size_t>(stride) + 1;
}

Shape conv3d_output_shape(const Shape& input, const Shape& kernel, int stride) {
  if (stride != 1 && stride != 2) {
    throw ShapeError("conv3d stride must be 1 or 2, got " + std::to_string(stride));
  }
  if (input.size() != 4) {
    throw ShapeError("conv3d input must be [c,D,H,W], got " + shape_str(input));
  }
  if (kernel.size() != 5 || kernel[2] != kKernelExtent || kernel[3] != kKernelExtent ||
      kernel[4] != kKernelExtent) {
    throw ShapeError("conv3d kernel must be [c_out,c_in,3,3,3], got " + shape_str(kernel));
  }
  if (kernel[1] != input[0]) {
    throw ShapeError("conv3d channel mismatch: kernel " + shape_str(kernel) + " vs input " +
                     shape_str(input));
  }
  Shape out{kernel[0], 0, 0, 0};
  for (std::size_t axis = 1; axis < 4; ++axis) {
    out[axis] = conv_out_extent(input[axis], stride);
    if (out[axis] == 0) {
      throw ShapeError("conv3d output extent is not positive for input " + shape_str(input));
    }
  }
  return out;
}

Conv3dDims Conv3dDims::from(const Shape& input, const Shape& kernel, int stride) {
  const Shape out = conv3d_output_shape(input, kernel, stride);
  return Conv3dDims{input[0], input[1], input[2], input[3], out[0], out[1], out[2], out[3],
                    stride};
}

namespace {

// The column buffer for one slab of output depth rows holds, per input
// channel and tap, the input values that tap reads for every output voxel
// in the slab. Slab size depends only on the geometry so the reduction
// order never depends on the thread count.
constexpr std::size_t kColumnBudget = std::size_t{8} << 20;  // floats

struct Slab {
  std::size_t z_begin, z_end;
  std::size_t size(const Conv3dDims& d) const {
    return (z_end - z_begin) * d.out_height * d.out_width;
  }
};

std::vector<Slab> make_slabs(const Conv3dDims& d) {
  const std::size_t row = d.out_height * d.out_width * d.in_channels * kKernelTaps;
  const std::size_t rows = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, row));
  std::vector<Slab> slabs;
  for (std::size_t z = 0; z < d.out_depth; z += rows) {
    slabs.push_back({z, std::min(d.out_depth, z + rows)});
  }
  return slabs;
}

// Fills col[tap][p] for a single input channel.
void gather_columns(const Conv3dDims& d, const Slab& slab, const float* in_channel, float* col) {
  const std::size_t n = slab.size(d);
  const std::size_t s = static_cast<std::size_t>(d.stride);
  for (std::size_t kd = 0; kd < 3; ++kd) {
    for (std::size_t kh = 0; kh < 3; ++kh) {
      for (std::size_t kw = 0; kw < 3; ++kw) {
        float* dst = col + ((kd * 3 + kh) * 3 + kw) * n;
        for (std::size_t oz = slab.z_begin; oz < slab.z_end; ++oz) {
          const std::ptrdiff_t z = static_cast<std::ptrdiff_t>(oz * s + kd) - 1;
          for (std::size_t oy = 0; oy < d.out_height; ++oy) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * s + kh) - 1;
            float* out_row = dst + ((oz - slab.z_begin) * d.out_height + oy) * d.out_width;
            if (z < 0 || z >= static_cast<std::ptrdiff_t>(d.depth) || y < 0 ||
                y >= static_cast<std::ptrdiff_t>(d.height)) {
              std::fill(out_row, out_row + d.out_width, 0.0f);
              continue;
            }
            const float* in_row = in_channel + (static_cast<std::size_t>(z) * d.height +
                                                static_cast<std::size_t>(y)) * d.width;
            for (std::size_t ox = 0; ox < d.out_width; ++ox) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * s + kw) - 1;
              out_row[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(d.width))
                                ? 0.0f
                                : in_row[static_cast<std::size_t>(x)];
            }
          }
        }
      }
    }
  }
}

// Adjoint of gather_columns: grad_in_channel += scatter(col).
void scatter_columns(const Conv3dDims& d, const Slab& slab, const float* col,
                     float* grad_in_channel) {
  const std::size_t n = slab.size(d);
  const std::size_t s = static_cast<std::size_t>(d.stride);
  for (std::size_t kd = 0; kd < 3; ++kd) {
    for (std::size_t kh = 0; kh < 3; ++kh) {
      for (std::size_t kw = 0; kw < 3; ++kw) {
        const float* src = col + ((kd * 3 + kh) * 3 + kw) * n;
        for (std::size_t oz = slab.z_begin; oz < slab.z_end; ++oz) {
          const std::ptrdiff_t z = static_cast<std::ptrdiff_t>(oz * s + kd) - 1;
          if (z < 0 || z >= static_cast<std::ptrdiff_t>(d.depth)) continue;
          for (std::size_t oy = 0; oy < d.out_height; ++oy) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * s + kh) - 1;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(d.height)) continue;
            const float* col_row = src + ((oz - slab.z_begin) * d.out_height + oy) * d.out_width;
            float* g_row = grad_in_channel + (static_cast<std::size_t>(z) * d.height +
                                              static_cast<std::size_t>(y)) * d.width;
            for (std::size_t ox = 0; ox < d.out_width; ++ox) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * s + kw) - 1;
              if (x >= 0 && x < static_cast<std::ptrdiff_t>(d.width)) {
                g_row[static_cast<std::size_t>(x)] += col_row[ox];
              }
            }
          }
        }
      }
    }
  }
}

void build_columns(const Conv3dDims& d, const Slab& slab, std::span<const float> input,
                   std::vector<float>& col) {
  const std::size_t per_channel = kKernelTaps * slab.size(d);
  col.resize(d.in_channels * per_channel);
  parallel_for(d.in_channels, [&](std::size_t ci) {
    gather_columns(d, slab, input.data() + ci * d.in_plane(), col.data() + ci * per_channel);
  });
}

void check_sizes(const Conv3dDims& d, std::size_t input, std::size_t kernel, std::size_t out) {
  if (input != d.in_channels * d.in_plane() ||
      kernel != d.out_channels * d.in_channels * kKernelTaps ||
      out != d.out_channels * d.out_plane()) {
    throw ShapeError("conv3d buffer sizes do not match the declared geometry");
  }
}

}  // namespace

void conv3d_forward(const Conv3dDims& d, std::span<const float> input,
                    std::span<const float> kernel, std::span<float> out) {
  check_sizes(d, input.size(), kernel.size(), out.size());
  const auto& k = simd::active();
  std::fill(out.begin(), out.end(), 0.0f);
  std::vector<float> col;
  for (const Slab& slab : make_slabs(d)) {
    build_columns(d, slab, input, col);
    const std::size_t n = slab.size(d);
    const std::size_t offset = slab.z_begin * d.out_height * d.out_width;
    parallel_for(d.out_channels, [&](std::size_t co) {
      float* dst = out.data() + co * d.out_plane() + offset;
      const float* w = kernel.data() + co * d.in_channels * kKernelTaps;
      for (std::size_t j = 0; j < d.in_channels * kKernelTaps; ++j) {
        if (w[j] != 0.0f) k.axpy(dst, col.data() + j * n, w[j], n);
      }
    });
  }
}

void conv3d_backward_input(const Conv3dDims& d, std::span<const float> grad_out,
                           std::span<const float> kernel, std::span<float> grad_input) {
  check_sizes(d, grad_input.size(), kernel.size(), grad_out.size());
  const auto& k = simd::active();
  for (const Slab& slab : make_slabs(d)) {
    const std::size_t n = slab.size(d);
    const std::size_t offset = slab.z_begin * d.out_height * d.out_width;
    parallel_for(d.in_channels, [&](std::size_t ci) {
      std::vector<float> gcol(kKernelTaps * n, 0.0f);
      for (std::size_t co = 0; co < d.out_channels; ++co) {
        const float* g = grad_out.data() + co * d.out_plane() + offset;
        const float* w = kernel.data() + (co * d.in_channels + ci) * kKernelTaps;
        for (std::size_t tap = 0; tap < kKernelTaps; ++tap) {
          if (w[tap] != 0.0f) k.axpy(gcol.data() + tap * n, g, w[tap], n);
        }
      }
      scatter_columns(d, slab, gcol.data(), grad_input.data() + ci * d.in_plane());
    });
  }
}

void conv3d_backward_kernel(const Conv3dDims& d, std::span<const float> grad_out,
                            std::span<const float> input, std::span<float> grad_kernel) {
  check_sizes(d, input.size(), grad_kernel.size(), grad_out.size());
  const auto& k = simd::active();
  std::vector<float> col;
  for (const Slab& slab : make_slabs(d)) {
    build_columns(d, slab, input, col);
    const std::size_t n = slab.size(d);
    const std::size_t offset = slab.z_begin * d.out_height * d.out_width;
    parallel_for(d.out_channels, [&](std::size_t co) {
      const float* g = grad_out.data() + co * d.out_plane() + offset;
      float* gk = grad_kernel.data() + co * d.in_channels * kKernelTaps;
      for (std::size_t j = 0; j < d.in_channels * kKernelTaps; ++j) {
        gk[j] += k.dot(g, col.data() + j * n, n);
      }
    });
  }
}

namespace {

// In-place clipped 3-wide box sum along the middle axis of an array viewed
// as [outer, extent, inner].
void box_sum_axis(std::vector<float>& v, std::size_t outer, std::size_t extent,
                  std::size_t inner) {
  std::vector<float> line(extent);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      float* base = v.data() + o * extent * inner + i;
      for (std::size_t e = 0; e < extent; ++e) line[e] = base[e * inner];
      for (std::size_t e = 0; e < extent; ++e) {
        float acc = line[e];
        if (e > 0) acc = line[e - 1] + acc;
        if (e + 1 < extent) acc = acc + line[e + 1];
        base[e * inner] = acc;
      }
    }
  }
}

void box_sum(const Shape& shape, std::vector<float>& v) {
  const std::size_t c = shape[0], depth = shape[1], height = shape[2], width = shape[3];
  box_sum_axis(v, c * depth * height, width, 1);
  box_sum_axis(v, c * depth, height, width);
  box_sum_axis(v, c, depth, height * width);
}

std::size_t valid_count(std::size_t e, std::size_t extent) {
  return 1 + (e > 0 ? 1 : 0) + (e + 1 < extent ? 1 : 0);
}

void check_pool_shape(const Shape& shape, std::size_t a, std::size_t b) {
  if (shape.size() != 4) throw ShapeError("avg_pool3d expects [c,D,H,W], got " + shape_str(shape));
  if (a != shape_numel(shape) || b != shape_numel(shape)) {
    throw ShapeError("avg_pool3d buffer sizes do not match " + shape_str(shape));
  }
}

template <typename Fn>
void for_each_count(const Shape& shape, Fn fn) {
  const std::size_t depth = shape[1], height = shape[2], width = shape[3];
  std::size_t idx = 0;
  for (std::size_t c = 0; c < shape[0]; ++c) {
    for (std::size_t z = 0; z < depth; ++z) {
      const std::size_t cz = valid_count(z, depth);
      for (std::size_t y = 0; y < height; ++y) {
        const std::size_t cy = valid_count(y, height);
        for (std::size_t x = 0; x < width; ++x, ++idx) {
          fn(idx, static_cast<float>(cz * cy * valid_count(x, width)));
        }
      }
    }
  }
}

}  // namespace

void avg_pool3d_forward(const Shape& shape, std::span<const float> input, std::span<float> out) {
  check_pool_shape(shape, input.size(), out.size());
  std::vector<float> sums(input.begin(), input.end());
  box_sum(shape, sums);
  for_each_count(shape, [&](std::size_t i, float count) { out[i] = sums[i] / count; });
}

void avg_pool3d_backward(const Shape& shape, std::span<const float> grad_out,
                         std::span<float> grad_input) {
  check_pool_shape(shape, grad_out.size(), grad_input.size());
  std::vector<float> scaled(grad_out.size());
  for_each_count(shape, [&](std::size_t i, float count) { scaled[i] = grad_out[i] / count; });
  // The clipped box sum is symmetric, so it is its own adjoint.
  box_sum(shape, scaled);
  for (std::size_t i = 0; i < scaled.size(); ++i) grad_input[i] += scaled[i];
}

}  // namespace mgnet::ops
