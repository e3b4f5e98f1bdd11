#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgnet/graph.hpp"
#include "mgnet/tensor.hpp"

namespace mgnet {

struct MgNetConfig {
  std::size_t num_grids = 5;
  /// One entry per level; a single entry is broadcast to every level.
  std::vector<std::size_t> smoothing_iters = {2};
  std::size_t feature_channels = 128;
  std::size_t data_channels = 128;
  std::size_t input_channels = 1;
  std::size_t num_classes = 2;
  bool use_avg_pool = true;
  /// One B kernel per level reused by every smoothing step on that level.
  /// When false each step i owns its own B^{l,i}.
  bool share_smoothers = true;
  std::uint64_t seed = 0;
  /// Spatial [D,H,W] the model was trained on; empty accepts any extent.
  Shape input_spatial;

  /// Smoothing iterations on level (0-based).
  std::size_t iters(std::size_t level) const;
  /// Throws ArgumentError on an invalid configuration.
  void validate() const;
};

struct LevelParams {
  Tensor A;               // [c_f, c_u, 3,3,3], stride 1
  std::vector<Tensor> B;  // [c_u, c_f, 3,3,3], stride 1
  Tensor Pi;              // [c_u, c_u, 3,3,3], stride 2; undefined on the coarsest level
  Tensor R;               // [c_f, c_f, 3,3,3], stride 2; undefined on the coarsest level

  const Tensor& smoother(std::size_t step) const { return B.size() == 1 ? B[0] : B.at(step); }
};

struct MgNetParams {
  MgNetConfig config;
  Tensor f_in;  // [c_f, input_channels, 3,3,3]
  std::vector<LevelParams> levels;
  Tensor head_weight;  // [num_classes, c_u]
  Tensor head_bias;    // [num_classes]

  /// Every learnable tensor in checkpoint traversal order: f_in, then per
  /// level A, B..., Pi, R (when present), then head weight and bias.
  std::vector<Tensor> tensors() const;
  void zero_grad();
  void clear_grad();
  MgNetParams clone() const;
};

/// Seeded fan-in uniform initialisation; head bias starts at zero.
MgNetParams build(const MgNetConfig& config);

/// Shape of every learnable tensor, in tensors() order.
std::vector<Shape> parameter_shapes(const MgNetConfig& config);

/// u + relu(conv(B, relu(f - conv(A, u)))).
Tensor smooth(Graph& g, const Tensor& u, const Tensor& f, const Tensor& A, const Tensor& B);

struct Restricted {
  Tensor u;  // u^{l+1,0}, pooled when requested
  Tensor f;  // f^{l+1}
};

/// Transfers the level state to the next coarser grid. f_next uses the
/// unpooled u_next; pooling is applied last.
Restricted restrict_level(Graph& g, const Tensor& u, const Tensor& f, const LevelParams& level,
                          const Tensor& A_next, bool use_avg_pool);

struct ForwardTrace {
  std::vector<Shape> level_shapes;  // spatial [D,H,W] per level
};

/// Full forward pass to logits [num_classes].
Tensor forward(Graph& g, const MgNetParams& params, const Tensor& volume,
               ForwardTrace* trace = nullptr);

/// Spatial extents of each level for an input of spatial extent [D,H,W].
/// Throws ConfigError naming the level whose grid would collapse.
std::vector<Shape> level_shapes(const MgNetConfig& config, const Shape& spatial);

std::size_t param_count(const MgNetParams& params);
/// Same count from the configuration alone.
std::size_t param_count(const MgNetConfig& config);

struct ParamBreakdown {
  std::size_t f_in = 0;
  struct Level {
    std::size_t A = 0, B = 0, Pi = 0, R = 0;
    std::size_t total() const { return A + B + Pi + R; }
  };
  std::vector<Level> levels;
  std::size_t head = 0;
  std::size_t total() const;
};

ParamBreakdown param_breakdown(const MgNetConfig& config);

}  // namespace mgnet
