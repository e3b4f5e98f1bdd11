#include "mgnet/model.hpp"

#include <cmath>
#include <numeric>

#include "mgnet/errors.hpp"
#include "mgnet/ops.hpp"
#include "mgnet/random.hpp"

namespace mgnet {

std::size_t MgNetConfig::iters(std::size_t level) const {
  return smoothing_iters.size() == 1 ? smoothing_iters[0] : smoothing_iters.at(level);
}

void MgNetConfig::validate() const {
  if (num_grids < 1) throw ArgumentError("num_grids must be >= 1");
  if (smoothing_iters.empty() ||
      (smoothing_iters.size() != 1 && smoothing_iters.size() != num_grids)) {
    throw ArgumentError("smoothing_iters needs 1 or num_grids (" + std::to_string(num_grids) +
                        ") entries, got " + std::to_string(smoothing_iters.size()));
  }
  for (std::size_t v : smoothing_iters) {
    if (v < 1) throw ArgumentError("every smoothing_iters entry must be >= 1");
  }
  if (feature_channels < 1 || data_channels < 1) {
    throw ArgumentError("feature_channels and data_channels must be >= 1");
  }
  // A^{l+1} maps the coarse u into the space of f, so the channel counts
  // must agree when both are carried across levels.
  if (feature_channels != data_channels) {
    throw ArgumentError("feature_channels (" + std::to_string(feature_channels) +
                        ") must equal data_channels (" + std::to_string(data_channels) + ")");
  }
  if (input_channels < 1) throw ArgumentError("input_channels must be >= 1");
  if (!input_spatial.empty() && input_spatial.size() != 3) {
    throw ArgumentError("input_spatial must be empty or [D,H,W]");
  }
  if (num_classes < 1) throw ArgumentError("num_classes must be >= 1");
}

std::vector<Shape> parameter_shapes(const MgNetConfig& config) {
  config.validate();
  const std::size_t cu = config.feature_channels, cf = config.data_channels;
  std::vector<Shape> shapes;
  shapes.push_back({cf, config.input_channels, 3, 3, 3});
  for (std::size_t l = 0; l < config.num_grids; ++l) {
    shapes.push_back({cf, cu, 3, 3, 3});
    const std::size_t b_count = config.share_smoothers ? 1 : config.iters(l);
    for (std::size_t i = 0; i < b_count; ++i) shapes.push_back({cu, cf, 3, 3, 3});
    if (l + 1 < config.num_grids) {
      shapes.push_back({cu, cu, 3, 3, 3});
      shapes.push_back({cf, cf, 3, 3, 3});
    }
  }
  shapes.push_back({config.num_classes, cu});
  shapes.push_back({config.num_classes});
  return shapes;
}

std::vector<Tensor> MgNetParams::tensors() const {
  std::vector<Tensor> out{f_in};
  for (const auto& level : levels) {
    out.push_back(level.A);
    out.insert(out.end(), level.B.begin(), level.B.end());
    if (level.Pi.defined()) out.push_back(level.Pi);
    if (level.R.defined()) out.push_back(level.R);
  }
  out.push_back(head_weight);
  out.push_back(head_bias);
  return out;
}

void MgNetParams::zero_grad() {
  for (Tensor& t : tensors()) t.zero_grad();
}

void MgNetParams::clear_grad() {
  for (Tensor& t : tensors()) t.clear_grad();
}

MgNetParams MgNetParams::clone() const {
  MgNetParams copy;
  copy.config = config;
  copy.f_in = f_in.clone();
  for (const auto& level : levels) {
    LevelParams l;
    l.A = level.A.clone();
    for (const auto& b : level.B) l.B.push_back(b.clone());
    if (level.Pi.defined()) l.Pi = level.Pi.clone();
    if (level.R.defined()) l.R = level.R.clone();
    copy.levels.push_back(std::move(l));
  }
  copy.head_weight = head_weight.clone();
  copy.head_bias = head_bias.clone();
  return copy;
}

namespace {

Tensor init_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) v = static_cast<float>(bound * (2.0 * rng.uniform() - 1.0));
  t.set_requires_grad(true);
  return t;
}

Tensor init_kernel(Rng& rng, Shape shape) {
  const std::size_t fan_in = shape[1] * ops::kKernelTaps;
  return init_uniform(rng, std::move(shape), fan_in);
}

}  // namespace

MgNetParams build(const MgNetConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t cu = config.feature_channels, cf = config.data_channels;
  MgNetParams p;
  p.config = config;
  p.f_in = init_kernel(rng, {cf, config.input_channels, 3, 3, 3});
  for (std::size_t l = 0; l < config.num_grids; ++l) {
    LevelParams level;
    level.A = init_kernel(rng, {cf, cu, 3, 3, 3});
    const std::size_t b_count = config.share_smoothers ? 1 : config.iters(l);
    for (std::size_t i = 0; i < b_count; ++i) level.B.push_back(init_kernel(rng, {cu, cf, 3, 3, 3}));
    if (l + 1 < config.num_grids) {
      level.Pi = init_kernel(rng, {cu, cu, 3, 3, 3});
      level.R = init_kernel(rng, {cf, cf, 3, 3, 3});
    }
    p.levels.push_back(std::move(level));
  }
  p.head_weight = init_uniform(rng, {config.num_classes, cu}, cu);
  p.head_bias = Tensor::zeros({config.num_classes});
  p.head_bias.set_requires_grad(true);
  return p;
}

Tensor smooth(Graph& g, const Tensor& u, const Tensor& f, const Tensor& A, const Tensor& B) {
  if (u.rank() != 4 || f.rank() != 4 ||
      !std::equal(u.shape().begin() + 1, u.shape().end(), f.shape().begin() + 1)) {
    throw ShapeError("smooth: u " + shape_str(u.shape()) + " and f " + shape_str(f.shape()) +
                     " must share spatial extents");
  }
  const Tensor residual = g.relu(g.sub(f, g.conv3d(u, A, 1)));
  return g.add(u, g.relu(g.conv3d(residual, B, 1)));
}

Restricted restrict_level(Graph& g, const Tensor& u, const Tensor& f, const LevelParams& level,
                          const Tensor& A_next, bool use_avg_pool) {
  if (!level.Pi.defined() || !level.R.defined()) {
    throw StateError("restrict_level called on the coarsest level");
  }
  Restricted out;
  out.u = g.conv3d(u, level.Pi, 2);
  const Tensor residual = g.sub(f, g.conv3d(u, level.A, 1));
  out.f = g.add(g.conv3d(residual, level.R, 2), g.conv3d(out.u, A_next, 1));
  if (use_avg_pool) out.u = g.avg_pool3d(out.u);
  return out;
}

std::vector<Shape> level_shapes(const MgNetConfig& config, const Shape& spatial) {
  if (spatial.size() != 3) throw ShapeError("level_shapes expects [D,H,W], got " + shape_str(spatial));
  std::vector<Shape> shapes{spatial};
  for (std::size_t l = 1; l < config.num_grids; ++l) {
    Shape next(3);
    for (std::size_t a = 0; a < 3; ++a) {
      next[a] = ops::conv_out_extent(shapes.back()[a], 2);
      if (next[a] < 1) {
        throw ConfigError("grid level " + std::to_string(l + 1) + " of " +
                          std::to_string(config.num_grids) + " collapses from spatial extent " +
                          shape_str(shapes.back()));
      }
    }
    shapes.push_back(next);
  }
  for (const Shape& s : shapes) {
    for (std::size_t e : s) {
      if (e < 1) throw ConfigError("input spatial extent " + shape_str(spatial) + " is empty");
    }
  }
  return shapes;
}

Tensor forward(Graph& g, const MgNetParams& params, const Tensor& volume, ForwardTrace* trace) {
  const MgNetConfig& cfg = params.config;
  if (volume.rank() != 4 || volume.dim(0) != cfg.input_channels) {
    throw ShapeError("forward expects a [" + std::to_string(cfg.input_channels) +
                     ",D,H,W] volume, got " + shape_str(volume.shape()));
  }
  const Shape spatial(volume.shape().begin() + 1, volume.shape().end());
  if (!cfg.input_spatial.empty() && cfg.input_spatial != spatial) {
    throw ShapeError("volume geometry " + shape_str(volume.shape()) +
                     " does not match model geometry [" + std::to_string(cfg.input_channels) +
                     "," + shape_str(cfg.input_spatial).substr(1));
  }
  level_shapes(cfg, spatial);

  Tensor f = g.relu(g.conv3d(volume, params.f_in, 1));
  Tensor u = Tensor::zeros({cfg.feature_channels, volume.dim(1), volume.dim(2), volume.dim(3)});
  for (std::size_t l = 0; l < cfg.num_grids; ++l) {
    const LevelParams& level = params.levels[l];
    if (trace) trace->level_shapes.push_back(Shape(u.shape().begin() + 1, u.shape().end()));
    for (std::size_t i = 0; i < cfg.iters(l); ++i) {
      u = smooth(g, u, f, level.A, level.smoother(i));
    }
    if (l + 1 < cfg.num_grids) {
      Restricted next = restrict_level(g, u, f, level, params.levels[l + 1].A, cfg.use_avg_pool);
      u = std::move(next.u);
      f = std::move(next.f);
    }
  }
  return g.linear(g.global_avg_pool(u), params.head_weight, params.head_bias);
}

std::size_t ParamBreakdown::total() const {
  std::size_t t = f_in + head;
  for (const auto& l : levels) t += l.total();
  return t;
}

ParamBreakdown param_breakdown(const MgNetConfig& config) {
  config.validate();
  const std::size_t taps = ops::kKernelTaps;
  const std::size_t cu = config.feature_channels, cf = config.data_channels;
  ParamBreakdown b;
  b.f_in = taps * cf * config.input_channels;
  for (std::size_t l = 0; l < config.num_grids; ++l) {
    ParamBreakdown::Level level;
    level.A = taps * cf * cu;
    level.B = taps * cu * cf * (config.share_smoothers ? 1 : config.iters(l));
    if (l + 1 < config.num_grids) {
      level.Pi = taps * cu * cu;
      level.R = taps * cf * cf;
    }
    b.levels.push_back(level);
  }
  b.head = config.num_classes * cu + config.num_classes;
  return b;
}

std::size_t param_count(const MgNetConfig& config) { return param_breakdown(config).total(); }

std::size_t param_count(const MgNetParams& params) {
  std::size_t n = 0;
  for (const Tensor& t : params.tensors()) n += t.numel();
  return n;
}

}  // namespace mgnet
