#include "grad_cases.hpp"

#include <cmath>

namespace ref {

using mgnet::Graph;
using mgnet::Tensor;

namespace {

// Weights every output voxel differently so an adjoint that is only right
// for a uniform upstream gradient still gets caught.
struct Probe {
  Tensor kernel;
  Arr kernel64;

  Probe(mgnet::Rng& rng, std::size_t channels)
      : kernel(random_tensor(rng, {1, channels, 3, 3, 3})), kernel64(from(kernel)) {}

  Tensor operator()(Graph& g, const Tensor& y) const { return g.sum(g.conv3d(y, kernel, 1)); }
  double operator()(const Arr& y) const { return sum(conv3d(y, kernel64, 1)); }
};

// Values bounded away from zero so relu kinks sit outside the FD stencil.
Tensor away_from_zero(mgnet::Rng& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (float& v : t.mutable_data()) v = v >= 0.0f ? v + 0.1f : v - 0.1f;
  return t;
}

std::vector<bool> relu_signs(const mgnet::MgNetConfig& cfg, const std::vector<Arr>& point) {
  std::vector<bool> signs;
  const std::vector<Arr> p(point.begin(), point.end() - 1);
  mgnet_forward(cfg, p, point.back(), nullptr, &signs);
  return signs;
}

bool smooth_across_stencil(const mgnet::MgNetConfig& cfg, const std::vector<Tensor>& leaves,
                           double step) {
  std::vector<Arr> point;
  for (const Tensor& t : leaves) point.push_back(from(t));
  const std::vector<bool> base = relu_signs(cfg, point);
  for (Arr& leaf : point) {
    for (double& v : leaf.v) {
      const double saved = v;
      for (double h : {step, -step}) {
        v = saved + h;
        if (relu_signs(cfg, point) != base) return false;
      }
      v = saved;
    }
  }
  return true;
}

}  // namespace

mgnet::MgNetParams params_from(const mgnet::MgNetConfig& config,
                               const std::vector<Tensor>& tensors) {
  mgnet::MgNetParams p;
  p.config = config;
  std::size_t next = 0;
  p.f_in = tensors.at(next++);
  for (std::size_t l = 0; l < config.num_grids; ++l) {
    mgnet::LevelParams level;
    level.A = tensors.at(next++);
    const std::size_t nb = config.share_smoothers ? 1 : config.iters(l);
    for (std::size_t i = 0; i < nb; ++i) level.B.push_back(tensors.at(next++));
    if (l + 1 < config.num_grids) {
      level.Pi = tensors.at(next++);
      level.R = tensors.at(next++);
    }
    p.levels.push_back(std::move(level));
  }
  p.head_weight = tensors.at(next++);
  p.head_bias = tensors.at(next++);
  return p;
}

std::vector<GradCase> gradient_cases(std::uint64_t seed, double step) {
  mgnet::Rng rng(seed);
  std::vector<GradCase> cases;

  for (int stride : {1, 2}) {
    const Probe probe(rng, 3);
    cases.push_back({"conv3d_stride" + std::to_string(stride),
                     {random_tensor(rng, {2, 5, 4, 6}), random_tensor(rng, {3, 2, 3, 3, 3})},
                     [probe, stride](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.conv3d(in[0], in[1], stride));
                     },
                     [probe, stride](const std::vector<Arr>& in) {
                       return probe(conv3d(in[0], in[1], stride));
                     }});
  }
  {
    const Probe probe(rng, 2);
    cases.push_back({"relu",
                     {away_from_zero(rng, {2, 3, 4, 3})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.relu(in[0]));
                     },
                     [probe](const std::vector<Arr>& in) { return probe(relu(in[0])); }});
  }
  {
    const Probe probe(rng, 2);
    cases.push_back({"add",
                     {random_tensor(rng, {2, 3, 3, 4}), random_tensor(rng, {2, 3, 3, 4})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.add(in[0], in[1]));
                     },
                     [probe](const std::vector<Arr>& in) { return probe(add(in[0], in[1])); }});
    cases.push_back({"sub",
                     {random_tensor(rng, {2, 3, 3, 4}), random_tensor(rng, {2, 3, 3, 4})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.sub(in[0], in[1]));
                     },
                     [probe](const std::vector<Arr>& in) { return probe(sub(in[0], in[1])); }});
    cases.push_back({"scale",
                     {random_tensor(rng, {2, 3, 3, 4})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.scale(in[0], -0.75f));
                     },
                     [probe](const std::vector<Arr>& in) { return probe(scale(in[0], -0.75)); }});
    cases.push_back({"avg_pool3d",
                     {random_tensor(rng, {2, 4, 3, 5})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.avg_pool3d(in[0]));
                     },
                     [probe](const std::vector<Arr>& in) { return probe(avg_pool3d(in[0])); }});
    cases.push_back({"sum",
                     {random_tensor(rng, {2, 3, 3, 4})},
                     [](Graph& g, const std::vector<Tensor>& in) {
                       return g.sum(g.scale(in[0], 1.5f));
                     },
                     [](const std::vector<Arr>& in) { return sum(scale(in[0], 1.5)); }});
    // x feeds two consumers; both contributions must accumulate.
    cases.push_back({"fan_out",
                     {away_from_zero(rng, {2, 3, 3, 4})},
                     [probe](Graph& g, const std::vector<Tensor>& in) {
                       return probe(g, g.add(in[0], g.relu(in[0])));
                     },
                     [probe](const std::vector<Arr>& in) {
                       return probe(add(in[0], relu(in[0])));
                     }});
  }
  {
    const Tensor w = random_tensor(rng, {3, 4});
    const Tensor b = random_tensor(rng, {3});
    const Arr w64 = from(w), b64 = from(b);
    cases.push_back({"global_avg_pool",
                     {random_tensor(rng, {4, 3, 2, 3}, -2.0, 2.0)},
                     [w, b](Graph& g, const std::vector<Tensor>& in) {
                       return g.softmax_cross_entropy(g.linear(g.global_avg_pool(in[0]), w, b), 2);
                     },
                     [w64, b64](const std::vector<Arr>& in) {
                       return cross_entropy(linear(global_avg_pool(in[0]), w64, b64), 2);
                     }});
  }
  cases.push_back({"linear",
                   {random_tensor(rng, {4}), random_tensor(rng, {3, 4}), random_tensor(rng, {3})},
                   [](Graph& g, const std::vector<Tensor>& in) {
                     return g.softmax_cross_entropy(g.linear(in[0], in[1], in[2]), 0);
                   },
                   [](const std::vector<Arr>& in) {
                     return cross_entropy(linear(in[0], in[1], in[2]), 0);
                   }});
  cases.push_back({"softmax_cross_entropy",
                   {random_tensor(rng, {5}, -3.0, 3.0)},
                   [](Graph& g, const std::vector<Tensor>& in) {
                     return g.softmax_cross_entropy(in[0], 3);
                   },
                   [](const std::vector<Arr>& in) { return cross_entropy(in[0], 3); }});

  for (bool pool : {true, false}) {
    mgnet::MgNetConfig cfg;
    cfg.num_grids = 2;
    cfg.smoothing_iters = {1};
    cfg.feature_channels = cfg.data_channels = 2;
    cfg.use_avg_pool = pool;
    std::vector<Tensor> leaves;
    std::size_t rejected = 0;
    for (;; ++rejected) {
      cfg.seed = rng.next();
      leaves.clear();
      for (const Tensor& t : mgnet::build(cfg).tensors()) leaves.push_back(t.clone());
      // Non-zero bias so its gradient path is exercised at a generic point.
      for (float& v : leaves.back().mutable_data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
      leaves.push_back(random_tensor(rng, {1, 5, 5, 5}, -2.0, 2.0));
      if (smooth_across_stencil(cfg, leaves, step)) break;
    }
    const std::size_t n_params = leaves.size() - 1;
    cases.push_back({std::string("mgnet_tiny_") + (pool ? "pool" : "nopool"), leaves,
                     [cfg, n_params](Graph& g, const std::vector<Tensor>& in) {
                       const std::vector<Tensor> p(in.begin(), in.begin() + n_params);
                       return g.softmax_cross_entropy(
                           mgnet::forward(g, params_from(cfg, p), in[n_params]), 1);
                     },
                     [cfg, n_params](const std::vector<Arr>& in) {
                       const std::vector<Arr> p(in.begin(), in.begin() + n_params);
                       return cross_entropy(mgnet_forward(cfg, p, in[n_params]), 1);
                     },
                     rejected});
  }
  return cases;
}

}  // namespace ref
