#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ref {

Arr from(const mgnet::Tensor& t) {
  Arr a{t.shape(), {}};
  a.v.assign(t.data().begin(), t.data().end());
  return a;
}

mgnet::Tensor to_tensor(const Arr& a) {
  std::vector<float> v(a.v.begin(), a.v.end());
  return mgnet::Tensor(a.shape, std::move(v));
}

Arr conv3d(const Arr& x, const Arr& k, int stride) {
  const std::size_t C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::size_t O = k.shape[0];
  if (k.shape[1] != C) throw std::invalid_argument("ref::conv3d channel mismatch");
  auto out_extent = [&](std::size_t n) { return (n + 2 - 3) / stride + 1; };
  const std::size_t OD = out_extent(D), OH = out_extent(H), OW = out_extent(W);
  Arr y{{O, OD, OH, OW}, std::vector<double>(O * OD * OH * OW, 0.0)};
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t z = 0; z < OD; ++z)
      for (std::size_t r = 0; r < OH; ++r)
        for (std::size_t c = 0; c < OW; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < C; ++i)
            for (int dz = 0; dz < 3; ++dz)
              for (int dy = 0; dy < 3; ++dy)
                for (int dx = 0; dx < 3; ++dx) {
                  const long iz = static_cast<long>(z) * stride + dz - 1;
                  const long iy = static_cast<long>(r) * stride + dy - 1;
                  const long ix = static_cast<long>(c) * stride + dx - 1;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(D) ||
                      iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) {
                    continue;
                  }
                  acc += k.v[(((o * C + i) * 3 + dz) * 3 + dy) * 3 + dx] *
                         x.v[((i * D + iz) * H + iy) * W + ix];
                }
          y.v[((o * OD + z) * OH + r) * OW + c] = acc;
        }
  return y;
}

Arr relu(const Arr& x) {
  Arr y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

Arr add(const Arr& a, const Arr& b) {
  Arr y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += b.v.at(i);
  return y;
}

Arr sub(const Arr& a, const Arr& b) {
  Arr y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y.v[i] -= b.v.at(i);
  return y;
}

Arr scale(const Arr& x, double s) {
  Arr y = x;
  for (double& v : y.v) v *= s;
  return y;
}

Arr avg_pool3d(const Arr& x) {
  const std::size_t C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
  Arr y{x.shape, std::vector<double>(x.size(), 0.0)};
  for (std::size_t c = 0; c < C; ++c)
    for (long z = 0; z < static_cast<long>(D); ++z)
      for (long r = 0; r < static_cast<long>(H); ++r)
        for (long q = 0; q < static_cast<long>(W); ++q) {
          double acc = 0.0;
          int count = 0;
          for (long iz = z - 1; iz <= z + 1; ++iz)
            for (long iy = r - 1; iy <= r + 1; ++iy)
              for (long ix = q - 1; ix <= q + 1; ++ix) {
                if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(D) ||
                    iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) {
                  continue;
                }
                acc += x.v[((c * D + iz) * H + iy) * W + ix];
                ++count;
              }
          y.v[((c * D + z) * H + r) * W + q] = acc / count;
        }
  return y;
}

Arr global_avg_pool(const Arr& x) {
  const std::size_t C = x.shape[0], n = x.size() / C;
  Arr y{{C}, std::vector<double>(C, 0.0)};
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < n; ++i) y.v[c] += x.v[c * n + i];
    y.v[c] /= static_cast<double>(n);
  }
  return y;
}

Arr linear(const Arr& x, const Arr& w, const Arr& b) {
  const std::size_t K = w.shape[0], C = w.shape[1];
  Arr y{{K}, b.v};
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < C; ++c) y.v[k] += w.v[k * C + c] * x.v[c];
  return y;
}

double cross_entropy(const Arr& logits, std::size_t label) {
  double total = 0.0;
  for (double v : logits.v) total += std::exp(v);
  return std::log(total) - logits.v.at(label);
}

double sum(const Arr& x) {
  double s = 0.0;
  for (double v : x.v) s += v;
  return s;
}

Arr mgnet_forward(const mgnet::MgNetConfig& cfg, const std::vector<Arr>& params,
                  const Arr& volume, std::vector<Shape>* level_shapes,
                  std::vector<bool>* relu_pattern) {
  auto act = [relu_pattern](const Arr& x) {
    if (relu_pattern) {
      for (double v : x.v) relu_pattern->push_back(v > 0.0);
    }
    return relu(x);
  };
  std::size_t next = 0;
  const Arr& f_in = params.at(next++);
  Arr f = act(conv3d(volume, f_in, 1));
  Arr u{{cfg.feature_channels, volume.shape[1], volume.shape[2], volume.shape[3]}, {}};
  u.v.assign(mgnet::shape_numel(u.shape), 0.0);

  struct Level {
    const Arr* A;
    std::vector<const Arr*> B;
    const Arr* Pi = nullptr;
    const Arr* R = nullptr;
  };
  std::vector<Level> levels(cfg.num_grids);
  for (std::size_t l = 0; l < cfg.num_grids; ++l) {
    levels[l].A = &params.at(next++);
    const std::size_t nb = cfg.share_smoothers ? 1 : cfg.iters(l);
    for (std::size_t i = 0; i < nb; ++i) levels[l].B.push_back(&params.at(next++));
    if (l + 1 < cfg.num_grids) {
      levels[l].Pi = &params.at(next++);
      levels[l].R = &params.at(next++);
    }
  }
  const Arr& hw = params.at(next++);
  const Arr& hb = params.at(next++);

  for (std::size_t l = 0; l < cfg.num_grids; ++l) {
    const Level& lv = levels[l];
    if (level_shapes) level_shapes->push_back(Shape(u.shape.begin() + 1, u.shape.end()));
    for (std::size_t i = 0; i < cfg.iters(l); ++i) {
      const Arr& B = *lv.B[lv.B.size() == 1 ? 0 : i];
      u = add(u, act(conv3d(act(sub(f, conv3d(u, *lv.A, 1))), B, 1)));
    }
    if (l + 1 < cfg.num_grids) {
      Arr u_next = conv3d(u, *lv.Pi, 2);
      Arr f_next = add(conv3d(sub(f, conv3d(u, *lv.A, 1)), *lv.R, 2),
                       conv3d(u_next, *levels[l + 1].A, 1));
      if (cfg.use_avg_pool) u_next = avg_pool3d(u_next);
      u = std::move(u_next);
      f = std::move(f_next);
    }
  }
  return linear(global_avg_pool(u), hw, hb);
}

mgnet::Tensor random_tensor(mgnet::Rng& rng, Shape shape, double lo, double hi) {
  mgnet::Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

GradCheck check_gradients(const std::vector<mgnet::Tensor>& leaves, const F32Loss& f32,
                          const F64Loss& f64, double step) {
  std::vector<mgnet::Tensor> inputs;
  for (const mgnet::Tensor& t : leaves) {
    mgnet::Tensor c = t.clone();
    c.set_requires_grad(true);
    c.zero_grad();
    inputs.push_back(c);
  }
  {
    mgnet::Graph g;
    g.backward(f32(g, inputs));
  }

  std::vector<Arr> point;
  for (const mgnet::Tensor& t : leaves) point.push_back(from(t));

  GradCheck out;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    std::vector<double> numeric(point[li].size());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double saved = point[li].v[i];
      point[li].v[i] = saved + step;
      const double up = f64(point);
      point[li].v[i] = saved - step;
      const double down = f64(point);
      point[li].v[i] = saved;
      numeric[i] = (up - down) / (2.0 * step);
    }
    double scale = 0.0;
    for (double n : numeric) scale = std::max(scale, std::abs(n));
    const double floor = std::max(1e-2 * scale, 1e-12);
    const auto analytic = inputs[li].grad();
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double a = analytic[i], n = numeric[i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(a - n) / denom);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace ref
