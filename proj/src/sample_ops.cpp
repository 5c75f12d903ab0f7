#include "tofu/sample_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace tofu {

namespace {
constexpr double kStdEps = 1e-12;

struct Tap {
  int64_t x0, y0;
  double fx, fy;
  bool gx, gy;  // gradient live (not clamped)
};

inline Tap make_tap(double u, double v, int64_t W, int64_t H) {
  Tap t;
  t.gx = u > 0.0 && u < static_cast<double>(W - 1);
  t.gy = v > 0.0 && v < static_cast<double>(H - 1);
  double uc = u < 0.0 ? 0.0 : (u > static_cast<double>(W - 1) ? static_cast<double>(W - 1) : u);
  double vc = v < 0.0 ? 0.0 : (v > static_cast<double>(H - 1) ? static_cast<double>(H - 1) : v);
  t.x0 = static_cast<int64_t>(uc);
  t.y0 = static_cast<int64_t>(vc);
  if (t.x0 > W - 2) t.x0 = W - 2;
  if (t.y0 > H - 2) t.y0 = H - 2;
  if (t.x0 < 0) t.x0 = 0;
  if (t.y0 < 0) t.y0 = 0;
  t.fx = uc - static_cast<double>(t.x0);
  t.fy = vc - static_cast<double>(t.y0);
  return t;
}
}  // namespace

NodePtr bilinear_sample(const NodePtr& feature_map, const NodePtr& uv) {
  const auto& fs = feature_map->value.shape();
  const auto& us = uv->value.shape();
  if (fs.size() != 3) throw std::invalid_argument("bilinear_sample: map must be [C,H,W]");
  if (us.size() != 2 || us[1] != 2)
    throw std::invalid_argument("bilinear_sample: uv must be [M,2]");
  const int64_t C = fs[0], H = fs[1], W = fs[2], M = us[0];
  if (H < 2 || W < 2) throw std::invalid_argument("bilinear_sample: map extents must be >= 2");

  DenseArray out({M, C});
  const double* F = feature_map->value.data();
  for (int64_t i = 0; i < M; ++i) {
    const Tap t = make_tap(uv->value[i * 2 + 0], uv->value[i * 2 + 1], W, H);
    const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
    const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
    const int64_t base = t.y0 * W + t.x0;
    for (int64_t c = 0; c < C; ++c) {
      const double* p = F + c * H * W + base;
      out[i * C + c] = w00 * p[0] + w10 * p[1] + w01 * p[W] + w11 * p[W + 1];
    }
  }

  auto back = [C, H, W, M](Node& self) {
    const auto& fmap = self.parents[0];
    const auto& uv = self.parents[1];
    const double* F = fmap->value.data();
    double* gF = nullptr;
    if (fmap->requires_grad) gF = fmap->ensure_grad().data();
    double* gU = nullptr;
    if (uv->requires_grad) gU = uv->ensure_grad().data();
    for (int64_t i = 0; i < M; ++i) {
      const Tap t = make_tap(uv->value[i * 2 + 0], uv->value[i * 2 + 1], W, H);
      const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
      const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
      const int64_t base = t.y0 * W + t.x0;
      double du = 0.0, dv = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double g = self.grad[i * C + c];
        if (g == 0.0) continue;
        const double* p = F + c * H * W + base;
        if (gF) {
          double* q = gF + c * H * W + base;
          q[0] += g * w00;
          q[1] += g * w10;
          q[W] += g * w01;
          q[W + 1] += g * w11;
        }
        if (gU) {
          du += g * ((1 - t.fy) * (p[1] - p[0]) + t.fy * (p[W + 1] - p[W]));
          dv += g * ((1 - t.fx) * (p[W] - p[0]) + t.fx * (p[W + 1] - p[1]));
        }
      }
      if (gU) {
        if (t.gx) gU[i * 2 + 0] += du;
        if (t.gy) gU[i * 2 + 1] += dv;
      }
    }
  };
  return make_op(std::move(out), "bilinear_sample", {feature_map, uv}, std::move(back));
}

NodePtr softmax_expectation(const NodePtr& volume, const DenseArray& grid_coords) {
  const auto& vs = volume->value.shape();
  if (vs.size() < 2) throw std::invalid_argument("softmax_expectation: volume rank must be >= 2");
  const int64_t N = vs[0];
  int64_t S = 1;
  for (size_t i = 1; i < vs.size(); ++i) S *= vs[i];
  if (grid_coords.rank() != 2 || grid_coords.dim(1) != 3 || grid_coords.dim(0) != S)
    throw std::invalid_argument("softmax_expectation: grid coords must be [" +
                                std::to_string(S) + ",3], got " + grid_coords.shape_str());

  DenseArray out({N, 3});
  DenseArray probs({N, S});  // kept alive in the closure for the backward pass
  const double* G = grid_coords.data();
  for (int64_t n = 0; n < N; ++n) {
    const double* l = volume->value.data() + n * S;
    double m = l[0];
    for (int64_t q = 1; q < S; ++q)
      if (l[q] > m) m = l[q];
    double z = 0.0;
    double* p = probs.data() + n * S;
    for (int64_t q = 0; q < S; ++q) {
      p[q] = std::exp(l[q] - m);
      z += p[q];
    }
    double ex = 0.0, ey = 0.0, ez = 0.0;
    const double inv = 1.0 / z;
    for (int64_t q = 0; q < S; ++q) {
      p[q] *= inv;
      ex += p[q] * G[q * 3 + 0];
      ey += p[q] * G[q * 3 + 1];
      ez += p[q] * G[q * 3 + 2];
    }
    out[n * 3 + 0] = ex;
    out[n * 3 + 1] = ey;
    out[n * 3 + 2] = ez;
  }

  DenseArray coords = grid_coords;  // copy; grids are small
  DenseArray expect = out;
  auto back = [N, S, probs = std::move(probs), coords = std::move(coords),
               expect = std::move(expect)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const double* G = coords.data();
    for (int64_t n = 0; n < N; ++n) {
      const double* p = probs.data() + n * S;
      const double* e = expect.data() + n * 3;
      const double* go = self.grad.data() + n * 3;
      double* gl = g.data() + n * S;
      for (int64_t q = 0; q < S; ++q) {
        const double d0 = G[q * 3 + 0] - e[0];
        const double d1 = G[q * 3 + 1] - e[1];
        const double d2 = G[q * 3 + 2] - e[2];
        gl[q] += p[q] * (d0 * go[0] + d1 * go[1] + d2 * go[2]);
      }
    }
  };
  return make_op(std::move(out), "softmax_expectation", {volume}, std::move(back));
}

NodePtr fuse_mean_std(const std::vector<NodePtr>& view_features) {
  const size_t K = view_features.size();
  if (K == 0) throw std::invalid_argument("fuse_mean_std: no views");
  const auto& s0 = view_features[0]->value.shape();
  if (s0.size() != 2) throw std::invalid_argument("fuse_mean_std: expects [M,C] features");
  for (const auto& f : view_features)
    if (!f->value.same_shape(view_features[0]->value))
      throw std::invalid_argument("fuse_mean_std: view feature shapes differ");
  const int64_t M = s0[0], C = s0[1];
  const double invK = 1.0 / static_cast<double>(K);

  DenseArray out({M, 2 * C});
  for (int64_t i = 0; i < M; ++i) {
    double* o = out.data() + i * 2 * C;
    for (int64_t c = 0; c < C; ++c) {
      double mu = 0.0;
      for (size_t k = 0; k < K; ++k) mu += view_features[k]->value[i * C + c];
      mu *= invK;
      double var = 0.0;
      for (size_t k = 0; k < K; ++k) {
        const double d = view_features[k]->value[i * C + c] - mu;
        var += d * d;
      }
      var *= invK;
      o[c] = mu;
      o[C + c] = std::sqrt(var + kStdEps) - std::sqrt(kStdEps);
    }
  }

  std::vector<NodePtr> parents(view_features.begin(), view_features.end());
  auto back = [M, C, K, invK](Node& self) {
    for (size_t k = 0; k < K; ++k)
      if (self.parents[k]->requires_grad) self.parents[k]->ensure_grad();
    for (int64_t i = 0; i < M; ++i) {
      for (int64_t c = 0; c < C; ++c) {
        const double g_mu = self.grad[i * 2 * C + c];
        const double g_sd = self.grad[i * 2 * C + C + c];
        double mu = 0.0;
        for (size_t k = 0; k < K; ++k) mu += self.parents[k]->value[i * C + c];
        mu *= invK;
        double var = 0.0;
        for (size_t k = 0; k < K; ++k) {
          const double d = self.parents[k]->value[i * C + c] - mu;
          var += d * d;
        }
        var *= invK;
        const double sd = std::sqrt(var + kStdEps);
        for (size_t k = 0; k < K; ++k) {
          if (!self.parents[k]->requires_grad) continue;
          const double d = self.parents[k]->value[i * C + c] - mu;
          self.parents[k]->grad[i * C + c] += g_mu * invK + g_sd * d * invK / sd;
        }
      }
    }
  };
  return make_op(std::move(out), "fuse_mean_std", std::move(parents), std::move(back));
}

NodePtr fuse_max(const std::vector<NodePtr>& view_features) {
  const size_t K = view_features.size();
  if (K == 0) throw std::invalid_argument("fuse_max: no views");
  const auto& s0 = view_features[0]->value.shape();
  if (s0.size() != 2) throw std::invalid_argument("fuse_max: expects [M,C] features");
  for (const auto& f : view_features)
    if (!f->value.same_shape(view_features[0]->value))
      throw std::invalid_argument("fuse_max: view feature shapes differ");
  const int64_t n = view_features[0]->value.size();

  DenseArray out = DenseArray::zeros_like(view_features[0]->value);
  std::vector<uint8_t> argmax(static_cast<size_t>(n), 0);
  for (int64_t i = 0; i < n; ++i) {
    double best = view_features[0]->value[i];
    uint8_t bk = 0;
    for (size_t k = 1; k < K; ++k) {
      const double v = view_features[k]->value[i];
      if (v > best) {
        best = v;
        bk = static_cast<uint8_t>(k);
      }
    }
    out[i] = best;
    argmax[static_cast<size_t>(i)] = bk;
  }
  std::vector<NodePtr> parents(view_features.begin(), view_features.end());
  auto back = [n, argmax = std::move(argmax)](Node& self) {
    for (int64_t i = 0; i < n; ++i) {
      const auto& p = self.parents[argmax[static_cast<size_t>(i)]];
      if (p->requires_grad) p->ensure_grad()[i] += self.grad[i];
    }
  };
  return make_op(std::move(out), "fuse_max", std::move(parents), std::move(back));
}

}  // namespace tofu
