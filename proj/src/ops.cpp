#include "tofu/ops.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <stdexcept>

namespace tofu {

static void require_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                                " vs " + b->value.shape_str());
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a, b, "add");
  DenseArray out = DenseArray::zeros_like(a->value);
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
  return make_op(std::move(out), "add", {a, b}, [](Node& self) {
    const int64_t n = self.value.size();
    for (const auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a, b, "sub");
  DenseArray out = DenseArray::zeros_like(a->value);
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] - b->value[i];
  return make_op(std::move(out), "sub", {a, b}, [](Node& self) {
    const int64_t n = self.value.size();
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a, b, "mul");
  DenseArray out = DenseArray::zeros_like(a->value);
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
  return make_op(std::move(out), "mul", {a, b}, [](Node& self) {
    const int64_t n = self.value.size();
    const auto& a = self.parents[0];
    const auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

NodePtr scale(const NodePtr& a, double c) {
  DenseArray out = DenseArray::zeros_like(a->value);
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * c;
  return make_op(std::move(out), "scale", {a}, [c](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const int64_t n = self.value.size();
    for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * c;
  });
}

NodePtr leaky_relu(const NodePtr& a, double slope) {
  DenseArray out = DenseArray::zeros_like(a->value);
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) {
    const double v = a->value[i];
    out[i] = v > 0.0 ? v : slope * v;
  }
  return make_op(std::move(out), "leaky_relu", {a}, [slope](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto& x = self.parents[0]->value;
    const int64_t n = self.value.size();
    for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * (x[i] > 0.0 ? 1.0 : slope);
  });
}

NodePtr sum(const NodePtr& a) {
  double s = 0.0;
  const int64_t n = a->value.size();
  for (int64_t i = 0; i < n; ++i) s += a->value[i];
  return make_op(DenseArray::scalar(s), "sum", {a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const double gs = self.grad[0];
    const int64_t n = g.size();
    for (int64_t i = 0; i < n; ++i) g[i] += gs;
  });
}

NodePtr reshape(const NodePtr& a, std::vector<int64_t> shape) {
  if (shape_product(shape) != a->value.size())
    throw std::invalid_argument("reshape: element count mismatch, " + a->value.shape_str());
  DenseArray out(std::move(shape),
                 std::vector<double>(a->value.data(), a->value.data() + a->value.size()));
  return make_op(std::move(out), "reshape", {a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const int64_t n = g.size();
    for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
  });
}

NodePtr concat(const NodePtr& a, const NodePtr& b, int axis) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa.size() != sb.size() || axis < 0 || axis >= static_cast<int>(sa.size()))
    throw std::invalid_argument("concat: rank mismatch or bad axis");
  for (size_t i = 0; i < sa.size(); ++i)
    if (static_cast<int>(i) != axis && sa[i] != sb[i])
      throw std::invalid_argument("concat: extent mismatch " + a->value.shape_str() + " vs " +
                                  b->value.shape_str());
  std::vector<int64_t> so = sa;
  so[static_cast<size_t>(axis)] += sb[static_cast<size_t>(axis)];

  // outer x (axis) x inner layout
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= sa[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < sa.size(); ++i) inner *= sa[i];
  const int64_t ca = sa[static_cast<size_t>(axis)] * inner;
  const int64_t cb = sb[static_cast<size_t>(axis)] * inner;

  DenseArray out(so);
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * (ca + cb), a->value.data() + o * ca, sizeof(double) * ca);
    std::memcpy(out.data() + o * (ca + cb) + ca, b->value.data() + o * cb, sizeof(double) * cb);
  }
  return make_op(std::move(out), "concat", {a, b}, [outer, ca, cb](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < ca; ++i) g[o * ca + i] += self.grad[o * (ca + cb) + i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < cb; ++i) g[o * cb + i] += self.grad[o * (ca + cb) + ca + i];
    }
  });
}

NodePtr select0(const NodePtr& a, int64_t i) {
  const auto& s = a->value.shape();
  if (s.empty() || i < 0 || i >= s[0]) throw std::invalid_argument("select0: index out of range");
  std::vector<int64_t> so(s.begin() + 1, s.end());
  const int64_t inner = shape_product(so);
  DenseArray out(so, std::vector<double>(a->value.data() + i * inner,
                                         a->value.data() + (i + 1) * inner));
  return make_op(std::move(out), "select0", {a}, [i, inner](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int64_t k = 0; k < inner; ++k) g[i * inner + k] += self.grad[k];
  });
}

// shared upsampling for 2/3 spatial axes
static NodePtr upsample_nearest(const NodePtr& a, int spatial) {
  const auto& s = a->value.shape();
  const int rank = static_cast<int>(s.size());
  if (rank != spatial + 1 && rank != spatial + 2)
    throw std::invalid_argument("upsample_nearest: bad rank " + a->value.shape_str());
  const int64_t lead = shape_product(std::vector<int64_t>(s.begin(), s.end() - spatial));
  std::vector<int64_t> in_sp(s.end() - spatial, s.end());
  std::vector<int64_t> so(s.begin(), s.end() - spatial);
  for (int64_t e : in_sp) so.push_back(e * 2);

  DenseArray out(so);
  const int64_t D = spatial == 3 ? in_sp[0] : 1;
  const int64_t H = in_sp[spatial - 2], W = in_sp[spatial - 1];
  const int64_t in_vol = D * H * W, out_vol = in_vol * (spatial == 3 ? 8 : 4);
  for (int64_t l = 0; l < lead; ++l) {
    const double* src = a->value.data() + l * in_vol;
    double* dst = out.data() + l * out_vol;
    for (int64_t z = 0; z < D * (spatial == 3 ? 2 : 1); ++z)
      for (int64_t y = 0; y < H * 2; ++y)
        for (int64_t x = 0; x < W * 2; ++x) {
          const int64_t si = ((z / (spatial == 3 ? 2 : 1)) * H + y / 2) * W + x / 2;
          dst[(z * H * 2 + y) * W * 2 + x] = src[si];
        }
  }
  return make_op(std::move(out), "upsample_nearest", {a},
                 [lead, D, H, W, in_vol, out_vol, spatial](Node& self) {
                   auto& g = self.parents[0]->ensure_grad();
                   for (int64_t l = 0; l < lead; ++l) {
                     const double* gs = self.grad.data() + l * out_vol;
                     double* gd = g.data() + l * in_vol;
                     for (int64_t z = 0; z < D * (spatial == 3 ? 2 : 1); ++z)
                       for (int64_t y = 0; y < H * 2; ++y)
                         for (int64_t x = 0; x < W * 2; ++x) {
                           const int64_t si = ((z / (spatial == 3 ? 2 : 1)) * H + y / 2) * W + x / 2;
                           gd[si] += gs[(z * H * 2 + y) * W * 2 + x];
                         }
                   }
                 });
}

NodePtr upsample_nearest_2d(const NodePtr& a) { return upsample_nearest(a, 2); }
NodePtr upsample_nearest_3d(const NodePtr& a) { return upsample_nearest(a, 3); }

NodePtr add_rows_outer(const NodePtr& centers, const DenseArray& offsets) {
  const auto& sc = centers->value.shape();
  if (sc.size() != 2 || sc[1] != 3 || offsets.rank() != 2 || offsets.dim(1) != 3)
    throw std::invalid_argument("add_rows_outer: expects [N,3] centers and [Q,3] offsets");
  const int64_t N = sc[0], Q = offsets.dim(0);
  DenseArray out({N * Q, 3});
  for (int64_t i = 0; i < N; ++i)
    for (int64_t q = 0; q < Q; ++q)
      for (int64_t k = 0; k < 3; ++k)
        out[(i * Q + q) * 3 + k] = centers->value[i * 3 + k] + offsets[q * 3 + k];
  return make_op(std::move(out), "add_rows_outer", {centers}, [N, Q](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int64_t i = 0; i < N; ++i)
      for (int64_t q = 0; q < Q; ++q)
        for (int64_t k = 0; k < 3; ++k) g[i * 3 + k] += self.grad[(i * Q + q) * 3 + k];
  });
}

NodePtr rotate_rows(const NodePtr& x, const double* rotation) {
  const auto& s = x->value.shape();
  if (s.size() != 2 || s[1] != 3) throw std::invalid_argument("rotate_rows: expects [M,3]");
  const int64_t M = s[0];
  std::array<double, 9> R;
  std::copy(rotation, rotation + 9, R.begin());
  DenseArray out({M, 3});
  for (int64_t i = 0; i < M; ++i) {
    const double* p = x->value.data() + i * 3;
    for (int k = 0; k < 3; ++k)
      out[i * 3 + k] = R[k * 3 + 0] * p[0] + R[k * 3 + 1] * p[1] + R[k * 3 + 2] * p[2];
  }
  return make_op(std::move(out), "rotate_rows", {x}, [M, R](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int64_t i = 0; i < M; ++i) {
      const double* go = self.grad.data() + i * 3;
      for (int k = 0; k < 3; ++k)
        g[i * 3 + k] += R[0 * 3 + k] * go[0] + R[1 * 3 + k] * go[1] + R[2 * 3 + k] * go[2];
    }
  });
}

NodePtr mean_row_sq_dist(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a, b, "mean_row_sq_dist");
  if (a->value.rank() != 2) throw std::invalid_argument("mean_row_sq_dist: expects rank-2");
  const int64_t N = a->value.dim(0);
  const int64_t n = a->value.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a->value[i] - b->value[i];
    s += d * d;
  }
  return make_op(DenseArray::scalar(s / static_cast<double>(N)), "mean_row_sq_dist", {a, b},
                 [N, n](Node& self) {
                   const double c = 2.0 * self.grad[0] / static_cast<double>(N);
                   const auto& a = self.parents[0];
                   const auto& b = self.parents[1];
                   if (a->requires_grad) {
                     auto& g = a->ensure_grad();
                     for (int64_t i = 0; i < n; ++i) g[i] += c * (a->value[i] - b->value[i]);
                   }
                   if (b->requires_grad) {
                     auto& g = b->ensure_grad();
                     for (int64_t i = 0; i < n; ++i) g[i] -= c * (a->value[i] - b->value[i]);
                   }
                 });
}

}  // namespace tofu
