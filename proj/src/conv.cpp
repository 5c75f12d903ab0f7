#include "tofu/conv.hpp"

#include <cblas.h>

#include <cstring>
#include <stdexcept>
#include <vector>

namespace tofu {

namespace {

struct ConvDims {
  int spatial;             // 2 or 3
  int64_t batch;           // 1 when unbatched
  bool batched;            // leading batch axis present on input
  int64_t ci, co;
  int64_t in[3], out[3], k[3];  // depth, height, width (depth unused for 2-D)
  int stride, pad;
  int64_t cols_k;          // ci * prod(k)
  int64_t cols_p;          // prod(out)
  int64_t in_vol, out_vol; // per channel
};

ConvDims resolve(const char* op, const DenseArray& input, const DenseArray& w,
                 const DenseArray& b, int spatial, int stride, int pad) {
  ConvDims d{};
  d.spatial = spatial;
  d.stride = stride;
  d.pad = pad;
  const int wrank = spatial + 2;
  if (w.rank() != wrank)
    throw std::invalid_argument(std::string(op) + ": weights must be rank " +
                                std::to_string(wrank) + ", got " + w.shape_str());
  if (input.rank() == spatial + 1) {
    d.batched = false;
    d.batch = 1;
  } else if (input.rank() == spatial + 2) {
    d.batched = true;
    d.batch = input.dim(0);
  } else {
    throw std::invalid_argument(std::string(op) + ": bad input rank " + input.shape_str());
  }
  const int off = d.batched ? 1 : 0;
  d.ci = input.dim(off);
  d.co = w.dim(0);
  if (w.dim(1) != d.ci)
    throw std::invalid_argument(std::string(op) + ": input channels " + input.shape_str() +
                                " do not match kernel input channels " + w.shape_str());
  if (b.rank() != 1 || b.dim(0) != d.co)
    throw std::invalid_argument(std::string(op) + ": bias must be [Co], got " + b.shape_str());
  if (stride < 1) throw std::invalid_argument(std::string(op) + ": stride must be >= 1");
  d.cols_k = d.ci;
  d.cols_p = 1;
  d.in_vol = 1;
  d.out_vol = 1;
  for (int a = 0; a < spatial; ++a) {
    d.in[a] = input.dim(off + 1 + a);
    d.k[a] = w.dim(2 + a);
    if (d.k[a] % 2 == 0)
      throw std::invalid_argument(std::string(op) + ": kernel extents must be odd, got " +
                                  w.shape_str());
    const int64_t o = (d.in[a] + 2 * pad - d.k[a]) / stride + 1;
    if (o < 1)
      throw std::invalid_argument(std::string(op) + ": output extent < 1 for input " +
                                  input.shape_str());
    d.out[a] = o;
    d.cols_k *= d.k[a];
    d.cols_p *= o;
    d.in_vol *= d.in[a];
    d.out_vol *= o;
  }
  return d;
}

// Gathers the receptive fields of one batch item into cols[K x P], row-major.
void im2col(const ConvDims& d, const double* in, double* cols) {
  const int64_t D = d.spatial == 3 ? d.in[0] : 1;
  const int64_t H = d.in[d.spatial - 2], W = d.in[d.spatial - 1];
  const int64_t oD = d.spatial == 3 ? d.out[0] : 1;
  const int64_t oH = d.out[d.spatial - 2], oW = d.out[d.spatial - 1];
  const int64_t kD = d.spatial == 3 ? d.k[0] : 1;
  const int64_t kH = d.k[d.spatial - 2], kW = d.k[d.spatial - 1];
  double* row = cols;
  for (int64_t c = 0; c < d.ci; ++c) {
    const double* plane = in + c * d.in_vol;
    for (int64_t kz = 0; kz < kD; ++kz)
      for (int64_t ky = 0; ky < kH; ++ky)
        for (int64_t kx = 0; kx < kW; ++kx) {
          for (int64_t oz = 0; oz < oD; ++oz) {
            const int64_t z = oz * d.stride + kz - (d.spatial == 3 ? d.pad : 0);
            const bool zin = d.spatial != 3 || (z >= 0 && z < D);
            for (int64_t oy = 0; oy < oH; ++oy) {
              const int64_t y = oy * d.stride + ky - d.pad;
              double* dst = row + (oz * oH + oy) * oW;
              if (!zin || y < 0 || y >= H) {
                std::memset(dst, 0, sizeof(double) * oW);
                continue;
              }
              const double* srow = plane + (z * H + y) * W;
              if (d.stride == 1) {
                // contiguous run with edge padding
                int64_t x0 = kx - d.pad;  // input x for ox = 0
                for (int64_t ox = 0; ox < oW; ++ox) {
                  const int64_t x = x0 + ox;
                  dst[ox] = (x >= 0 && x < W) ? srow[x] : 0.0;
                }
              } else {
                for (int64_t ox = 0; ox < oW; ++ox) {
                  const int64_t x = ox * d.stride + kx - d.pad;
                  dst[ox] = (x >= 0 && x < W) ? srow[x] : 0.0;
                }
              }
            }
          }
          row += d.cols_p;
        }
  }
}

// Scatter-add of cols gradients back into the input gradient.
void col2im(const ConvDims& d, const double* cols, double* gin) {
  const int64_t D = d.spatial == 3 ? d.in[0] : 1;
  const int64_t H = d.in[d.spatial - 2], W = d.in[d.spatial - 1];
  const int64_t oD = d.spatial == 3 ? d.out[0] : 1;
  const int64_t oH = d.out[d.spatial - 2], oW = d.out[d.spatial - 1];
  const int64_t kD = d.spatial == 3 ? d.k[0] : 1;
  const int64_t kH = d.k[d.spatial - 2], kW = d.k[d.spatial - 1];
  const double* row = cols;
  for (int64_t c = 0; c < d.ci; ++c) {
    double* plane = gin + c * d.in_vol;
    for (int64_t kz = 0; kz < kD; ++kz)
      for (int64_t ky = 0; ky < kH; ++ky)
        for (int64_t kx = 0; kx < kW; ++kx) {
          for (int64_t oz = 0; oz < oD; ++oz) {
            const int64_t z = oz * d.stride + kz - (d.spatial == 3 ? d.pad : 0);
            if (d.spatial == 3 && (z < 0 || z >= D)) continue;
            for (int64_t oy = 0; oy < oH; ++oy) {
              const int64_t y = oy * d.stride + ky - d.pad;
              if (y < 0 || y >= H) continue;
              const double* srow = row + (oz * oH + oy) * oW;
              double* drow = plane + (z * H + y) * W;
              for (int64_t ox = 0; ox < oW; ++ox) {
                const int64_t x = ox * d.stride + kx - d.pad;
                if (x >= 0 && x < W) drow[x] += srow[ox];
              }
            }
          }
          row += d.cols_p;
        }
  }
}

thread_local std::vector<double> t_cols;

NodePtr conv_impl(const char* op, const NodePtr& input, const NodePtr& weights,
                  const NodePtr& bias, int spatial, int stride, int pad) {
  const ConvDims d =
      resolve(op, input->value, weights->value, bias->value, spatial, stride, pad);

  std::vector<int64_t> out_shape;
  if (d.batched) out_shape.push_back(d.batch);
  out_shape.push_back(d.co);
  for (int a = 0; a < spatial; ++a) out_shape.push_back(d.out[a]);
  DenseArray out(out_shape);

  const bool pointwise = d.cols_k == d.ci && d.stride == 1 && d.in_vol == d.out_vol;
  t_cols.resize(static_cast<size_t>(d.cols_k * d.cols_p));
  for (int64_t bi = 0; bi < d.batch; ++bi) {
    const double* in = input->value.data() + bi * d.ci * d.in_vol;
    const double* cols = in;
    if (!pointwise) {
      im2col(d, in, t_cols.data());
      cols = t_cols.data();
    }
    double* o = out.data() + bi * d.co * d.out_vol;
    for (int64_t c = 0; c < d.co; ++c) {
      const double bv = bias->value[c];
      for (int64_t p = 0; p < d.out_vol; ++p) o[c * d.out_vol + p] = bv;
    }
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(d.co),
                static_cast<int>(d.cols_p), static_cast<int>(d.cols_k), 1.0,
                weights->value.data(), static_cast<int>(d.cols_k), cols,
                static_cast<int>(d.cols_p), 1.0, o, static_cast<int>(d.cols_p));
  }

  auto back = [d, pointwise](Node& self) {
    const auto& input = self.parents[0];
    const auto& weights = self.parents[1];
    const auto& bias = self.parents[2];
    thread_local std::vector<double> cols_buf, gcols_buf;
    if (!pointwise) cols_buf.resize(static_cast<size_t>(d.cols_k * d.cols_p));
    if (input->requires_grad) gcols_buf.resize(static_cast<size_t>(d.cols_k * d.cols_p));

    if (bias->requires_grad) {
      auto& gb = bias->ensure_grad();
      for (int64_t bi = 0; bi < d.batch; ++bi) {
        const double* go = self.grad.data() + bi * d.co * d.out_vol;
        for (int64_t c = 0; c < d.co; ++c) {
          double s = 0.0;
          for (int64_t p = 0; p < d.out_vol; ++p) s += go[c * d.out_vol + p];
          gb[c] += s;
        }
      }
    }
    for (int64_t bi = 0; bi < d.batch; ++bi) {
      const double* in = input->value.data() + bi * d.ci * d.in_vol;
      const double* go = self.grad.data() + bi * d.co * d.out_vol;
      if (weights->requires_grad) {
        const double* cols = in;
        if (!pointwise) {
          im2col(d, in, cols_buf.data());
          cols = cols_buf.data();
        }
        auto& gw = weights->ensure_grad();
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(d.co),
                    static_cast<int>(d.cols_k), static_cast<int>(d.cols_p), 1.0, go,
                    static_cast<int>(d.out_vol), cols, static_cast<int>(d.cols_p), 1.0,
                    gw.data(), static_cast<int>(d.cols_k));
      }
      if (input->requires_grad) {
        auto& gin = input->ensure_grad();
        double* gi = gin.data() + bi * d.ci * d.in_vol;
        if (pointwise) {
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(d.cols_k),
                      static_cast<int>(d.cols_p), static_cast<int>(d.co), 1.0,
                      weights->value.data(), static_cast<int>(d.cols_k), go,
                      static_cast<int>(d.cols_p), 1.0, gi, static_cast<int>(d.cols_p));
        } else {
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(d.cols_k),
                      static_cast<int>(d.cols_p), static_cast<int>(d.co), 1.0,
                      weights->value.data(), static_cast<int>(d.cols_k), go,
                      static_cast<int>(d.cols_p), 0.0, gcols_buf.data(),
                      static_cast<int>(d.cols_p));
          col2im(d, gcols_buf.data(), gi);
        }
      }
    }
  };
  return make_op(std::move(out), spatial == 2 ? "conv2d" : "conv3d", {input, weights, bias},
                 std::move(back));
}

}  // namespace

NodePtr conv2d(const NodePtr& input, const NodePtr& weights, const NodePtr& bias, int stride,
               int padding) {
  return conv_impl("conv2d", input, weights, bias, 2, stride, padding);
}

NodePtr conv3d(const NodePtr& input, const NodePtr& weights, const NodePtr& bias, int stride,
               int padding) {
  return conv_impl("conv3d", input, weights, bias, 3, stride, padding);
}

}  // namespace tofu
