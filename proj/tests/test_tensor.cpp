#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "support.hpp"
#include "tofu/adam.hpp"
#include "tofu/checkpoint.hpp"
#include "tofu/conv.hpp"
#include "tofu/log.hpp"
#include "tofu/ops.hpp"
#include "tofu/sample_ops.hpp"

using namespace tofu;
using test::check_gradients;
using test::random_array;

TEST_CASE("conv3d identity kernel") {
  Rng rng(1);
  auto x = make_leaf(random_array({1, 3, 3, 3}, rng));
  auto w = make_leaf(DenseArray({1, 1, 1, 1, 1}, {1.0}));
  auto b = make_leaf(DenseArray({1}, {0.0}));
  auto y = conv3d(x, w, b, 1, 0);
  REQUIRE(y->value.same_shape(x->value));
  for (int64_t i = 0; i < x->value.size(); ++i) CHECK(y->value[i] == x->value[i]);
}

TEST_CASE("conv3d all-ones kernel sums the window") {
  const double c = 0.37;
  DenseArray in({1, 5, 5, 5});
  in.fill(c);
  auto x = make_leaf(in);
  DenseArray wv({1, 1, 3, 3, 3});
  wv.fill(1.0);
  auto w = make_leaf(wv);
  auto b = make_leaf(DenseArray({1}, {0.0}));
  auto y = conv3d(x, w, b, 1, 1);
  REQUIRE(y->value.same_shape(x->value));
  // interior voxel (2,2,2)
  CHECK(y->value[(2 * 5 + 2) * 5 + 2] == doctest::Approx(27.0 * c).epsilon(1e-12));
}

TEST_CASE("conv3d gradient matches finite differences") {
  Rng rng(7);
  auto x = make_leaf(random_array({2, 4, 4, 4}, rng));
  auto w = make_leaf(random_array({3, 2, 3, 3, 3}, rng, -0.5, 0.5));
  auto b = make_leaf(random_array({3}, rng));
  auto build = [&] { return sum(conv3d(x, w, b, 1, 1)); };
  auto r = check_gradients(build, {x, w, b});
  CHECK(r.max_rel_err <= 1e-6);
}

TEST_CASE("conv3d strided gradient matches finite differences") {
  Rng rng(17);
  auto x = make_leaf(random_array({2, 4, 4, 4}, rng));
  auto w = make_leaf(random_array({2, 2, 3, 3, 3}, rng, -0.5, 0.5));
  auto b = make_leaf(random_array({2}, rng));
  auto build = [&] { return sum(leaky_relu(conv3d(x, w, b, 2, 1))); };
  auto r = check_gradients(build, {x, w, b});
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("conv2d identity and stride arithmetic") {
  Rng rng(2);
  auto x = make_leaf(random_array({2, 6, 6}, rng));
  auto w = make_leaf(DenseArray({2, 2, 1, 1}, {1.0, 0.0, 0.0, 1.0}));
  auto b = make_leaf(DenseArray({2}, {0.0, 0.0}));
  auto y = conv2d(x, w, b, 1, 0);
  for (int64_t i = 0; i < x->value.size(); ++i) CHECK(y->value[i] == x->value[i]);

  auto x8 = make_leaf(random_array({1, 8, 8}, rng));
  auto w3 = make_leaf(random_array({4, 1, 3, 3}, rng));
  auto b3 = make_leaf(random_array({4}, rng));
  auto y2 = conv2d(x8, w3, b3, 2, 1);
  CHECK(y2->value.shape() == std::vector<int64_t>{4, 4, 4});
}

TEST_CASE("conv2d gradient matches finite differences") {
  Rng rng(3);
  auto x = make_leaf(random_array({2, 5, 5}, rng));
  auto w = make_leaf(random_array({3, 2, 3, 3}, rng, -0.5, 0.5));
  auto b = make_leaf(random_array({3}, rng));
  auto build = [&] { return sum(conv2d(x, w, b, 1, 1)); };
  auto r = check_gradients(build, {x, w, b});
  CHECK(r.max_rel_err <= 1e-6);
}

TEST_CASE("conv2d batched equals per-item") {
  Rng rng(4);
  DenseArray batch = random_array({3, 2, 6, 6}, rng);
  auto w = make_leaf(random_array({4, 2, 3, 3}, rng));
  auto b = make_leaf(random_array({4}, rng));
  auto yb = conv2d(make_leaf(batch, false), w, b, 1, 1);
  for (int64_t i = 0; i < 3; ++i) {
    DenseArray item({2, 6, 6});
    std::copy(batch.data() + i * 72, batch.data() + (i + 1) * 72, item.data());
    auto yi = conv2d(make_leaf(item, false), w, b, 1, 1);
    for (int64_t k = 0; k < yi->value.size(); ++k)
      CHECK(yi->value[k] == yb->value[i * yi->value.size() + k]);
  }
}

TEST_CASE("conv channel mismatch is rejected with both shapes") {
  Rng rng(5);
  auto x = make_leaf(random_array({3, 4, 4}, rng));
  auto w = make_leaf(random_array({2, 2, 3, 3}, rng));
  auto b = make_leaf(random_array({2}, rng));
  CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1),
                       doctest::Contains("[3, 4, 4]"), std::invalid_argument);
}

TEST_CASE("bilinear_sample at pixel centers and midpoints") {
  // 2x2 map per channel with values a,b,c,d
  DenseArray f({2, 2, 2}, {1.0, 2.0, 3.0, 4.0, /*ch1*/ 10.0, 20.0, 30.0, 40.0});
  auto fmap = make_leaf(f, false);
  auto uv = make_leaf(DenseArray({2, 2}, {1.0, 0.0, 0.5, 0.5}), false);
  auto y = bilinear_sample(fmap, uv);
  CHECK(y->value[0] == 2.0);   // pixel center (x=1,y=0)
  CHECK(y->value[1] == 20.0);
  CHECK(y->value[2] == doctest::Approx(2.5).epsilon(1e-15));   // midpoint of 4 centers
  CHECK(y->value[3] == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("bilinear_sample clamps out-of-bounds uv") {
  DenseArray f({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  auto fmap = make_leaf(f, false);
  auto uv = make_leaf(DenseArray({2, 2}, {-5.0, -5.0, 9.0, 9.0}));
  auto y = bilinear_sample(fmap, uv);
  CHECK(y->value[0] == 1.0);
  CHECK(y->value[1] == 4.0);
  backward(sum(y));
  CHECK(uv->grad[0] == 0.0);  // clamped coordinates get zero gradient
  CHECK(uv->grad[3] == 0.0);
}

TEST_CASE("bilinear_sample gradient w.r.t. uv and map matches finite differences") {
  Rng rng(11);
  auto fmap = make_leaf(random_array({3, 6, 7}, rng));
  // fractional parts kept away from the lattice lines
  DenseArray uvv({4, 2});
  for (int64_t i = 0; i < 4; ++i) {
    uvv[i * 2 + 0] = static_cast<double>(rng.uniform_int(5)) + rng.uniform(0.3, 0.7);
    uvv[i * 2 + 1] = static_cast<double>(rng.uniform_int(4)) + rng.uniform(0.3, 0.7);
  }
  auto uv = make_leaf(uvv);
  DenseArray coeff = random_array({4, 3}, rng);
  auto build = [&] { return sum(mul(bilinear_sample(fmap, uv), make_constant(coeff))); };
  auto r = check_gradients(build, {fmap, uv});
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("softmax_expectation one-hot, uniform and two-peak cases") {
  // 2x2x2 grid with simple coordinates
  DenseArray coords({8, 3});
  for (int64_t z = 0, q = 0; z < 2; ++z)
    for (int64_t y = 0; y < 2; ++y)
      for (int64_t x = 0; x < 2; ++x, ++q) {
        coords[q * 3 + 0] = static_cast<double>(x);
        coords[q * 3 + 1] = static_cast<double>(y);
        coords[q * 3 + 2] = static_cast<double>(z);
      }

  DenseArray vol({3, 2, 2, 2});
  vol.fill(0.0);
  vol[3] = 1e6;  // channel 0: one-hot at voxel 3 -> (1,1,0)
  // channel 1: uniform -> centroid (0.5,0.5,0.5)
  for (int64_t q = 0; q < 8; ++q) vol[2 * 8 + q] = -1e6;
  vol[2 * 8 + 0] = 3.0;  // channel 2: two equal peaks at voxels 0 and 7
  vol[2 * 8 + 7] = 3.0;

  auto y = softmax_expectation(make_leaf(vol, false), coords);
  CHECK(y->value[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(y->value[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(y->value[2] == doctest::Approx(0.0).epsilon(1e-9));
  for (int k = 0; k < 3; ++k) CHECK(y->value[3 + k] == doctest::Approx(0.5).epsilon(1e-12));
  for (int k = 0; k < 3; ++k) CHECK(y->value[6 + k] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("softmax_expectation properties: convex hull, shift invariance, gradient") {
  Rng rng(13);
  DenseArray coords = random_array({27, 3}, rng, -20.0, 20.0);
  DenseArray vol = random_array({4, 27}, rng, -2.0, 2.0);
  auto y = softmax_expectation(make_leaf(vol, false), coords);
  for (int64_t n = 0; n < 4; ++n)
    for (int64_t k = 0; k < 3; ++k) {
      double lo = coords[k], hi = coords[k];
      for (int64_t q = 0; q < 27; ++q) {
        lo = std::min(lo, coords[q * 3 + k]);
        hi = std::max(hi, coords[q * 3 + k]);
      }
      CHECK(y->value[n * 3 + k] >= lo);
      CHECK(y->value[n * 3 + k] <= hi);
    }

  DenseArray shifted = vol;
  for (int64_t q = 0; q < 27; ++q) shifted[2 * 27 + q] += 123.25;
  auto y2 = softmax_expectation(make_leaf(shifted, false), coords);
  for (int64_t i = 0; i < y->value.size(); ++i)
    CHECK(y2->value[i] == doctest::Approx(y->value[i]).epsilon(1e-12));

  auto v = make_leaf(vol);
  DenseArray coeff = random_array({4, 3}, rng);
  auto build = [&] { return sum(mul(softmax_expectation(v, coords), make_constant(coeff))); };
  auto r = check_gradients(build, {v});
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("fuse_mean_std: zero std for duplicated views, exact mean") {
  Rng rng(19);
  DenseArray f = random_array({5, 3}, rng);
  auto a = make_leaf(f, false);
  auto fused = fuse_mean_std({a, a, a});
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t c = 0; c < 3; ++c) {
      CHECK(fused->value[i * 6 + c] == doctest::Approx(f[i * 3 + c]).epsilon(1e-15));
      CHECK(fused->value[i * 6 + 3 + c] == 0.0);  // exactly zero
    }
  auto single = fuse_mean_std({a});
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t c = 0; c < 3; ++c) CHECK(single->value[i * 6 + 3 + c] == 0.0);
}

TEST_CASE("fuse_mean_std gradient matches finite differences") {
  Rng rng(23);
  auto a = make_leaf(random_array({3, 2}, rng));
  auto b = make_leaf(random_array({3, 2}, rng));
  auto c = make_leaf(random_array({3, 2}, rng));
  DenseArray coeff = random_array({3, 4}, rng);
  auto build = [&] { return sum(mul(fuse_mean_std({a, b, c}), make_constant(coeff))); };
  auto r = check_gradients(build, {a, b, c});
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("fuse_max takes elementwise maximum and is permutation invariant") {
  Rng rng(29);
  auto a = make_leaf(random_array({4, 3}, rng), false);
  auto b = make_leaf(random_array({4, 3}, rng), false);
  auto m1 = fuse_max({a, b});
  auto m2 = fuse_max({b, a});
  for (int64_t i = 0; i < m1->value.size(); ++i) {
    CHECK(m1->value[i] == std::max(a->value[i], b->value[i]));
    CHECK(m1->value[i] == m2->value[i]);
  }
}

TEST_CASE("backward: sum gives ones; identical-input mse gives zeros") {
  Rng rng(31);
  auto x = make_leaf(random_array({2, 3}, rng));
  backward(sum(x));
  for (int64_t i = 0; i < x->grad.size(); ++i) CHECK(x->grad[i] == 1.0);

  auto a = make_leaf(random_array({4, 3}, rng));
  auto b = make_leaf(DenseArray(a->value.shape(),
                                std::vector<double>(a->value.data(),
                                                    a->value.data() + a->value.size())));
  zero_grad(a);
  backward(mean_row_sq_dist(a, b));
  for (int64_t i = 0; i < a->grad.size(); ++i) CHECK(a->grad[i] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Rng rng(37);
  auto x = make_leaf(random_array({2, 2}, rng));
  CHECK_THROWS_AS(backward(x), std::invalid_argument);
}

TEST_CASE("backward: unreachable leaf keeps exactly zero gradient") {
  Rng rng(41);
  auto x = make_leaf(random_array({3}, rng));
  auto y = make_leaf(random_array({3}, rng));
  backward(sum(mul(x, x)));
  CHECK(y->grad.empty());  // never touched
}

TEST_CASE("backward accumulates until reset") {
  auto x = make_leaf(DenseArray({2}, {1.0, 2.0}));
  backward(sum(x));
  backward(sum(x));
  CHECK(x->grad[0] == 2.0);
  zero_grad(x);
  backward(sum(x));
  CHECK(x->grad[0] == 1.0);
}

TEST_CASE("composite conv2d -> leaky_relu -> sum gradient matches finite differences") {
  Rng rng(43);
  auto x = make_leaf(random_array({2, 6, 6}, rng));
  auto w = make_leaf(random_array({3, 2, 3, 3}, rng, -0.6, 0.6));
  auto b = make_leaf(random_array({3}, rng, -0.2, 0.2));
  auto build = [&] { return sum(leaky_relu(conv2d(x, w, b, 1, 1))); };
  auto r = check_gradients(build, {x, w, b});
  CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("structural ops: concat, select0, upsample, rotate, outer add") {
  Rng rng(47);
  auto a = make_leaf(random_array({2, 3, 3}, rng));
  auto b = make_leaf(random_array({1, 3, 3}, rng));
  DenseArray coeff = random_array({3 * 9}, rng);
  auto build = [&] {
    auto cat = concat(a, b, 0);
    return sum(mul(reshape(cat, {27}), make_constant(coeff)));
  };
  CHECK(check_gradients(build, {a, b}).max_rel_err <= 1e-6);

  auto u = upsample_nearest_2d(a);
  CHECK(u->value.shape() == std::vector<int64_t>{2, 6, 6});
  CHECK(u->value[0] == a->value[0]);
  CHECK(u->value[1] == a->value[0]);

  auto v3 = make_leaf(random_array({2, 2, 2, 2}, rng));
  auto u3 = upsample_nearest_3d(v3);
  CHECK(u3->value.shape() == std::vector<int64_t>{2, 4, 4, 4});

  auto s = select0(a, 1);
  CHECK(s->value.shape() == std::vector<int64_t>{3, 3});
  CHECK(s->value[0] == a->value[9]);

  // rotation by 90 degrees about z
  const double R[9] = {0, -1, 0, 1, 0, 0, 0, 0, 1};
  auto pts = make_leaf(DenseArray({1, 3}, {1.0, 0.0, 0.0}));
  auto rp = rotate_rows(pts, R);
  CHECK(rp->value[0] == doctest::Approx(0.0));
  CHECK(rp->value[1] == doctest::Approx(1.0));
  DenseArray cr = random_array({1, 3}, rng);
  auto build_r = [&] { return sum(mul(rotate_rows(pts, R), make_constant(cr))); };
  CHECK(check_gradients(build_r, {pts}).max_rel_err <= 1e-6);

  auto centers = make_leaf(random_array({2, 3}, rng));
  DenseArray offs = random_array({4, 3}, rng);
  auto out = add_rows_outer(centers, offs);
  CHECK(out->value.shape() == std::vector<int64_t>{8, 3});
  CHECK(out->value[0] == centers->value[0] + offs[0]);
  DenseArray co = random_array({8, 3}, rng);
  auto build_o = [&] { return sum(mul(add_rows_outer(centers, offs), make_constant(co))); };
  CHECK(check_gradients(build_o, {centers}).max_rel_err <= 1e-6);
}

TEST_CASE("adam: first-step magnitude, zero-grad no-op, quadratic convergence") {
  auto x = make_leaf(DenseArray({3}, {1.0, -2.0, 0.5}));
  AdamState st;
  st.cfg.lr = 0.01;
  x->ensure_grad();
  x->grad[0] = 0.5;
  x->grad[1] = -3.0;
  x->grad[2] = 1e-12;  // |g| comparable to eps: update must stay << lr
  std::vector<NodePtr> params{x};
  REQUIRE(adam_step(params, st));
  CHECK(st.step == 1);
  CHECK(1.0 - x->value[0] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(x->value[1] - (-2.0) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(std::fabs(0.5 - x->value[2]) < 0.01 * 0.01);

  // zero gradient: parameters unchanged, moments decay
  auto y = make_leaf(DenseArray({1}, {4.0}));
  AdamState st2;
  st2.cfg.lr = 0.1;
  y->ensure_grad();
  y->grad[0] = 1.0;
  std::vector<NodePtr> p2{y};
  adam_step(p2, st2);
  const double after_first = y->value[0];
  zero_grad(y);
  adam_step(p2, st2);
  // second step with zero grad still moves along the decayed first moment,
  // but a fully zero state must hold parameters still:
  AdamState st3;
  st3.cfg.lr = 0.1;
  auto z = make_leaf(DenseArray({1}, {4.0}));
  z->ensure_grad();
  std::vector<NodePtr> p3{z};
  adam_step(p3, st3);
  CHECK(z->value[0] == 4.0);
  CHECK(st3.m[0][0] == 0.0);
  CHECK(after_first < 4.0);

  // 100 steps minimizing (x-3)^2 from x=0 with lr 0.1
  auto q = make_leaf(DenseArray({1}, {0.0}));
  AdamState st4;
  st4.cfg.lr = 0.1;
  std::vector<NodePtr> p4{q};
  for (int it = 0; it < 100; ++it) {
    zero_grad(q);
    auto d = sub(q, make_constant(DenseArray({1}, {3.0})));
    backward(mul(d, d));
    adam_step(p4, st4);
  }
  CHECK(std::fabs(q->value[0] - 3.0) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients") {
  auto x = make_leaf(DenseArray({2}, {1.0, 2.0}));
  x->ensure_grad();
  x->grad[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  std::vector<NodePtr> params{x};
  reset_warning_count();
  CHECK_FALSE(adam_step(params, st));
  CHECK(st.step == 0);
  CHECK(x->value[0] == 1.0);
  CHECK(warning_count() == 1);
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
  Rng rng(53);
  DenseArray a = random_array({3, 4}, rng);
  DenseArray b = random_array({5}, rng, -100, 100);
  DenseArray s = DenseArray::scalar(42.5);
  const std::string path = "test_ckpt.bin";
  save_checkpoint(path, {{"net/w", &a}, {"net/b", &b}, {"adam/t", &s}});
  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded.at("net/w").same_shape(a));
  for (int64_t i = 0; i < a.size(); ++i) CHECK(loaded.at("net/w")[i] == a[i]);
  for (int64_t i = 0; i < b.size(); ++i) CHECK(loaded.at("net/b")[i] == b[i]);
  CHECK(loaded.at("adam/t")[0] == 42.5);
  CHECK(loaded.at("adam/t").rank() == 0);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects bad magic") {
  const std::string path = "test_bad.bin";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fwrite("NOPE", 1, 4, f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("operations are deterministic") {
  Rng rng(59);
  DenseArray xv = random_array({2, 8, 8}, rng);
  DenseArray wv = random_array({4, 2, 3, 3}, rng);
  DenseArray bv = random_array({4}, rng);
  auto run = [&] {
    auto y = conv2d(make_leaf(xv, false), make_leaf(wv, false), make_leaf(bv, false), 1, 1);
    return y->value;
  };
  DenseArray y1 = run(), y2 = run();
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
}
