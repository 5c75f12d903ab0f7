#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "tofu/camera.hpp"
#include "tofu/grid.hpp"
#include "tofu/ops.hpp"

using namespace tofu;
using test::check_gradients;

namespace {

Camera simple_camera() {
  Camera c;
  c.name = "test";
  c.width = 128;
  c.height = 128;
  c.K << 100, 0, 64, 0, 100, 64, 0, 0, 1;
  return c;
}

Camera random_camera(Rng& rng) {
  Camera c;
  c.name = "rand";
  c.width = 640;
  c.height = 480;
  const double fx = rng.uniform(200, 800), fy = rng.uniform(200, 800);
  const double cx = rng.uniform(100, 500), cy = rng.uniform(100, 380);
  c.K << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  c.R = random_rotation(rng.bits());
  c.t = Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(200, 800));
  c.validate();
  return c;
}

// independent route: full 3x4 homogeneous projection matrix
Eigen::Vector2d homogeneous_oracle(const Eigen::Vector3d& p, const Camera& c) {
  Eigen::Matrix<double, 3, 4> P;
  P.leftCols<3>() = c.K * c.R;
  P.rightCols<1>() = c.K * c.t;
  const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  const Eigen::Vector3d x = P * h;
  return {x.x() / x.z(), x.y() / x.z()};
}

}  // namespace

TEST_CASE("project: principal axis and simple offsets") {
  const Camera c = simple_camera();
  const Eigen::Vector2d uv = project({0, 0, 100}, c);
  CHECK(uv.x() == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(uv.y() == doctest::Approx(64.0).epsilon(1e-12));
  const Eigen::Vector2d uv2 = project({10, 0, 100}, c);
  CHECK(uv2.x() == doctest::Approx(74.0).epsilon(1e-12));
  CHECK(uv2.y() == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("project matches the homogeneous-matrix oracle") {
  Rng rng(101);
  for (int i = 0; i < 50; ++i) {
    const Camera c = random_camera(rng);
    Eigen::Vector3d p(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100));
    if (camera_depth(p, c) <= 1.0) continue;
    const Eigen::Vector2d a = project(p, c);
    const Eigen::Vector2d b = homogeneous_oracle(p, c);
    CHECK(std::abs(a.x() - b.x()) < 1e-9);
    CHECK(std::abs(a.y() - b.y()) < 1e-9);
  }
}

TEST_CASE("project flags points behind the camera; ray scale invariance") {
  const Camera c = simple_camera();
  CHECK_THROWS_AS(project({0, 0, -5}, c), std::domain_error);
  CHECK_THROWS_AS(project({0, 0, 0}, c), std::domain_error);
  // camera at origin: p and 2p land on the same pixel
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    Eigen::Vector3d p(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(50, 200));
    const Eigen::Vector2d a = project(p, c);
    const Eigen::Vector2d b = project(2.0 * p, c);
    CHECK(a.x() == doctest::Approx(b.x()).epsilon(1e-12));
    CHECK(a.y() == doctest::Approx(b.y()).epsilon(1e-12));
  }
}

TEST_CASE("project_points: clamped depth, events counted") {
  const Camera c = simple_camera();
  auto pts = make_leaf(DenseArray({2, 3}, {0, 0, 100, 0, 0, -40}));
  int64_t clamps = 0;
  auto uv = project_points(pts, c, &clamps);
  CHECK(clamps == 1);
  CHECK(uv->value[0] == doctest::Approx(64.0));
  // clamped point projects with depth 1 mm and zero depth-gradient
  backward(sum(uv));
  CHECK(pts->grad[5] == 0.0);
}

TEST_CASE("project_points gradient matches finite differences") {
  Rng rng(11);
  const Camera c = simple_camera();
  auto pts = make_leaf(DenseArray({3, 3}, {5, -3, 120, -20, 14, 90, 2, 2, 75}));
  DenseArray coeff = test::random_array({3, 2}, rng);
  auto build = [&] { return sum(mul(project_points(pts, c, nullptr), make_constant(coeff))); };
  CHECK(check_gradients(build, {pts}).max_rel_err <= 1e-6);
}

TEST_CASE("grid_points: corners, centroid, nearest-neighbor spacing") {
  Grid3D g;
  g.center = Eigen::Vector3d(0, 0, 0);
  g.spacing = 10.0;
  g.resolution = 2;
  DenseArray pts = grid_points(g);
  REQUIRE(pts.dim(0) == 8);
  for (int64_t q = 0; q < 8; ++q)
    for (int k = 0; k < 3; ++k) CHECK(std::abs(std::abs(pts[q * 3 + k]) - 5.0) < 1e-12);

  // rotated grid: centroid and nearest-neighbor distance
  Grid3D g2;
  g2.center = Eigen::Vector3d(3.5, -2.25, 11.0);
  g2.spacing = 7.0;
  g2.resolution = 4;
  g2.orientation = random_rotation(42);
  DenseArray p2 = grid_points(g2);
  REQUIRE(p2.dim(0) == 64);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int64_t q = 0; q < 64; ++q) mean += Eigen::Vector3d(p2[q * 3], p2[q * 3 + 1], p2[q * 3 + 2]);
  mean /= 64.0;
  CHECK((mean - g2.center).norm() < 1e-12);

  // brute-force pairwise nearest neighbor = spacing
  double best = 1e300;
  for (int64_t a = 0; a < 64; ++a)
    for (int64_t b = a + 1; b < 64; ++b) {
      const Eigen::Vector3d da(p2[a * 3] - p2[b * 3], p2[a * 3 + 1] - p2[b * 3 + 1],
                               p2[a * 3 + 2] - p2[b * 3 + 2]);
      best = std::min(best, da.norm());
    }
  CHECK(std::abs(best - 7.0) < 1e-12);

  // half-diagonal bound
  const double bound = std::sqrt(3.0) * 7.0 * 3.0 / 2.0 + 1e-12;
  for (int64_t q = 0; q < 64; ++q) {
    const Eigen::Vector3d d(p2[q * 3] - g2.center.x(), p2[q * 3 + 1] - g2.center.y(),
                            p2[q * 3 + 2] - g2.center.z());
    CHECK(d.norm() <= bound);
  }
}

TEST_CASE("random_rotation: orthonormal, deterministic, isotropic") {
  for (uint64_t seed : {1ull, 7ull, 12345ull}) {
    const Eigen::Matrix3d R = random_rotation(seed);
    CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-12);
    const Eigen::Matrix3d R2 = random_rotation(seed);
    CHECK((R - R2).cwiseAbs().maxCoeff() == 0.0);
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (uint64_t s = 0; s < 10000; ++s) mean += random_rotation(s) * Eigen::Vector3d::UnitZ();
  mean /= 10000.0;
  CHECK(mean.norm() < 0.05);
}

TEST_CASE("composition: project(grid_points) jacobian w.r.t. grid center") {
  Rng rng(13);
  const Camera c = simple_camera();
  Grid3D g;
  g.spacing = 5.0;
  g.resolution = 2;
  DenseArray offsets = grid_offsets(g.spacing, g.resolution);
  auto center = make_leaf(DenseArray({1, 3}, {4.0, -6.0, 140.0}));
  DenseArray coeff = test::random_array({8, 2}, rng);
  auto build = [&] {
    auto pts = add_rows_outer(center, offsets);
    return sum(mul(project_points(pts, c, nullptr), make_constant(coeff)));
  };
  CHECK(check_gradients(build, {center}).max_rel_err <= 1e-6);
}

TEST_CASE("camera rig JSON round-trip") {
  Rng rng(17);
  std::vector<Camera> rig;
  for (int i = 0; i < 3; ++i) rig.push_back(random_camera(rng));
  const std::string path = "test_rig.json";
  save_rig(path, rig);
  const auto loaded = load_rig(path);
  REQUIRE(loaded.size() == rig.size());
  for (size_t i = 0; i < rig.size(); ++i) {
    CHECK(loaded[i].name == rig[i].name);
    CHECK((loaded[i].K - rig[i].K).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((loaded[i].R - rig[i].R).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((loaded[i].t - rig[i].t).cwiseAbs().maxCoeff() < 1e-12);
  }
  std::filesystem::remove(path);
}

TEST_CASE("camera validation rejects bad rotations and intrinsics") {
  Camera c = simple_camera();
  c.validate();
  Camera bad = c;
  bad.R(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Camera badf = c;
  badf.K(0, 0) = -5.0;
  CHECK_THROWS_AS(badf.validate(), std::invalid_argument);
  Camera badp = c;
  badp.K(0, 2) = 500.0;
  CHECK_THROWS_AS(badp.validate(), std::invalid_argument);
}
