#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "tofu/bvh.hpp"
#include "tofu/decimate.hpp"
#include "tofu/hierarchy.hpp"
#include "tofu/log.hpp"
#include "tofu/mesh.hpp"
#include "tofu/ops.hpp"
#include "tofu/synth.hpp"

using namespace tofu;
using test::check_gradients;

TEST_CASE("vertex_normals: icosphere normals are radial") {
  const Mesh m = make_icosphere(2, 1.0);
  const auto n = vertex_normals(m);
  for (size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((n[i] - m.vertices[i].normalized()).norm() < 1e-2);
}

TEST_CASE("vertex_normals: planar fan gives +z; unit length") {
  Mesh m;
  m.vertices.push_back({0, 0, 0});
  const int spokes = 6;
  for (int i = 0; i < spokes; ++i) {
    const double a = 2.0 * M_PI * i / spokes;
    m.vertices.push_back({std::cos(a), std::sin(a), 0.0});
  }
  for (int i = 0; i < spokes; ++i) m.faces.push_back({0, 1 + i, 1 + (i + 1) % spokes});
  const auto n = vertex_normals(m);
  for (const auto& v : n) {
    CHECK((v - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("vertex_normals: zero-area star falls back to +z with a warning") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};  // collinear
  m.faces = {{0, 1, 2}};
  reset_warning_count();
  const auto n = vertex_normals(m);
  CHECK(warning_count() == 3);
  CHECK(n[0] == Eigen::Vector3d(0, 0, 1));
}

TEST_CASE("vertex_normals gradient matches finite differences") {
  Rng rng(3);
  const Mesh m = make_icosphere(0, 1.0);
  auto V = make_leaf(vertices_to_array(m.vertices));
  DenseArray coeff = test::random_array({(int64_t)m.vertices.size(), 3}, rng);
  auto build = [&] {
    return sum(mul(vertex_normals_node(V, m.faces), make_constant(coeff)));
  };
  CHECK(check_gradients(build, {V}).max_rel_err <= 1e-5);
}

TEST_CASE("obj round-trip preserves vertices and faces") {
  Rng rng(5);
  Mesh m = make_icosphere(1, 57.25);
  for (auto& v : m.vertices) v += Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), 0);
  const std::string path = "test_mesh.obj";
  save_obj(m, path);
  const Mesh r = load_obj(path);
  REQUIRE(r.vertex_count() == m.vertex_count());
  REQUIRE(r.faces == m.faces);
  for (size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((r.vertices[i] - m.vertices[i]).norm() < 1e-9);
  std::filesystem::remove(path);
}

TEST_CASE("obj loader: quad faces rejected naming the line, slashes parsed, unknown skipped") {
  const std::string path = "test_quad.obj";
  {
    std::ofstream f(path);
    f << "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  }
  CHECK_THROWS_WITH_AS(load_obj(path), doctest::Contains(":5"), std::runtime_error);
  {
    std::ofstream f(path);
    f << "mtllib foo.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n"
         "f 1/1/1 2/1/1 3/1/1\n";
  }
  const Mesh m = load_obj(path);
  CHECK(m.vertex_count() == 3);
  REQUIRE(m.face_count() == 1);
  CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
  std::filesystem::remove(path);
}

TEST_CASE("closest point: vertex hit and height above triangle interior") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {4, 0, 0}, {0, 4, 0}};
  m.faces = {{0, 1, 2}};
  const auto hit = closest_point_brute(m, {0, 0, 0});
  CHECK(hit.dist2 == 0.0);
  const auto h2 = closest_point_brute(m, {1, 1, 2.5});
  CHECK(std::sqrt(h2.dist2) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK((h2.point - Eigen::Vector3d(1, 1, 0)).norm() < 1e-12);
}

TEST_CASE("BVH closest point equals brute force on 100 random queries") {
  Rng rng(7);
  const TemplateResult t = make_template(3, 3);
  const TriangleBvh bvh(t.mesh);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d q(rng.uniform(-150, 150), rng.uniform(-150, 150),
                            rng.uniform(-150, 150));
    const auto a = bvh.closest_point(q);
    const auto b = closest_point_brute(t.mesh, q);
    CHECK(std::abs(std::sqrt(a.dist2) - std::sqrt(b.dist2)) < 1e-9);
    CHECK(a.triangle == b.triangle);
  }
}

TEST_CASE("decimate: icosphere 642 -> 162 exact count, zero surface deviation") {
  const Mesh m = make_icosphere(3, 100.0);
  const Mesh d = decimate(m, 162);
  CHECK(d.vertex_count() == 162);
  // projection step puts every output vertex on the input surface
  for (const auto& v : d.vertices)
    CHECK(std::sqrt(closest_point_brute(m, v).dist2) < 0.02 * m.bbox_diagonal());
  d.validate(true);
  // closed surface preserved: V - E + F = 2 with E = 3F/2
  CHECK(d.face_count() == 2 * (d.vertex_count() - 2));
}

TEST_CASE("decimate: target N-1 performs one vertex merge") {
  const Mesh m = make_icosphere(1, 10.0);
  const Mesh d = decimate(m, static_cast<int>(m.vertex_count()) - 1);
  CHECK(d.vertex_count() == m.vertex_count() - 1);
  CHECK(d.face_count() == m.face_count() - 2);
}

TEST_CASE("decimate: targets below a tetrahedron are rejected") {
  const Mesh m = make_icosphere(0, 1.0);
  CHECK_THROWS_AS(decimate(m, 3), std::invalid_argument);
  CHECK_THROWS_AS(decimate(m, static_cast<int>(m.vertex_count())), std::invalid_argument);
}

TEST_CASE("embed: fine vertex coincident with a coarse vertex") {
  const Mesh coarse = make_icosphere(1, 50.0);
  Mesh fine;
  fine.vertices = {coarse.vertices[7], coarse.vertices[7]};
  fine.vertices[1] += Eigen::Vector3d(0, 0, 0);
  fine.faces = {{0, 1, 0}};  // unused by embed; bypass validation via direct call
  fine.faces.clear();
  const HierarchyLevel lvl = embed(fine, coarse);
  double w7 = 0.0, others = 0.0, dsum = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (lvl.cols[0][(size_t)k] == 7)
      w7 += lvl.q[0][(size_t)k];
    else
      others += lvl.q[0][(size_t)k];
    dsum += std::abs(lvl.d[0][(size_t)k]);
  }
  CHECK(w7 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(others == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dsum < 1e-9);
}

TEST_CASE("embed + upsample reconstruct a planar offset point exactly") {
  // single flat triangle; all coarse normals equal the plane normal
  Mesh coarse;
  coarse.vertices = {{0, 0, 0}, {6, 0, 0}, {0, 6, 0}};
  coarse.faces = {{0, 1, 2}};
  const Eigen::Vector3d centroid(2, 2, 0);
  const double h = 1.25;
  Mesh fine;
  fine.vertices = {centroid + Eigen::Vector3d(0, 0, h)};
  const HierarchyLevel lvl = embed(fine, coarse);
  for (int k = 0; k < 3; ++k)
    CHECK(lvl.q[0][(size_t)k] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const auto up = upsample(coarse.vertices, lvl);
  CHECK((up[0] - fine.vertices[0]).norm() < 1e-12);
}

TEST_CASE("embed: residual after reconstruction is orthogonal to the interpolated normal") {
  const TemplateResult t = make_template(11, 2);
  const Mesh coarse = decimate(t.mesh, 42);
  const HierarchyLevel lvl = embed(t.mesh, coarse);
  const auto normals = vertex_normals(coarse);
  const auto up = upsample(coarse.vertices, lvl);
  for (size_t j = 0; j < t.mesh.vertices.size(); ++j) {
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k)
      m += lvl.q[j][(size_t)k] * normals[(size_t)lvl.cols[j][(size_t)k]];
    const Eigen::Vector3d residual = t.mesh.vertices[j] - up[j];
    CHECK(std::abs(residual.dot(m.normalized())) < 1e-9);
  }
}

TEST_CASE("upsample: D = 0 stays on the coarse surface; shape mismatch rejected") {
  const TemplateResult t = make_template(13, 2);
  const Mesh coarse = decimate(t.mesh, 42);
  HierarchyLevel lvl = embed(t.mesh, coarse);
  for (auto& row : lvl.d) row = {0.0, 0.0, 0.0};
  const auto up = upsample(coarse.vertices, lvl);
  for (const auto& p : up)
    CHECK(std::sqrt(closest_point_brute(coarse, p).dist2) < 1e-9);

  std::vector<Eigen::Vector3d> wrong(coarse.vertices.begin(), coarse.vertices.end() - 1);
  CHECK_THROWS_AS(upsample(wrong, lvl), std::invalid_argument);
}

TEST_CASE("upsample equivariance: rotation and translation") {
  const TemplateResult t = make_template(17, 2);
  const Mesh coarse = decimate(t.mesh, 40);
  const HierarchyLevel lvl = embed(t.mesh, coarse);
  const auto base = upsample(coarse.vertices, lvl);

  const Eigen::Matrix3d R = random_rotation_matrix();
  std::vector<Eigen::Vector3d> rotated;
  for (const auto& v : coarse.vertices) rotated.push_back(R * v);
  const auto up_rot = upsample(rotated, lvl);
  for (size_t j = 0; j < base.size(); ++j)
    CHECK((up_rot[j] - R * base[j]).norm() < 1e-9);

  const Eigen::Vector3d tr(12.5, -3.75, 8.0);
  std::vector<Eigen::Vector3d> shifted;
  for (const auto& v : coarse.vertices) shifted.push_back(v + tr);
  const auto up_shift = upsample(shifted, lvl);
  for (size_t j = 0; j < base.size(); ++j)
    CHECK((up_shift[j] - (base[j] + tr)).norm() < 1e-9);
}

TEST_CASE("upsample_node gradient matches finite differences") {
  Rng rng(23);
  const Mesh coarse = make_icosphere(0, 10.0);
  Mesh fine = make_icosphere(1, 10.0);
  const HierarchyLevel lvl = embed(fine, coarse);
  auto V = make_leaf(vertices_to_array(coarse.vertices));
  DenseArray coeff = test::random_array({lvl.fine_count, 3}, rng);
  auto build = [&] { return sum(mul(upsample_node(V, lvl), make_constant(coeff))); };
  CHECK(check_gradients(build, {V}, 1e-5, 1e-5).max_rel_err <= 1e-4);
}

TEST_CASE("hierarchy: build, template reconstruction, save/load round-trip") {
  const TemplateResult t = make_template(1, 3);
  const MeshHierarchy h = build_hierarchy(t.mesh, {42, 162});
  REQUIRE(h.levels.size() == 3);
  CHECK(h.levels[0].vertex_count() == 42);
  CHECK(h.levels[1].vertex_count() == 162);
  CHECK(h.levels[2].vertex_count() == 642);
  h.validate();

  // template reconstruction: residual normal component at every level
  const double diag = t.mesh.bbox_diagonal();
  for (int k = 0; k < h.depth(); ++k) {
    const auto up = upsample(h.levels[(size_t)k].vertices, h.ups[(size_t)k]);
    const auto normals = vertex_normals(h.levels[(size_t)k]);
    for (int64_t j = 0; j < h.ups[(size_t)k].fine_count; ++j) {
      Eigen::Vector3d m = Eigen::Vector3d::Zero();
      for (int kk = 0; kk < 3; ++kk)
        m += h.ups[(size_t)k].q[(size_t)j][(size_t)kk] *
             normals[(size_t)h.ups[(size_t)k].cols[(size_t)j][(size_t)kk]];
      const Eigen::Vector3d res =
          h.levels[(size_t)k + 1].vertices[(size_t)j] - up[(size_t)j];
      CHECK(std::abs(res.dot(m.normalized())) <= 1e-9 * diag);
    }
  }

  const std::string dir = "test_hier";
  save_hierarchy(dir, h);
  const MeshHierarchy r = load_hierarchy(dir);
  r.validate();
  REQUIRE(r.vertex_counts() == h.vertex_counts());
  for (size_t k = 0; k < h.ups.size(); ++k) {
    const auto a = upsample(h.levels[k].vertices, h.ups[k]);
    const auto b = upsample(r.levels[k].vertices, r.ups[k]);
    for (size_t j = 0; j < a.size(); ++j) CHECK((a[j] - b[j]).norm() < 1e-9);
  }
  std::filesystem::remove_all(dir);
}
