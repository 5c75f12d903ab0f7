#include "tofu/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tofu/log.hpp"

namespace tofu {

void Mesh::validate(bool require_referenced) const {
  const int n = static_cast<int>(vertices.size());
  std::vector<uint8_t> referenced(vertices.size(), 0);
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& fc = faces[f];
    for (int k = 0; k < 3; ++k) {
      if (fc[k] < 0 || fc[k] >= n)
        throw std::invalid_argument("Mesh: face " + std::to_string(f) +
                                    " references vertex " + std::to_string(fc[k]) +
                                    " out of range");
      referenced[static_cast<size_t>(fc[k])] = 1;
    }
    if (fc[0] == fc[1] || fc[1] == fc[2] || fc[0] == fc[2])
      throw std::invalid_argument("Mesh: face " + std::to_string(f) + " is degenerate");
  }
  if (require_referenced)
    for (size_t v = 0; v < referenced.size(); ++v)
      if (!referenced[v])
        throw std::invalid_argument("Mesh: vertex " + std::to_string(v) +
                                    " is not referenced by any face");
}

Eigen::AlignedBox3d Mesh::bounding_box() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

double Mesh::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  return bounding_box().diagonal().norm();
}

std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh) {
  std::vector<Eigen::Vector3d> acc(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d& a = mesh.vertices[static_cast<size_t>(f[0])];
    const Eigen::Vector3d& b = mesh.vertices[static_cast<size_t>(f[1])];
    const Eigen::Vector3d& c = mesh.vertices[static_cast<size_t>(f[2])];
    const Eigen::Vector3d w = (b - a).cross(c - a);  // |w| = 2 * area
    for (int k = 0; k < 3; ++k) acc[static_cast<size_t>(f[k])] += w;
  }
  for (size_t i = 0; i < acc.size(); ++i) {
    const double n = acc[i].norm();
    if (n < 1e-20) {
      log_warn("vertex_normals: zero-area star at vertex %zu, using +z", i);
      acc[i] = Eigen::Vector3d(0, 0, 1);
    } else {
      acc[i] /= n;
    }
  }
  return acc;
}

NodePtr vertex_normals_node(const NodePtr& vertices,
                            const std::vector<std::array<int, 3>>& faces) {
  const auto& s = vertices->value.shape();
  if (s.size() != 2 || s[1] != 3)
    throw std::invalid_argument("vertex_normals_node: expects [N,3]");
  const int64_t N = s[0];

  auto accumulate = [&faces, N](const DenseArray& V) {
    std::vector<Eigen::Vector3d> acc(static_cast<size_t>(N), Eigen::Vector3d::Zero());
    for (const auto& f : faces) {
      const Eigen::Vector3d a(V[f[0] * 3 + 0], V[f[0] * 3 + 1], V[f[0] * 3 + 2]);
      const Eigen::Vector3d b(V[f[1] * 3 + 0], V[f[1] * 3 + 1], V[f[1] * 3 + 2]);
      const Eigen::Vector3d c(V[f[2] * 3 + 0], V[f[2] * 3 + 1], V[f[2] * 3 + 2]);
      const Eigen::Vector3d w = (b - a).cross(c - a);
      for (int k = 0; k < 3; ++k) acc[static_cast<size_t>(f[k])] += w;
    }
    return acc;
  };

  const auto acc = accumulate(vertices->value);
  DenseArray out({N, 3});
  std::vector<uint8_t> degenerate(static_cast<size_t>(N), 0);
  for (int64_t i = 0; i < N; ++i) {
    const double n = acc[static_cast<size_t>(i)].norm();
    if (n < 1e-20) {
      log_warn("vertex_normals: zero-area star at vertex %lld, using +z",
               static_cast<long long>(i));
      degenerate[static_cast<size_t>(i)] = 1;
      out[i * 3 + 2] = 1.0;
      continue;
    }
    const Eigen::Vector3d nv = acc[static_cast<size_t>(i)] / n;
    out[i * 3 + 0] = nv.x();
    out[i * 3 + 1] = nv.y();
    out[i * 3 + 2] = nv.z();
  }

  auto back = [faces, N, accumulate, degenerate = std::move(degenerate)](Node& self) {
    const auto& V = self.parents[0]->value;
    auto& g = self.parents[0]->ensure_grad();
    const auto acc = accumulate(V);
    // d(normalize(u))/du = (I - n n^T) / |u|, then distribute through the
    // cross products of each incident face.
    std::vector<Eigen::Vector3d> gacc(static_cast<size_t>(N), Eigen::Vector3d::Zero());
    for (int64_t i = 0; i < N; ++i) {
      if (degenerate[static_cast<size_t>(i)]) continue;
      const Eigen::Vector3d u = acc[static_cast<size_t>(i)];
      const double n = u.norm();
      const Eigen::Vector3d nh = u / n;
      const Eigen::Vector3d go(self.grad[i * 3 + 0], self.grad[i * 3 + 1],
                               self.grad[i * 3 + 2]);
      gacc[static_cast<size_t>(i)] = (go - nh * nh.dot(go)) / n;
    }
    for (const auto& f : faces) {
      const Eigen::Vector3d a(V[f[0] * 3 + 0], V[f[0] * 3 + 1], V[f[0] * 3 + 2]);
      const Eigen::Vector3d b(V[f[1] * 3 + 0], V[f[1] * 3 + 1], V[f[1] * 3 + 2]);
      const Eigen::Vector3d c(V[f[2] * 3 + 0], V[f[2] * 3 + 1], V[f[2] * 3 + 2]);
      const Eigen::Vector3d e1 = b - a, e2 = c - a;
      Eigen::Vector3d gw = Eigen::Vector3d::Zero();
      for (int k = 0; k < 3; ++k) gw += gacc[static_cast<size_t>(f[k])];
      const Eigen::Vector3d ge1 = e2.cross(gw);
      const Eigen::Vector3d ge2 = gw.cross(e1);
      const Eigen::Vector3d ga = -ge1 - ge2;
      for (int k = 0; k < 3; ++k) {
        g[f[0] * 3 + k] += ga[k];
        g[f[1] * 3 + k] += ge1[k];
        g[f[2] * 3 + k] += ge2[k];
      }
    }
  };
  return make_op(std::move(out), "vertex_normals", {vertices}, std::move(back));
}

Mesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_obj: cannot open " + path);
  Mesh mesh;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw std::runtime_error("load_obj: malformed vertex at " + path + ":" +
                                 std::to_string(lineno));
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "f 1/2/3": vertex index before the first '/'
        const size_t slash = tok.find('/');
        const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        idx.push_back(std::stoi(head));
      }
      if (idx.size() != 3)
        throw std::runtime_error("load_obj: non-triangular face (" +
                                 std::to_string(idx.size()) + " vertices) at " + path + ":" +
                                 std::to_string(lineno));
      mesh.faces.push_back({idx[0] - 1, idx[1] - 1, idx[2] - 1});
    }
    // other records skipped
  }
  mesh.validate();
  return mesh;
}

void save_obj(const Mesh& mesh, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_obj: cannot open " + path + " for writing");
  for (const auto& v : mesh.vertices)
    std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const auto& fc : mesh.faces)
    std::fprintf(f, "f %d %d %d\n", fc[0] + 1, fc[1] + 1, fc[2] + 1);
  std::fclose(f);
}

DenseArray vertices_to_array(const std::vector<Eigen::Vector3d>& v) {
  DenseArray a({static_cast<int64_t>(v.size()), 3});
  for (size_t i = 0; i < v.size(); ++i)
    for (int k = 0; k < 3; ++k) a[static_cast<int64_t>(i) * 3 + k] = v[i][k];
  return a;
}

std::vector<Eigen::Vector3d> array_to_vertices(const DenseArray& a) {
  if (a.rank() != 2 || a.dim(1) != 3)
    throw std::invalid_argument("array_to_vertices: expects [N,3]");
  std::vector<Eigen::Vector3d> v(static_cast<size_t>(a.dim(0)));
  for (int64_t i = 0; i < a.dim(0); ++i)
    v[static_cast<size_t>(i)] = Eigen::Vector3d(a[i * 3], a[i * 3 + 1], a[i * 3 + 2]);
  return v;
}

}  // namespace tofu
