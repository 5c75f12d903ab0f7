#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "tofu/graph.hpp"

namespace tofu {

// Triangle mesh; counter-clockwise winding gives the outward normal.
struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;

  int64_t vertex_count() const { return static_cast<int64_t>(vertices.size()); }
  int64_t face_count() const { return static_cast<int64_t>(faces.size()); }

  // Checks index bounds and rejects degenerate faces. When
  // `require_referenced` every vertex must belong to at least one face
  // (template-mesh contract).
  void validate(bool require_referenced = false) const;

  Eigen::AlignedBox3d bounding_box() const;
  double bbox_diagonal() const;
};

// Area-weighted vertex normals, normalized. A vertex whose incident faces
// all have zero area gets +z and a recorded warning.
std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh);

// Differentiable variant over vertex positions [N,3] with fixed faces.
NodePtr vertex_normals_node(const NodePtr& vertices,
                            const std::vector<std::array<int, 3>>& faces);

// Wavefront OBJ with "v" and triangular "f" records (1-based indices;
// texture/normal indices after '/' are ignored). Non-triangular faces are
// rejected naming the offending line. Unknown records are skipped.
Mesh load_obj(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

DenseArray vertices_to_array(const std::vector<Eigen::Vector3d>& v);
std::vector<Eigen::Vector3d> array_to_vertices(const DenseArray& a);

}  // namespace tofu
