#pragma once

#include <array>
#include <string>
#include <vector>

#include "tofu/mesh.hpp"

namespace tofu {

// Upsampling record from level k to level k+1. Q holds row-stochastic
// barycentric weights (<= 3 nonzeros per row); D shares Q's sparsity pattern
// and carries the scalar displacement along the interpolated coarse normal.
struct HierarchyLevel {
  Mesh coarse;  // template T_k
  std::vector<std::array<int, 3>> cols;      // coarse vertex ids per fine vertex
  std::vector<std::array<double, 3>> q;      // barycentric weights
  std::vector<std::array<double, 3>> d;      // displacement coefficients
  int64_t coarse_count = 0;
  int64_t fine_count = 0;

  void validate() const;
};

// Template meshes T_0..T_L plus the L upsampling records between them.
struct MeshHierarchy {
  std::vector<Mesh> levels;
  std::vector<HierarchyLevel> ups;

  int depth() const { return static_cast<int>(ups.size()); }
  void validate() const;
  std::vector<int64_t> vertex_counts() const;
};

// Barycentric embedding of every fine vertex in the coarse surface, with the
// residual projected onto the interpolated coarse normal. Closest-point ties
// resolve to the lowest triangle index; weights are clamped to [0,1] and
// renormalized.
HierarchyLevel embed(const Mesh& fine, const Mesh& coarse);

// V_{k+1} = Q V_k + D N(V_k); normals are recomputed from (V_k, T_k).
std::vector<Eigen::Vector3d> upsample(const std::vector<Eigen::Vector3d>& coarse_vertices,
                                      const HierarchyLevel& level);
NodePtr upsample_node(const NodePtr& coarse_vertices, const HierarchyLevel& level);

// Successive decimation of the full-resolution template to the given coarse
// vertex counts (ascending), then embedding of each adjacent pair.
MeshHierarchy build_hierarchy(const Mesh& full, const std::vector<int>& coarse_counts);

// Directory layout: index.json {"levels": [...], "Q": [...], "D": [...]},
// OBJ per level, triplet CSV (row,col,value) per matrix.
void save_hierarchy(const std::string& dir, const MeshHierarchy& h);
MeshHierarchy load_hierarchy(const std::string& dir);

}  // namespace tofu
