#pragma once

#include <Eigen/Dense>

#include "tofu/mesh.hpp"

namespace tofu {

struct ClosestHit {
  double dist2 = 0.0;
  int triangle = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // closest point on the surface
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();   // barycentric w.r.t. the triangle
};

// Exact closest point on a single triangle (Ericson-style region walk).
ClosestHit closest_point_on_triangle(const Eigen::Vector3d& q, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b, const Eigen::Vector3d& c);

// Median-split BVH over triangles, leaf size <= 4. Equal-distance ties
// resolve to the lowest triangle index, matching the brute-force scan.
class TriangleBvh {
 public:
  explicit TriangleBvh(const Mesh& mesh);

  ClosestHit closest_point(const Eigen::Vector3d& q) const;

 private:
  struct BvhNode {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;   // children, or
    int begin = 0, end = 0;      // triangle range for leaves
    bool leaf() const { return left < 0; }
  };

  int build(int begin, int end, std::vector<Eigen::Vector3d>& centroids);
  void search(int node, const Eigen::Vector3d& q, ClosestHit& best) const;
  double box_dist2(const BvhNode& n, const Eigen::Vector3d& q) const;

  const Mesh* mesh_;
  std::vector<int> order_;  // triangle indices grouped by leaf
  std::vector<BvhNode> nodes_;
};

// Brute-force all-triangle scan; the testing oracle for the BVH.
ClosestHit closest_point_brute(const Mesh& mesh, const Eigen::Vector3d& q);

}  // namespace tofu
