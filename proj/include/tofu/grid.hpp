#pragma once

#include <Eigen/Dense>

#include "tofu/dense_array.hpp"

namespace tofu {

// Oriented regular lattice of 3D sample points (cubic resolution).
struct Grid3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // mm, world frame
  double spacing = 1.0;                              // mm
  int resolution = 2;                                // per axis
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();

  void validate() const;
};

// World-space sample points [r^3, 3]: center + orientation * (spacing *
// integer offsets symmetric about zero). Flattening is x-fastest, then y,
// then z; the centroid equals the center.
DenseArray grid_points(const Grid3D& grid);

// Centered axis-aligned offsets [r^3, 3] in the grid's own frame (no center,
// no orientation); same flattening order as grid_points.
DenseArray grid_offsets(double spacing, int resolution);

// Uniformly distributed rotation from a quaternion drawn on the unit
// 3-sphere; deterministic per seed.
Eigen::Matrix3d random_rotation(uint64_t seed);

}  // namespace tofu
