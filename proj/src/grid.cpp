#include "tofu/grid.hpp"

#include <stdexcept>

#include "tofu/rng.hpp"

namespace tofu {

void Grid3D::validate() const {
  if (resolution < 2) throw std::invalid_argument("Grid3D: resolution must be >= 2");
  if (spacing <= 0.0) throw std::invalid_argument("Grid3D: spacing must be positive");
  if ((orientation.transpose() * orientation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff() > 1e-9)
    throw std::invalid_argument("Grid3D: orientation is not orthonormal");
}

DenseArray grid_offsets(double spacing, int resolution) {
  const int r = resolution;
  const double half = 0.5 * static_cast<double>(r - 1);
  DenseArray out({static_cast<int64_t>(r) * r * r, 3});
  int64_t q = 0;
  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x, ++q) {
        out[q * 3 + 0] = spacing * (static_cast<double>(x) - half);
        out[q * 3 + 1] = spacing * (static_cast<double>(y) - half);
        out[q * 3 + 2] = spacing * (static_cast<double>(z) - half);
      }
  return out;
}

DenseArray grid_points(const Grid3D& grid) {
  grid.validate();
  DenseArray offs = grid_offsets(grid.spacing, grid.resolution);
  DenseArray out({offs.dim(0), 3});
  for (int64_t q = 0; q < offs.dim(0); ++q) {
    const Eigen::Vector3d o(offs[q * 3 + 0], offs[q * 3 + 1], offs[q * 3 + 2]);
    const Eigen::Vector3d p = grid.center + grid.orientation * o;
    out[q * 3 + 0] = p.x();
    out[q * 3 + 1] = p.y();
    out[q * 3 + 2] = p.z();
  }
  return out;
}

Eigen::Matrix3d random_rotation(uint64_t seed) {
  Rng rng(seed);
  // four gaussians normalized: uniform on the unit 3-sphere
  double q[4];
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : q) {
      v = rng.normal();
      n2 += v * v;
    }
  } while (n2 < 1e-12);
  const double inv = 1.0 / std::sqrt(n2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

}  // namespace tofu
