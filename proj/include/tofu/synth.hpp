#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tofu/mesh.hpp"

namespace tofu {

// Icosphere with `subdivisions` midpoint splits, projected to `radius`.
// Vertex counts: 12, 42, 162, 642, 2562 for 0..4 subdivisions.
Mesh make_icosphere(int subdivisions, double radius);

struct TemplateResult {
  Mesh mesh;
  std::vector<int> landmarks;  // 16 extremal vertices along fixed directions
};

// Deterministic asymmetric blob: an icosphere warped by a seeded smooth
// radial field. Subdivisions in [1,4].
TemplateResult make_template(uint64_t seed, int subdivisions);

// Smooth displacement field over the template family: a rigid motion composed
// with a blend of low-frequency trigonometric displacement bumps. The same
// field evaluated at any level's template vertices yields that level's ground
// truth.
struct DeformationField {
  Eigen::Matrix3d rigid_rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d rigid_translation = Eigen::Vector3d::Zero();
  std::vector<double> coefficients;

  struct Basis {
    Eigen::Vector3d direction;   // unit displacement direction
    Eigen::Vector3d wave;        // spatial frequency (rad/mm)
    double phase = 0.0;
    double magnitude_mm = 0.0;
  };
  std::vector<Basis> basis;

  Eigen::Vector3d displacement(const Eigen::Vector3d& p) const;  // non-rigid part
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
};

struct DeformationParams {
  int basis_count = 6;
  double magnitude_scale = 0.05;   // basis magnitude, fraction of bbox diagonal
  double max_displacement = 0.15;  // cap, fraction of bbox diagonal
  double rigid_rotation_deg = 10.0;
  double rigid_translation_mm = 10.0;
};

// Seeded field whose applied non-rigid displacement over the reference mesh
// is capped at params.max_displacement * bbox diagonal.
DeformationField sample_deformation(uint64_t seed, const Mesh& reference,
                                    const DeformationParams& params = {});

Mesh apply_deformation(const DeformationField& field, const Mesh& mesh);

}  // namespace tofu
