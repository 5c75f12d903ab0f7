#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "tofu/camera.hpp"
#include "tofu/dense_array.hpp"
#include "tofu/mesh.hpp"

namespace tofu {

// RGB in [0,1] as a function of a 3D material point (millimeters).
using TextureFn = std::function<Eigen::Vector3d(const Eigen::Vector3d&)>;

// Seeded band-limited procedural texture: sums of sinusoids at wavelengths
// around `feature_scale_mm`, anchored to undeformed template positions so the
// same material point keeps its color across views and deformations.
TextureFn make_procedural_texture(uint64_t seed, double feature_scale_mm);

// Z-buffered perspective-correct rasterization of one view. `attributes`
// carries the per-vertex material coordinates fed to the texture (template
// positions in the synthetic pipeline). Shading is a mild diffuse term from
// one fixed directional light (color stays within 0.08 of the raw texture);
// background pixels are exactly 0. Throws if any vertex falls behind the
// camera.
DenseArray render_view(const Mesh& mesh, const std::vector<Eigen::Vector3d>& attributes,
                       const Camera& camera, const TextureFn& texture,
                       const Eigen::Vector3d& light_dir = Eigen::Vector3d(0.3, -0.5, -0.8));

// All views of a rig; errors list every offending view at once.
std::vector<DenseArray> render_views(const Mesh& mesh,
                                     const std::vector<Eigen::Vector3d>& attributes,
                                     const std::vector<Camera>& cameras,
                                     const TextureFn& texture);

}  // namespace tofu
