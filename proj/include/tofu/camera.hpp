#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tofu/graph.hpp"

namespace tofu {

// Pinhole camera. Extrinsics map world -> camera; the camera looks down +z in
// its own frame, +x right, +y down (image rows grow with +y). Units:
// millimeters in world space, pixels in the image plane, pixel centers at
// integer coordinates.
struct Camera {
  std::string name;
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  // Enforces the type invariants: orthonormal R with det +1 (to 1e-9),
  // positive focal lengths, principal point inside the image.
  void validate() const;
};

inline constexpr double kMinDepthMm = 1e-9;
// Depth floor used on the differentiable path so near-degenerate vertices
// yield finite gradients instead of failures.
inline constexpr double kClampDepthMm = 1.0;

// Perspective projection of a world point. Throws if the camera-frame depth
// is <= 1e-9 mm ("behind camera").
Eigen::Vector2d project(const Eigen::Vector3d& point, const Camera& camera);

// Camera-frame depth of a world point (no validity check).
double camera_depth(const Eigen::Vector3d& point, const Camera& camera);

// Differentiable batched projection of [M,3] world points -> [M,2] pixels.
// Depth is clamped to 1 mm; each clamp event increments *clamp_events when
// provided.
NodePtr project_points(const NodePtr& points, const Camera& camera,
                       int64_t* clamp_events = nullptr);

// Camera rig JSON: list of {"name","width","height","K":9,"R":9,"t":3},
// row-major matrices, pixels for K and millimeters for t.
std::vector<Camera> load_rig(const std::string& path);
void save_rig(const std::string& path, const std::vector<Camera>& cameras);

}  // namespace tofu
