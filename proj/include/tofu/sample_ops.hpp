#pragma once

#include <vector>

#include "tofu/graph.hpp"

namespace tofu {

// Bilinear interpolation of featureMap [C,H,W] at uv [M,2] (pixel units,
// pixel centers at integer coordinates) -> [M,C]. Out-of-bounds coordinates
// are clamped to the pixel-center rectangle; the gradient w.r.t. a clamped
// coordinate is zero. Differentiable w.r.t. both the map and uv.
NodePtr bilinear_sample(const NodePtr& feature_map, const NodePtr& uv);

// Per-channel softmax over the flattened spatial axes of `volume`
// ([N, ...spatial]) followed by the probability-weighted sum of grid_coords
// [S,3] -> [N,3]. Uses max-subtraction for stability.
NodePtr softmax_expectation(const NodePtr& volume, const DenseArray& grid_coords);

// View-wise fusion of per-view features [M,C]:
//  - fuse_mean_std concatenates per-channel mean and standard deviation over
//    views -> [M,2C]. The std is exactly 0 for identical views and for K=1,
//    and stays smooth near zero variance.
//  - fuse_max takes the elementwise maximum -> [M,C].
NodePtr fuse_mean_std(const std::vector<NodePtr>& view_features);
NodePtr fuse_max(const std::vector<NodePtr>& view_features);

}  // namespace tofu
