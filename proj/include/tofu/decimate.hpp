#pragma once

#include "tofu/mesh.hpp"

namespace tofu {

// Quadric-error edge collapse down to exactly `target_vertex_count` vertices,
// followed by closest-point projection of the survivors back onto the input
// surface. Requires 4 <= target < N; throws (reporting the achieved minimum)
// if no valid collapse remains before the target is reached.
Mesh decimate(const Mesh& mesh, int target_vertex_count);

}  // namespace tofu
