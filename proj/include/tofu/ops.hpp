#pragma once

#include <vector>

#include "tofu/graph.hpp"

namespace tofu {

// Elementwise and structural ops. All ops are eager: the value is computed at
// call time and the node carries a closure for the reverse sweep.

NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double c);
NodePtr leaky_relu(const NodePtr& a, double slope = 0.01);
NodePtr sum(const NodePtr& a);  // -> scalar

NodePtr reshape(const NodePtr& a, std::vector<int64_t> shape);
// Concatenate along `axis`; all other extents must agree.
NodePtr concat(const NodePtr& a, const NodePtr& b, int axis);
// Slice index i off the leading axis.
NodePtr select0(const NodePtr& a, int64_t i);

// Nearest-neighbor 2x upsampling of the trailing 2 (or 3) spatial axes.
// Accepts an optional leading batch axis: rank 3/4 for 2-D, rank 4/5 for 3-D.
NodePtr upsample_nearest_2d(const NodePtr& a);
NodePtr upsample_nearest_3d(const NodePtr& a);

// rows of `centers` [N,3] each offset by every row of `offsets` [Q,3]
// -> [N*Q, 3] with vertex-major order.
NodePtr add_rows_outer(const NodePtr& centers, const DenseArray& offsets);

// out_row = R * x_row for a fixed 3x3 rotation (row-major, 9 values).
NodePtr rotate_rows(const NodePtr& x, const double* rotation);

// Mean over rows of the squared Euclidean row distance: sum((a-b)^2)/N_rows.
NodePtr mean_row_sq_dist(const NodePtr& a, const NodePtr& b);

}  // namespace tofu
