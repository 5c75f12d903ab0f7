#pragma once

#include "tofu/graph.hpp"

namespace tofu {

// 2-D convolution. input: [C,H,W] or batched [B,C,H,W]; weights: [Co,Ci,kh,kw];
// bias: [Co]. Kernel extents must be odd. Output extent follows
// (in + 2*pad - k) / stride + 1 per spatial axis.
NodePtr conv2d(const NodePtr& input, const NodePtr& weights, const NodePtr& bias, int stride,
               int padding);

// 3-D convolution. input: [C,D,H,W] or batched [B,C,D,H,W]; weights:
// [Co,Ci,kd,kh,kw]; bias: [Co].
NodePtr conv3d(const NodePtr& input, const NodePtr& weights, const NodePtr& bias, int stride,
               int padding);

}  // namespace tofu
