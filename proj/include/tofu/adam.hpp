#pragma once

#include <span>
#include <vector>

#include "tofu/graph.hpp"

namespace tofu {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment accumulators are kept parallel to the parameter
// list handed to the first step.
struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::vector<DenseArray> m, v;
};

// Applies one update from the parameters' accumulated gradients. Returns false
// (and leaves parameters, moments and the step counter untouched) if any
// gradient value is non-finite; a warning is emitted in that case.
bool adam_step(std::span<const NodePtr> params, AdamState& state);

}  // namespace tofu
