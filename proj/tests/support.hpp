#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tofu/graph.hpp"
#include "tofu/rng.hpp"

namespace tofu::test {

inline DenseArray random_array(std::vector<int64_t> shape, Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
  DenseArray a(std::move(shape));
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(lo, hi);
  return a;
}

struct GradCheck {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t checked = 0;
};

// Central finite differences against the analytic gradient of a scalar loss.
// `build` must construct the loss graph from the current leaf values.
// `rel floor` guards the denominator for near-zero gradient entries.
inline GradCheck check_gradients(const std::function<NodePtr()>& build,
                                 const std::vector<NodePtr>& leaves, double step = 1e-5,
                                 double floor_abs = 1e-6) {
  for (const auto& l : leaves) zero_grad(l);
  backward(build());
  std::vector<DenseArray> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves) analytic.push_back(l->grad);

  GradCheck r;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = *leaves[li];
    for (int64_t i = 0; i < leaf.value.size(); ++i) {
      const double keep = leaf.value[i];
      leaf.value[i] = keep + step;
      const double fp = build()->value[0];
      leaf.value[i] = keep - step;
      const double fm = build()->value[0];
      leaf.value[i] = keep;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = analytic[li].empty() ? 0.0 : analytic[li][i];
      const double abs_err = std::fabs(an - fd);
      const double denom = std::max({std::fabs(an), std::fabs(fd), floor_abs});
      r.max_rel_err = std::max(r.max_rel_err, abs_err / denom);
      r.max_abs_err = std::max(r.max_abs_err, abs_err);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace tofu::test
