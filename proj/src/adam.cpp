#include "tofu/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "tofu/log.hpp"

namespace tofu {

bool adam_step(std::span<const NodePtr> params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(DenseArray::zeros_like(p->value));
      state.v.push_back(DenseArray::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter list");

  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!state.m[i].same_shape(p->value))
      throw std::invalid_argument("adam_step: moment shape mismatch for parameter " +
                                  std::to_string(i));
    if (!p->grad.empty() && !p->grad.all_finite()) {
      log_warn("adam_step: non-finite gradient, update rejected (step %lld)",
               static_cast<long long>(state.step));
      return false;
    }
  }

  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    p.ensure_grad();
    const int64_t n = p.value.size();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (int64_t j = 0; j < n; ++j) {
      const double g = p.grad[j];
      m[j] = state.cfg.beta1 * m[j] + (1.0 - state.cfg.beta1) * g;
      v[j] = state.cfg.beta2 * v[j] + (1.0 - state.cfg.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
  state.step += 1;
  return true;
}

}  // namespace tofu
