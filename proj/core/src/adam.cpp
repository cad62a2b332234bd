#include "dua/adam.hpp"

#include <cmath>

#include "dua/error.hpp"

namespace dua::train {

AdamState AdamState::for_params(const ParamMap& params, Real learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& [name, t] : params) {
    s.m.emplace(name, Tensor(t.shape()));
    s.v.emplace(name, Tensor(t.shape()));
  }
  return s;
}

void adam_step(ParamMap& params, const ad::GradientMap& grads, AdamState& state) {
  for (const auto& [name, t] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) throw ContractError("adam_step: no gradient for parameter '" + name + "'");
    if (g->second.shape() != t.shape()) {
      throw DimensionError("adam_step: gradient " + shape_string(g->second.shape()) + " for parameter '" + name +
                           "' of shape " + shape_string(t.shape()));
    }
    if (!state.m.contains(name)) state.m.emplace(name, Tensor(t.shape()));
    if (!state.v.contains(name)) state.v.emplace(name, Tensor(t.shape()));
  }

  ++state.step;
  const Real t = static_cast<Real>(state.step);
  const Real correction1 = Real{1} - std::pow(state.beta1, t);
  const Real correction2 = Real{1} - std::pow(state.beta2, t);

  for (auto& [name, param] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    // PAD row of the embedding table stays pinned at zero.
    const std::size_t skip = name == kPaddedTable && param.rank() == 2 ? param.dim(1) : 0;
    for (std::size_t i = skip; i < param.size(); ++i) {
      m[i] = state.beta1 * m[i] + (Real{1} - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (Real{1} - state.beta2) * g[i] * g[i];
      const Real m_hat = m[i] / correction1;
      const Real v_hat = v[i] / correction2;
      param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

Real clip_global_norm(ad::GradientMap& grads, Real max_norm) {
  Real total{0};
  for (const auto& [name, g] : grads)
    for (Real x : g.data()) total += x * x;
  const Real norm = std::sqrt(total);
  if (max_norm > 0 && norm > max_norm) {
    const Real factor = max_norm / norm;
    for (auto& [name, g] : grads)
      for (Real& x : g.data()) x *= factor;
  }
  return norm;
}

}  // namespace dua::train
