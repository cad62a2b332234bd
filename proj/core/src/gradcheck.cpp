#include "dua/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dua/error.hpp"

namespace dua {

GradCheckResult finite_diff_check(const std::function<Real(const ParamMap&)>& objective, ParamMap params,
                                  const ad::GradientMap& analytic, Real eps) {
  if (!(eps > 0)) throw ContractError("finite_diff_check: eps must be positive");
  const Real base = objective(params);
  if (objective(params) != base) throw ContractError("finite_diff_check: objective is not deterministic");

  GradCheckResult result;
  for (auto& [name, tensor] : params) {
    auto it = analytic.find(name);
    if (it == analytic.end()) throw ContractError("finite_diff_check: no analytic gradient for '" + name + "'");
    if (it->second.shape() != tensor.shape()) {
      throw DimensionError("finite_diff_check: gradient shape " + shape_string(it->second.shape()) +
                           " for parameter '" + name + "' of shape " + shape_string(tensor.shape()));
    }
    Real worst = 0;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const Real saved = tensor[i];
      tensor[i] = saved + eps;
      const Real up = objective(params);
      tensor[i] = saved - eps;
      const Real down = objective(params);
      tensor[i] = saved;

      const Real numeric = (up - down) / (2 * eps);
      const Real a = it->second[i];
      const Real denom = std::max({std::abs(a), std::abs(numeric), Real(1e-8)});
      const Real rel = std::abs(a - numeric) / denom;
      worst = std::max(worst, rel);
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        result.worst_param = name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
    result.per_param[name] = worst;
  }
  return result;
}

}  // namespace dua
