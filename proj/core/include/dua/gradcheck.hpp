#pragma once

#include <functional>
#include <string>

#include "dua/autodiff.hpp"

namespace dua {

using ParamMap = std::map<std::string, Tensor>;

struct GradCheckResult {
  Real max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  Real analytic = 0;
  Real numeric = 0;
  /// Worst relative error per parameter tensor.
  std::map<std::string, Real> per_param;
};

/// Central finite differences against an analytic gradient. Every coordinate
/// of every parameter is perturbed by +/- eps. Relative error uses
/// max(|a|, |b|, 1e-8) as denominator. Throws ContractError if `objective`
/// gives two different values at the same point.
GradCheckResult finite_diff_check(const std::function<Real(const ParamMap&)>& objective, ParamMap params,
                                  const ad::GradientMap& analytic, Real eps);

}  // namespace dua
