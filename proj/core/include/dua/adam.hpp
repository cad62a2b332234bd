#pragma once

#include <cstdint>
#include <string>

#include "dua/autodiff.hpp"
#include "dua/gradcheck.hpp"

namespace dua::train {

struct AdamState {
  ParamMap m;
  ParamMap v;
  std::uint64_t step = 0;
  Real learning_rate = 0.001;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;

  /// Zero moments mirroring `params`.
  static AdamState for_params(const ParamMap& params, Real learning_rate = 0.001);
};

/// Name of the table whose row 0 (PAD) is never updated.
inline constexpr std::string_view kPaddedTable = "embedding";

/// One bias-corrected Adam update of every parameter. Throws ContractError
/// when a parameter has no gradient.
void adam_step(ParamMap& params, const ad::GradientMap& grads, AdamState& state);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
Real clip_global_norm(ad::GradientMap& grads, Real max_norm);

}  // namespace dua::train
