#pragma once

#include <span>
#include <string>
#include <vector>

#include "dua/corpus.hpp"
#include "dua/metrics.hpp"
#include "dua/model.hpp"

namespace dua::eval {

/// Consecutive groups of `n` candidates in input order. Throws ContractError
/// when the count is not divisible by n.
std::vector<RankedGroup> group_scores(std::span<const double> scores, std::span<const int> labels,
                                      std::span<const std::string> categories, std::size_t group_size);

/// Throws ContractError when a group of n consecutive samples does not
/// share one context.
void check_shared_context(std::span<const EncodedSample> samples, std::size_t group_size);
void check_shared_context(std::span<const data::RawDialogue> dialogues, std::size_t group_size);

/// Model score of every sample; `threads` workers each own their tapes.
std::vector<double> score_samples(const model::DuaConfig& config, const ParamMap& params,
                                  std::span<const EncodedSample> samples, std::size_t threads = 1);

MetricsReport evaluate_model(const model::DuaConfig& config, const ParamMap& params,
                             std::span<const EncodedSample> samples, std::size_t group_size, std::size_t threads = 1);

}  // namespace dua::eval
