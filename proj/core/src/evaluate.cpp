#include "dua/evaluate.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "dua/error.hpp"

namespace dua::eval {

std::vector<RankedGroup> group_scores(std::span<const double> scores, std::span<const int> labels,
                                      std::span<const std::string> categories, std::size_t group_size) {
  if (group_size == 0) throw ContractError("group size must be positive");
  if (scores.size() != labels.size() || (!categories.empty() && categories.size() != scores.size())) {
    throw ContractError("group_scores: scores, labels and categories differ in length");
  }
  if (scores.size() % group_size != 0) {
    throw ContractError("corpus of " + std::to_string(scores.size()) + " candidates is not divisible into groups of " +
                        std::to_string(group_size));
  }
  std::vector<RankedGroup> groups(scores.size() / group_size);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    RankedGroup& group = groups[g];
    group.context_id = g;
    const std::size_t begin = g * group_size;
    group.scores.assign(scores.begin() + begin, scores.begin() + begin + group_size);
    group.labels.assign(labels.begin() + begin, labels.begin() + begin + group_size);
    if (!categories.empty()) group.category = categories[begin];
  }
  return groups;
}

void check_shared_context(std::span<const EncodedSample> samples, std::size_t group_size) {
  if (group_size == 0 || samples.size() % group_size != 0) {
    throw ContractError("corpus of " + std::to_string(samples.size()) + " samples is not divisible into groups of " +
                        std::to_string(group_size));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const EncodedSample& head = samples[i - i % group_size];
    const EncodedSample& s = samples[i];
    if (s.turns != head.turns || s.utterance_lengths != head.utterance_lengths ||
        s.utterance_ids != head.utterance_ids) {
      throw ContractError("sample " + std::to_string(i) + " does not share the context of its group (group " +
                          std::to_string(i / group_size) + ")");
    }
  }
}

void check_shared_context(std::span<const data::RawDialogue> dialogues, std::size_t group_size) {
  if (group_size == 0 || dialogues.size() % group_size != 0) {
    throw ContractError("corpus of " + std::to_string(dialogues.size()) +
                        " lines is not divisible into groups of " + std::to_string(group_size));
  }
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    if (dialogues[i].context != dialogues[i - i % group_size].context) {
      throw ContractError("line " + std::to_string(i + 1) + " does not share the context of its group (group " +
                          std::to_string(i / group_size) + ")");
    }
  }
}

std::vector<double> score_samples(const model::DuaConfig& config, const ParamMap& params,
                                  std::span<const EncodedSample> samples, std::size_t threads) {
  std::vector<double> scores(samples.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, samples.size()));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) scores[i] = model::score(config, params, samples[i]).score;
  };
  if (threads == 1) {
    work(0, samples.size());
    return scores;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (samples.size() + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t begin = std::min(samples.size(), w * chunk);
    const std::size_t end = std::min(samples.size(), begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

MetricsReport evaluate_model(const model::DuaConfig& config, const ParamMap& params,
                             std::span<const EncodedSample> samples, std::size_t group_size, std::size_t threads) {
  check_shared_context(samples, group_size);
  const auto scores = score_samples(config, params, samples, threads);
  std::vector<int> labels;
  std::vector<std::string> categories;
  bool any_category = false;
  for (const auto& s : samples) {
    labels.push_back(s.label);
    categories.push_back(s.category);
    any_category = any_category || !s.category.empty();
  }
  if (!any_category) categories.clear();
  return summarize(group_scores(scores, labels, categories, group_size));
}

}  // namespace dua::eval
