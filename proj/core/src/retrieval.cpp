#include "dua/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_set>

#include "dua/error.hpp"
#include "dua/rng.hpp"

namespace dua::data {

CandidateIndex::CandidateIndex(const std::vector<std::string>& pool, std::set<std::string> stop_words)
    : stop_words_(std::move(stop_words)) {
  if (pool.empty()) throw ContractError("candidate pool is empty");
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& response : pool) {
    auto [it, inserted] = seen.emplace(response, docs_.size());
    if (!inserted) {
      ++frequency_[it->second];
      continue;
    }
    const auto doc = static_cast<std::uint32_t>(docs_.size());
    docs_.push_back(response);
    frequency_.push_back(1);
    std::map<std::string, std::uint32_t> tf;
    for (auto& tok : tokenize(response)) ++tf[tok];
    for (auto& [tok, n] : tf) postings_[tok].push_back({doc, n});
  }
}

std::size_t CandidateIndex::df(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double CandidateIndex::idf(const std::string& term) const {
  const double n = static_cast<double>(docs_.size());
  return std::log((n + 1.0) / (static_cast<double>(df(term)) + 1.0)) + 1.0;
}

std::vector<std::string> CandidateIndex::keywords(const std::vector<std::string>& context, std::size_t k) const {
  std::map<std::string, std::size_t> counts;
  for (const auto& u : context)
    for (auto& tok : tokenize(u))
      if (!stop_words_.contains(tok)) ++counts[tok];
  std::vector<std::pair<double, std::string>> weighted;
  for (const auto& [tok, n] : counts) weighted.emplace_back(static_cast<double>(n) * idf(tok), tok);
  // counts is lexicographic already, so a stable sort keeps ties in that order.
  std::stable_sort(weighted.begin(), weighted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, weighted.size()); ++i) out.push_back(weighted[i].second);
  return out;
}

std::vector<std::string> CandidateIndex::query_terms(const std::string& last_utterance,
                                                     const std::vector<std::string>& context) const {
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& tok) {
    if (!stop_words_.contains(tok) && seen.insert(tok).second) terms.push_back(tok);
  };
  for (auto& tok : tokenize(last_utterance)) add(tok);
  for (auto& tok : keywords(context)) add(tok);
  return terms;
}

double CandidateIndex::score(std::size_t doc, const std::vector<std::string>& terms) const {
  double s = 0;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    for (const Posting& p : it->second) {
      if (p.doc == doc) s += p.tf * idf(term);
    }
  }
  return s;
}

CandidateIndex::Result CandidateIndex::by_frequency(std::size_t k, const std::string* exclude) const {
  std::vector<std::size_t> order(docs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frequency_[a] > frequency_[b]; });
  Result r;
  r.fallback = true;
  for (std::size_t d : order) {
    if (r.docs.size() == k) break;
    if (exclude && docs_[d] == *exclude) continue;
    r.docs.push_back(d);
    r.scores.push_back(0.0);
  }
  return r;
}

CandidateIndex::Result CandidateIndex::retrieve(const std::string& last_utterance,
                                                const std::vector<std::string>& context, std::size_t k,
                                                const std::string* exclude) const {
  if (k > docs_.size()) {
    throw ContractError("retrieve: k = " + std::to_string(k) + " exceeds pool of " + std::to_string(docs_.size()));
  }
  const auto terms = query_terms(last_utterance, context);
  if (terms.empty()) return by_frequency(k, exclude);

  std::vector<double> scores(docs_.size(), 0.0);
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const Posting& p : it->second) scores[p.doc] += p.tf * w;
  }
  std::vector<std::size_t> order;
  order.reserve(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (!exclude || docs_[d] != *exclude) order.push_back(d);
  }
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  Result r;
  for (std::size_t i = 0; i < take; ++i) {
    r.docs.push_back(order[i]);
    r.scores.push_back(scores[order[i]]);
  }
  return r;
}

std::vector<RawDialogue> negative_sample(const std::vector<RawDialogue>& positives, const CandidateIndex& index,
                                         std::size_t ratio, std::uint64_t seed, SamplingMode mode) {
  if (ratio < 1) throw ContractError("negative_sample: ratio must be at least 1");
  Rng rng(seed);
  std::vector<RawDialogue> out;
  out.reserve(positives.size() * (ratio + 1));
  for (std::size_t n = 0; n < positives.size(); ++n) {
    const RawDialogue& pos = positives[n];
    if (pos.context.empty()) throw ContractError("negative_sample: positive " + std::to_string(n) + " has no context");
    RawDialogue first = pos;
    first.label = 1;
    out.push_back(first);

    std::vector<std::size_t> picked;
    if (mode == SamplingMode::train) {
      std::size_t eligible = index.size();
      for (std::size_t d = 0; d < index.size(); ++d)
        if (index.response(d) == pos.response) --eligible;
      if (eligible < ratio) {
        throw ContractError("negative_sample: pool exhausted (" + std::to_string(eligible) +
                            " candidates for ratio " + std::to_string(ratio) + ")");
      }
      while (picked.size() < ratio) {
        const std::size_t d = rng.below(index.size());
        if (index.response(d) == pos.response) continue;
        if (std::find(picked.begin(), picked.end(), d) != picked.end()) continue;
        picked.push_back(d);
      }
    } else {
      const std::size_t k = std::min(index.size(), ratio + 1);
      auto result = index.retrieve(pos.context.back(), pos.context, k, &pos.response);
      if (result.docs.size() < ratio) {
        throw ContractError("negative_sample: pool exhausted (" + std::to_string(result.docs.size()) +
                            " retrieved for ratio " + std::to_string(ratio) + ")");
      }
      picked.assign(result.docs.begin(), result.docs.begin() + static_cast<std::ptrdiff_t>(ratio));
    }
    for (std::size_t d : picked) {
      RawDialogue neg = pos;
      neg.label = 0;
      neg.response = index.response(d);
      out.push_back(std::move(neg));
    }
  }
  return out;
}

std::set<std::string> load_stop_words(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open stop-word list '" + path.string() + "'");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line))
    for (auto& tok : tokenize(line)) words.insert(tok);
  return words;
}

std::vector<std::string> load_response_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open response pool '" + path.string() + "'");
  std::vector<std::string> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!tokenize(line).empty()) pool.push_back(line);
  }
  return pool;
}

}  // namespace dua::data
