#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dua/corpus.hpp"

namespace dua::data {

/// Inverted index over a pool of distinct responses with tf-idf statistics.
/// idf(t) = ln((N + 1) / (df(t) + 1)) + 1, N = number of distinct responses.
class CandidateIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };

  struct Result {
    std::vector<std::size_t> docs;
    std::vector<double> scores;
    bool fallback = false;  // query was empty; docs ordered by pool frequency
  };

  /// Duplicate responses are merged (first occurrence wins the position) and
  /// counted toward their pool frequency.
  explicit CandidateIndex(const std::vector<std::string>& pool, std::set<std::string> stop_words = {});

  std::size_t size() const noexcept { return docs_.size(); }
  const std::string& response(std::size_t doc) const { return docs_.at(doc); }
  std::size_t frequency(std::size_t doc) const { return frequency_.at(doc); }
  std::size_t df(const std::string& term) const;
  double idf(const std::string& term) const;

  /// Top `k` context tokens by (count in context) * idf; ties lexicographic.
  std::vector<std::string> keywords(const std::vector<std::string>& context, std::size_t k = 5) const;

  /// Distinct terms of the last utterance plus the context keywords, minus stop words.
  std::vector<std::string> query_terms(const std::string& last_utterance,
                                       const std::vector<std::string>& context) const;

  /// Sum over distinct query terms of tf(term, doc) * idf(term).
  double score(std::size_t doc, const std::vector<std::string>& terms) const;

  /// Top-k distinct responses by score, ties by pool order. Responses equal
  /// to `exclude` are never returned.
  Result retrieve(const std::string& last_utterance, const std::vector<std::string>& context, std::size_t k,
                  const std::string* exclude = nullptr) const;

 private:
  Result by_frequency(std::size_t k, const std::string* exclude) const;

  std::vector<std::string> docs_;
  std::vector<std::size_t> frequency_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::set<std::string> stop_words_;
};

enum class SamplingMode { train, test };

/// For every positive, emit it followed by `ratio` label-0 copies with other
/// responses: uniform draws from the pool (train) or retrieval-ranked
/// candidates (test). The true response is never used as a negative.
std::vector<RawDialogue> negative_sample(const std::vector<RawDialogue>& positives, const CandidateIndex& index,
                                         std::size_t ratio, std::uint64_t seed, SamplingMode mode);

std::set<std::string> load_stop_words(const std::filesystem::path& path);
std::vector<std::string> load_response_pool(const std::filesystem::path& path);

}  // namespace dua::data
