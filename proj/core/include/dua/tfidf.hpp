#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dua/corpus.hpp"
#include "dua/metrics.hpp"

namespace dua::baseline {

/// Cosine similarity of tf-idf vectors between the concatenated context and
/// a response. Every context concatenation and every response of the fitting
/// corpus counts as one document; idf = ln((N + 1) / (df + 1)) + 1.
class TfidfModel {
 public:
  static TfidfModel fit(const std::vector<data::RawDialogue>& corpus);

  std::size_t documents() const noexcept { return documents_; }
  std::size_t df(const std::string& term) const;
  double idf(const std::string& term) const;

  /// Cosine between two whitespace-tokenized texts; 0 if either vector is zero.
  double similarity(std::string_view a, std::string_view b) const;
  double score(const std::vector<std::string>& context, const std::string& response) const;

 private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t documents_ = 0;
};

eval::MetricsReport evaluate_tfidf(const TfidfModel& model, const std::vector<data::RawDialogue>& test,
                                   std::size_t group_size);

}  // namespace dua::baseline
