#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dua {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

/// One context/response/label triple as fixed-shape padded id matrices.
/// Utterances occupy slots [0, turns) in chronological order; the last
/// utterance is slot turns-1.
struct EncodedSample {
  std::size_t max_utterances = 0;
  std::size_t max_words = 0;
  std::vector<std::int32_t> utterance_ids;       // max_utterances x max_words
  std::vector<std::size_t> utterance_lengths;    // max_utterances
  std::size_t turns = 0;
  std::vector<std::int32_t> response_ids;        // max_words
  std::size_t response_length = 0;
  int label = 0;
  std::string category;

  std::span<const std::int32_t> utterance(std::size_t k) const {
    return std::span<const std::int32_t>(utterance_ids).subspan(k * max_words, utterance_lengths.at(k));
  }
  std::span<const std::int32_t> response() const {
    return std::span<const std::int32_t>(response_ids).first(response_length);
  }
};

}  // namespace dua
