#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dua/sample.hpp"

namespace dua::data {

/// One labelled context/response pair as text.
struct RawDialogue {
  int label = 0;
  std::vector<std::string> context;
  std::string response;
  std::string category;  // empty when the corpus carries none

  friend bool operator==(const RawDialogue&, const RawDialogue&) = default;
};

/// Whitespace tokenization of pre-tokenized text.
std::vector<std::string> tokenize(std::string_view text);

/// Parse TSV lines: label TAB utt_1 TAB ... TAB utt_t TAB response.
/// The label field may carry a category as "label|category".
/// Throws ParseError naming the 1-based line number.
std::vector<RawDialogue> parse_tsv_corpus(std::istream& in);
std::vector<RawDialogue> load_tsv_corpus(const std::filesystem::path& path);

void write_tsv_corpus(std::ostream& out, const std::vector<RawDialogue>& dialogues);
std::string format_tsv_line(const RawDialogue& dialogue);

/// Keep the last `max_utterances` turns.
std::vector<std::string> truncate_keep_latest(const std::vector<std::string>& context, std::size_t max_utterances);

struct SampleShape {
  std::size_t max_utterances = 10;
  std::size_t max_words = 50;
};

class Vocabulary;

/// Truncate (latest turns, first words), map to ids, zero-pad. Returns
/// nullopt when the response has no tokens (the caller should skip it).
std::optional<EncodedSample> encode(const RawDialogue& raw, const Vocabulary& vocab, SampleShape shape);

struct EncodedCorpus {
  std::vector<EncodedSample> samples;
  std::vector<std::size_t> source_index;  // position of each sample in the raw corpus
  std::vector<std::size_t> skipped;       // raw positions dropped for an empty response
};

EncodedCorpus encode_corpus(const std::vector<RawDialogue>& raw, const Vocabulary& vocab, SampleShape shape);

struct DecodedSample {
  std::vector<std::vector<std::string>> context;
  std::vector<std::string> response;
};

DecodedSample decode(const EncodedSample& sample, const Vocabulary& vocab);

}  // namespace dua::data
