#include "dua/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "dua/error.hpp"
#include "dua/vocabulary.hpp"

namespace dua::data {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !space(text[j])) ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::vector<RawDialogue> parse_tsv_corpus(std::istream& in) {
  std::vector<RawDialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected at least 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    RawDialogue d;
    std::string_view label = fields.front();
    if (const auto bar = label.find('|'); bar != std::string_view::npos) {
      d.category = std::string(label.substr(bar + 1));
      label = label.substr(0, bar);
    }
    if (label == "1") {
      d.label = 1;
    } else if (label == "0") {
      d.label = 0;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": label '" + std::string(label) + "' is not 0 or 1");
    }
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) d.context.emplace_back(fields[i]);
    d.response = std::string(fields.back());
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<RawDialogue> load_tsv_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus '" + path.string() + "'");
  try {
    return parse_tsv_corpus(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_tsv_line(const RawDialogue& d) {
  std::string line = d.label ? "1" : "0";
  if (!d.category.empty()) line += "|" + d.category;
  for (const auto& u : d.context) line += "\t" + u;
  line += "\t" + d.response;
  return line;
}

void write_tsv_corpus(std::ostream& out, const std::vector<RawDialogue>& dialogues) {
  for (const auto& d : dialogues) out << format_tsv_line(d) << '\n';
}

std::vector<std::string> truncate_keep_latest(const std::vector<std::string>& context, std::size_t max_utterances) {
  if (context.size() <= max_utterances) return context;
  return {context.end() - static_cast<std::ptrdiff_t>(max_utterances), context.end()};
}

std::optional<EncodedSample> encode(const RawDialogue& raw, const Vocabulary& vocab, SampleShape shape) {
  if (raw.context.empty()) throw ContractError("encode: dialogue has no context");
  EncodedSample s;
  s.max_utterances = shape.max_utterances;
  s.max_words = shape.max_words;
  s.utterance_ids.assign(shape.max_utterances * shape.max_words, kPadId);
  s.utterance_lengths.assign(shape.max_utterances, 0);
  s.response_ids.assign(shape.max_words, kPadId);
  s.label = raw.label;
  s.category = raw.category;

  const auto context = truncate_keep_latest(raw.context, shape.max_utterances);
  s.turns = context.size();
  for (std::size_t k = 0; k < context.size(); ++k) {
    const auto tokens = tokenize(context[k]);
    const std::size_t n = std::min(tokens.size(), shape.max_words);
    for (std::size_t i = 0; i < n; ++i) s.utterance_ids[k * shape.max_words + i] = vocab.id(tokens[i]);
    s.utterance_lengths[k] = n;
  }
  const auto response = tokenize(raw.response);
  s.response_length = std::min(response.size(), shape.max_words);
  if (s.response_length == 0) return std::nullopt;
  for (std::size_t i = 0; i < s.response_length; ++i) s.response_ids[i] = vocab.id(response[i]);
  return s;
}

EncodedCorpus encode_corpus(const std::vector<RawDialogue>& raw, const Vocabulary& vocab, SampleShape shape) {
  EncodedCorpus out;
  out.samples.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (auto s = encode(raw[i], vocab, shape)) {
      out.samples.push_back(std::move(*s));
      out.source_index.push_back(i);
    } else {
      out.skipped.push_back(i);
    }
  }
  return out;
}

DecodedSample decode(const EncodedSample& sample, const Vocabulary& vocab) {
  DecodedSample d;
  for (std::size_t k = 0; k < sample.turns; ++k) {
    std::vector<std::string> words;
    for (std::int32_t id : sample.utterance(k)) words.push_back(vocab.token(id));
    d.context.push_back(std::move(words));
  }
  for (std::int32_t id : sample.response()) d.response.push_back(vocab.token(id));
  return d;
}

}  // namespace dua::data
