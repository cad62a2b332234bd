#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "dua/corpus.hpp"
#include "dua/tensor.hpp"

namespace dua::data {

/// Dense token ids. Id 0 is PAD and id 1 is UNK.
class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Tokens of contexts and responses with count >= min_count, ordered by
  /// descending count then lexicographically.
  static Vocabulary build(const std::vector<RawDialogue>& corpus, std::size_t min_count = 1);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t min_count() const noexcept { return min_count_; }

  /// "token TAB id" per line, in id order.
  void write(std::ostream& out) const;
  std::string serialize() const;
  static Vocabulary read(std::istream& in);
  static Vocabulary parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void append(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::size_t min_count_ = 1;
};

/// Reads "count dim" then "token v_1 ... v_dim" lines and copies the vectors
/// of known tokens into rows of `table` (vocab_size x dim). PAD is never
/// written. Returns how many rows were filled.
std::size_t load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, Tensor& table);
std::size_t load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, Tensor& table);

}  // namespace dua::data
