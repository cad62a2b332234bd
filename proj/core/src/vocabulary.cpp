#include "dua/vocabulary.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dua/error.hpp"
#include "dua/sample.hpp"

namespace dua::data {

Vocabulary::Vocabulary() {
  append(std::string(kPadToken));
  append(std::string(kUnkToken));
}

void Vocabulary::append(std::string token) {
  const auto id = static_cast<std::int32_t>(tokens_.size());
  if (!ids_.emplace(token, id).second) throw ParseError("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<RawDialogue>& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  auto count = [&](const std::string& text) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  };
  for (const auto& d : corpus) {
    for (const auto& u : d.context) count(u);
    count(d.response);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != kPadToken && tok != kUnkToken) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& [tok, n] : ranked) v.append(tok);
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary v;
  v.tokens_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": expected 'token TAB id'");
    }
    std::size_t id = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, id);
    if (ec != std::errc() || ptr != last) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": bad id '" + line.substr(tab + 1) + "'");
    }
    if (id != v.tokens_.size()) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": id " + std::to_string(id) +
                       " breaks the dense sequence (expected " + std::to_string(v.tokens_.size()) + ")");
    }
    v.append(line.substr(0, tab));
  }
  if (v.tokens_.size() < 2 || v.tokens_[0] != kPadToken || v.tokens_[1] != kUnkToken) {
    throw ParseError("vocabulary must start with " + std::string(kPadToken) + " and " + std::string(kUnkToken));
  }
  return v;
}

Vocabulary Vocabulary::parse(const std::string& text) {
  std::istringstream in(text);
  return read(in);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write vocabulary '" + path.string() + "'");
  write(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary '" + path.string() + "'");
  return read(in);
}

std::size_t load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, Tensor& table) {
  if (table.rank() != 2 || table.dim(0) != vocab.size()) {
    throw DimensionError("embedding table " + shape_string(table.shape()) + " for vocabulary of " +
                         std::to_string(vocab.size()));
  }
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embeddings: missing header line");
  std::size_t count = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> count >> dim)) throw ParseError("embeddings: header must be 'count dim'");
  }
  if (dim != table.dim(1)) {
    throw DimensionError("embeddings: file dimension " + std::to_string(dim) + " but model uses " +
                         std::to_string(table.dim(1)));
  }
  std::size_t filled = 0;
  std::vector<Real> row(dim);
  for (std::size_t n = 0; n < count; ++n) {
    if (!std::getline(in, line)) {
      throw ParseError("embeddings: expected " + std::to_string(count) + " vectors, got " + std::to_string(n));
    }
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    for (std::size_t j = 0; j < dim; ++j) {
      double v;
      if (!(fields >> v)) throw ParseError("embeddings: line " + std::to_string(n + 2) + " has too few values");
      row[j] = static_cast<Real>(v);
    }
    if (!vocab.contains(token)) continue;
    const std::int32_t id = vocab.id(token);
    if (id == kPadId) continue;
    std::copy(row.begin(), row.end(), table.data().begin() + static_cast<std::size_t>(id) * dim);
    ++filled;
  }
  return filled;
}

std::size_t load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, Tensor& table) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embeddings '" + path.string() + "'");
  return load_pretrained_embeddings(in, vocab, table);
}

}  // namespace dua::data
