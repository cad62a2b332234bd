#pragma once

#include <stdexcept>
#include <string>

namespace dua {

/// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed text input (corpus, vocabulary, config, embeddings).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary input (checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A primitive produced NaN or Inf. `op()` names the producing primitive.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string op)
      : std::runtime_error("non-finite value produced by '" + op + "'"), op_(std::move(op)) {}

  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

}  // namespace dua
