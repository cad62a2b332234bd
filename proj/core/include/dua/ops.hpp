#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dua/autodiff.hpp"

/// Differentiable primitives. Every function records exactly one entry on
/// the tape of its first argument.
namespace dua::ops {

using ad::Var;

enum class Activation { sigmoid, tanh, relu };

/// (m x k)(k x n), (k)(k x n) -> (n), or (m x k)(k) -> (m).
Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
/// 1 - a
Var one_minus(Var a);

/// Row-broadcast combinators for a matrix (n x d) and vector (d).
Var add_rowvec(Var m, Var v);
Var mul_rowvec(Var m, Var v);
/// (n x p), (q) -> (n x (p+q)), v appended to every row.
Var concat_rowvec(Var m, Var v);

Var apply_activation(Activation kind, Var x);
inline Var sigmoid(Var x) { return apply_activation(Activation::sigmoid, x); }
inline Var tanh(Var x) { return apply_activation(Activation::tanh, x); }
inline Var relu(Var x) { return apply_activation(Activation::relu, x); }

Var softmax(Var x);
/// Softmax over positions where mask is true; masked positions are exactly 0.
Var masked_softmax(Var x, const std::vector<bool>& mask);

/// Valid cross-correlation, stride 1, plus a scalar bias.
Var conv2d_valid(Var input, Var kernel, Var bias);
/// Non-overlapping max pooling with window = stride = `window`. Ragged edge
/// windows take the max over available cells.
Var maxpool2d(Var input, std::size_t window);

/// Concatenate the flattened values of all parts into one vector.
Var concat(std::span<const Var> parts);
Var flatten(Var x);

Var row(Var m, std::size_t index);
/// Rank-1 parts of equal width stacked into a matrix.
Var stack_rows(std::span<const Var> rows);
Var slice_rows(Var m, std::size_t begin, std::size_t count);
/// Append zero rows up to `rows`.
Var pad_rows(Var m, std::size_t rows);
/// Zero-pad a matrix at the bottom/right to (rows x cols).
Var pad2d(Var m, std::size_t rows, std::size_t cols);
/// Slice along the leading axis: rank-3 -> matrix, rank-1 -> scalar.
Var select(Var t, std::size_t index);

/// Rows of `table` picked by id; backward scatters into the table.
Var gather_rows(Var table, std::span<const std::int32_t> ids);

Var sum(Var x);
/// -log softmax(logits)[label]
Var cross_entropy(Var logits, std::size_t label);

}  // namespace dua::ops
