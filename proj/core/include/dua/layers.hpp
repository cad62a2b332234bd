#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dua/autodiff.hpp"
#include "dua/gradcheck.hpp"

/// Differentiable building blocks of the matching network. Vectors are rows:
/// a projection of x by W (in x out) is x * W.
namespace dua::layers {

using ad::Tape;
using ad::Var;

/// Bias-free GRU:
///   z = sigmoid(x W_z + h V_z)
///   r = sigmoid(x W_r + h V_r)
///   c = tanh(x W_h + (r * h) V_h)
///   h' = z * c + (1 - z) * h
struct GruVars {
  Var W_z, W_r, W_h;  // input x hidden
  Var V_z, V_r, V_h;  // hidden x hidden

  std::size_t input_dim() const { return W_z.value().dim(0); }
  std::size_t hidden_dim() const { return W_z.value().dim(1); }
};

/// Additive attention s_j = v . tanh(key_j W_key + query W_query + bias).
struct AttentionVars {
  Var W_key;    // d x a
  Var W_query;  // d_q x a
  Var bias;     // a
  Var context;  // a
};

/// Kernel bank for one matching matrix: kernels (n_f x l x l), biases (n_f).
struct CnnVars {
  Var kernels;
  Var biases;

  std::size_t filters() const { return kernels.value().dim(0); }
  std::size_t kernel_size() const { return kernels.value().dim(1); }
};

/// Parameter names for a GRU registered under `prefix`.
std::vector<std::string> gru_param_names(const std::string& prefix);
GruVars bind_gru(Tape& tape, const ParamMap& params, const std::string& prefix);
AttentionVars bind_attention(Tape& tape, const ParamMap& params, const std::string& prefix);
CnnVars bind_cnn(Tape& tape, const ParamMap& params, const std::string& prefix);

Var gru_cell(const GruVars& gru, Var x, Var h_prev);

/// Runs the GRU over the first `length` rows of xs (n x input) from a zero
/// state. Output is (n x hidden); rows at or past `length` are zero.
Var gru_sequence(const GruVars& gru, Var xs, std::size_t length);

struct AttentionResult {
  Var context;  // sum_i weights_i * keys_i
  Var weights;  // n, zero where masked
};

AttentionResult additive_attention(const AttentionVars& att, Var keys, Var query, const std::vector<bool>& mask);

struct FlowResult {
  Var states;                      // n x hidden, zero past length
  std::vector<Tensor> attention;   // one weight row per step t < length
};

/// Self-matching attention flow: p_t = GRU(p_{t-1}, [f_t, c_t]) where c_t
/// attends over the unmasked rows of `fused` with f_t as query.
FlowResult self_matching_flow(const GruVars& gru, const AttentionVars& att, Var fused, std::size_t length);

struct MatchMatrices {
  Var word;  // M1 = U R^T
  Var flow;  // M2 = P_u A P_r^T
};

/// Both matching matrices of shape (n_u x n_r). When lengths are given only
/// the leading (u_length x r_length) block is computed; the rest is zero.
MatchMatrices match_matrices(Var u_emb, Var r_emb, Var p_u, Var p_r, Var bilinear,
                             std::optional<std::pair<std::size_t, std::size_t>> lengths = std::nullopt);

/// conv -> relu -> maxpool per kernel for each matrix, everything flattened
/// and concatenated (all M1 kernels first).
Var cnn_match_encode(const CnnVars& word_cnn, const CnnVars& flow_cnn, Var m1, Var m2, std::size_t pool);

/// Length of cnn_match_encode's output.
std::size_t cnn_output_dim(std::size_t n_u, std::size_t n_r, std::size_t kernel, std::size_t filters,
                           std::size_t pool);

}  // namespace dua::layers
