#include "dua/layers.hpp"

#include "dua/error.hpp"
#include "dua/ops.hpp"

namespace dua::layers {
namespace {

Var bind_param(Tape& tape, const ParamMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing parameter '" + name + "'");
  return tape.parameter(name, it->second);
}

struct Projections {
  Var z, r, h;
};

Var gru_step(const GruVars& gru, const Projections& x, Var h_prev) {
  Var z = ops::sigmoid(ops::add(x.z, ops::matmul(h_prev, gru.V_z)));
  Var r = ops::sigmoid(ops::add(x.r, ops::matmul(h_prev, gru.V_r)));
  Var cand = ops::tanh(ops::add(x.h, ops::matmul(ops::mul(r, h_prev), gru.V_h)));
  return ops::add(ops::mul(z, cand), ops::mul(ops::one_minus(z), h_prev));
}

void check_gru(const GruVars& gru) {
  const std::size_t hidden = gru.hidden_dim();
  for (Var w : {gru.W_r, gru.W_h}) {
    if (w.value().shape() != gru.W_z.value().shape()) {
      throw DimensionError("gru: input weights disagree: " + shape_string(w.value().shape()) + " vs " +
                           shape_string(gru.W_z.value().shape()));
    }
  }
  for (Var v : {gru.V_z, gru.V_r, gru.V_h}) {
    if (v.value().shape() != Shape{hidden, hidden}) {
      throw DimensionError("gru: recurrent weight " + shape_string(v.value().shape()) + " for hidden size " +
                           std::to_string(hidden));
    }
  }
}

}  // namespace

std::vector<std::string> gru_param_names(const std::string& prefix) {
  return {prefix + ".W_z", prefix + ".W_r", prefix + ".W_h", prefix + ".V_z", prefix + ".V_r", prefix + ".V_h"};
}

GruVars bind_gru(Tape& tape, const ParamMap& params, const std::string& prefix) {
  GruVars g{bind_param(tape, params, prefix + ".W_z"), bind_param(tape, params, prefix + ".W_r"),
            bind_param(tape, params, prefix + ".W_h"), bind_param(tape, params, prefix + ".V_z"),
            bind_param(tape, params, prefix + ".V_r"), bind_param(tape, params, prefix + ".V_h")};
  check_gru(g);
  return g;
}

AttentionVars bind_attention(Tape& tape, const ParamMap& params, const std::string& prefix) {
  return {bind_param(tape, params, prefix + ".W_key"), bind_param(tape, params, prefix + ".W_query"),
          bind_param(tape, params, prefix + ".bias"), bind_param(tape, params, prefix + ".context")};
}

CnnVars bind_cnn(Tape& tape, const ParamMap& params, const std::string& prefix) {
  return {bind_param(tape, params, prefix + ".kernels"), bind_param(tape, params, prefix + ".biases")};
}

Var gru_cell(const GruVars& gru, Var x, Var h_prev) {
  if (x.value().rank() != 1 || x.value().size() != gru.input_dim() || h_prev.value().rank() != 1 ||
      h_prev.value().size() != gru.hidden_dim()) {
    throw DimensionError("gru_cell: input " + shape_string(x.value().shape()) + " and state " +
                         shape_string(h_prev.value().shape()) + " for weights " +
                         shape_string(gru.W_z.value().shape()));
  }
  Projections p{ops::matmul(x, gru.W_z), ops::matmul(x, gru.W_r), ops::matmul(x, gru.W_h)};
  return gru_step(gru, p, h_prev);
}

Var gru_sequence(const GruVars& gru, Var xs, std::size_t length) {
  const Tensor& x = xs.value();
  if (x.rank() != 2 || x.dim(1) != gru.input_dim()) {
    throw DimensionError("gru_sequence: inputs " + shape_string(x.shape()) + " for weights " +
                         shape_string(gru.W_z.value().shape()));
  }
  if (length < 1 || length > x.dim(0)) {
    throw ContractError("gru_sequence: length " + std::to_string(length) + " outside [1, " +
                        std::to_string(x.dim(0)) + "]");
  }
  Var live = length == x.dim(0) ? xs : ops::slice_rows(xs, 0, length);
  Var pz = ops::matmul(live, gru.W_z);
  Var pr = ops::matmul(live, gru.W_r);
  Var ph = ops::matmul(live, gru.W_h);

  Var h = xs.tape->constant(Tensor({gru.hidden_dim()}));
  std::vector<Var> states;
  states.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    h = gru_step(gru, {ops::row(pz, i), ops::row(pr, i), ops::row(ph, i)}, h);
    states.push_back(h);
  }
  Var out = ops::stack_rows(states);
  return length == x.dim(0) ? out : ops::pad_rows(out, x.dim(0));
}

AttentionResult additive_attention(const AttentionVars& att, Var keys, Var query, const std::vector<bool>& mask) {
  const Tensor& k = keys.value();
  if (k.rank() != 2 || k.dim(0) == 0) {
    throw DimensionError("additive_attention: keys must be a non-empty matrix, got " + shape_string(k.shape()));
  }
  if (mask.size() != k.dim(0)) {
    throw DimensionError("additive_attention: mask length " + std::to_string(mask.size()) + " for keys " +
                         shape_string(k.shape()));
  }
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw ContractError("additive_attention: all positions masked");

  Var projected = ops::add_rowvec(ops::matmul(keys, att.W_key),
                                  ops::add(ops::matmul(query, att.W_query), att.bias));
  Var scores = ops::matmul(ops::tanh(projected), att.context);
  Var weights = ops::masked_softmax(scores, mask);
  return {ops::matmul(weights, keys), weights};
}

FlowResult self_matching_flow(const GruVars& gru, const AttentionVars& att, Var fused, std::size_t length) {
  const Tensor& f = fused.value();
  if (f.rank() != 2) throw DimensionError("self_matching_flow: fused input " + shape_string(f.shape()));
  if (gru.input_dim() != 2 * f.dim(1)) {
    throw DimensionError("self_matching_flow: GRU input " + std::to_string(gru.input_dim()) +
                         " must be twice the fused width " + std::to_string(f.dim(1)));
  }
  if (length < 1 || length > f.dim(0)) {
    throw ContractError("self_matching_flow: length " + std::to_string(length) + " outside [1, " +
                        std::to_string(f.dim(0)) + "]");
  }
  Var live = length == f.dim(0) ? fused : ops::slice_rows(fused, 0, length);
  // Key and query projections are shared across steps.
  Var keys_proj = ops::matmul(live, att.W_key);
  Var queries_proj = ops::add_rowvec(ops::matmul(live, att.W_query), att.bias);

  FlowResult result;
  Var h = fused.tape->constant(Tensor({gru.hidden_dim()}));
  std::vector<Var> states;
  for (std::size_t t = 0; t < length; ++t) {
    Var scores = ops::matmul(ops::tanh(ops::add_rowvec(keys_proj, ops::row(queries_proj, t))), att.context);
    Var weights = ops::softmax(scores);
    Var context = ops::matmul(weights, live);
    const Var parts[] = {ops::row(live, t), context};
    h = gru_cell(gru, ops::concat(parts), h);
    states.push_back(h);
    result.attention.push_back(weights.value());
  }
  Var out = ops::stack_rows(states);
  result.states = length == f.dim(0) ? out : ops::pad_rows(out, f.dim(0));
  return result;
}

MatchMatrices match_matrices(Var u_emb, Var r_emb, Var p_u, Var p_r, Var bilinear,
                             std::optional<std::pair<std::size_t, std::size_t>> lengths) {
  const Tensor& u = u_emb.value();
  const Tensor& r = r_emb.value();
  const Tensor& pu = p_u.value();
  const Tensor& pr = p_r.value();
  const Tensor& a = bilinear.value();
  if (u.rank() != 2 || r.rank() != 2 || u.dim(1) != r.dim(1) || pu.rank() != 2 || pr.rank() != 2 ||
      pu.dim(0) != u.dim(0) || pr.dim(0) != r.dim(0) || a.rank() != 2 || a.dim(0) != pu.dim(1) ||
      a.dim(1) != pr.dim(1)) {
    throw DimensionError("match_matrices: U " + shape_string(u.shape()) + ", R " + shape_string(r.shape()) +
                         ", P_u " + shape_string(pu.shape()) + ", P_r " + shape_string(pr.shape()) + ", A " +
                         shape_string(a.shape()));
  }
  const std::size_t n_u = u.dim(0), n_r = r.dim(0);
  if (!lengths) {
    return {ops::matmul(u_emb, ops::transpose(r_emb)),
            ops::matmul(ops::matmul(p_u, bilinear), ops::transpose(p_r))};
  }
  const auto [lu, lr] = *lengths;
  if (lu < 1 || lu > n_u || lr < 1 || lr > n_r) throw ContractError("match_matrices: lengths out of range");
  auto head = [](Var m, std::size_t len) { return len == m.value().dim(0) ? m : ops::slice_rows(m, 0, len); };
  Var m1 = ops::matmul(head(u_emb, lu), ops::transpose(head(r_emb, lr)));
  Var m2 = ops::matmul(ops::matmul(head(p_u, lu), bilinear), ops::transpose(head(p_r, lr)));
  if (lu != n_u || lr != n_r) {
    m1 = ops::pad2d(m1, n_u, n_r);
    m2 = ops::pad2d(m2, n_u, n_r);
  }
  return {m1, m2};
}

Var cnn_match_encode(const CnnVars& word_cnn, const CnnVars& flow_cnn, Var m1, Var m2, std::size_t pool) {
  if (m1.value().shape() != m2.value().shape()) {
    throw DimensionError("cnn_match_encode: matrices " + shape_string(m1.value().shape()) + " and " +
                         shape_string(m2.value().shape()));
  }
  std::vector<Var> pieces;
  for (const auto& [cnn, matrix] : {std::pair{word_cnn, m1}, std::pair{flow_cnn, m2}}) {
    const Tensor& k = cnn.kernels.value();
    if (k.rank() != 3 || cnn.biases.value().rank() != 1 || cnn.biases.value().dim(0) != k.dim(0)) {
      throw DimensionError("cnn_match_encode: kernels " + shape_string(k.shape()) + " with biases " +
                           shape_string(cnn.biases.value().shape()));
    }
    for (std::size_t i = 0; i < cnn.filters(); ++i) {
      Var conv = ops::conv2d_valid(matrix, ops::select(cnn.kernels, i), ops::select(cnn.biases, i));
      pieces.push_back(ops::flatten(ops::maxpool2d(ops::relu(conv), pool)));
    }
  }
  return ops::concat(pieces);
}

std::size_t cnn_output_dim(std::size_t n_u, std::size_t n_r, std::size_t kernel, std::size_t filters,
                           std::size_t pool) {
  if (kernel > n_u || kernel > n_r || kernel == 0 || pool == 0) {
    throw DimensionError("cnn_output_dim: kernel " + std::to_string(kernel) + " for matrix " +
                         std::to_string(n_u) + "x" + std::to_string(n_r));
  }
  const std::size_t ch = n_u - kernel + 1, cw = n_r - kernel + 1;
  return 2 * filters * ((ch + pool - 1) / pool) * ((cw + pool - 1) / pool);
}

}  // namespace dua::layers
