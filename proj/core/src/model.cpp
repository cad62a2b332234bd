#include "dua/model.hpp"

#include <cmath>

#include "dua/error.hpp"
#include "dua/ops.hpp"
#include "dua/rng.hpp"

namespace dua::model {

using ad::Var;

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::concat: return "concat";
    case Fusion::sum: return "sum";
    case Fusion::mul: return "mul";
  }
  return "concat";
}

Fusion parse_fusion(const std::string& name) {
  if (name == "concat") return Fusion::concat;
  if (name == "sum") return Fusion::sum;
  if (name == "mul") return Fusion::mul;
  throw ParseError("unknown fusion strategy '" + name + "' (expected concat, sum or mul)");
}

void DuaConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string("config: ") + name + " must be positive");
  };
  positive(max_utterances, "max_utterances");
  positive(max_words, "max_words");
  positive(emb_dim, "emb_dim");
  positive(utt_hidden, "utt_hidden");
  positive(flow_hidden, "flow_hidden");
  positive(turns_hidden, "turns_hidden");
  positive(attention_width, "attention_width");
  positive(n_filters, "n_filters");
  positive(kernel_size, "kernel_size");
  positive(pool, "pool");
  if (vocab_size < 2) throw ContractError("config: vocab_size must cover PAD and UNK");
  if (kernel_size > max_words) throw ContractError("config: kernel_size exceeds max_words");
  if (pool > max_words - kernel_size + 1) {
    throw ContractError("config: pool window " + std::to_string(pool) + " exceeds conv output " +
                        std::to_string(max_words - kernel_size + 1));
  }
  if (!(init_scale > 0)) throw ContractError("config: init_scale must be positive");
}

std::size_t DuaConfig::fused_dim() const {
  if (ablate_cf || fusion != Fusion::concat) return utt_hidden;
  return 2 * utt_hidden;
}

std::size_t DuaConfig::flow_input_dim() const { return ablate_maf ? fused_dim() : 2 * fused_dim(); }

std::size_t DuaConfig::match_dim() const {
  return layers::cnn_output_dim(max_words, max_words, kernel_size, n_filters, pool);
}

std::map<std::string, Shape> parameter_shapes(const DuaConfig& c) {
  c.validate();
  std::map<std::string, Shape> shapes;
  auto gru = [&](const std::string& prefix, std::size_t in, std::size_t hidden) {
    for (const char* w : {".W_z", ".W_r", ".W_h"}) shapes[prefix + w] = {in, hidden};
    for (const char* v : {".V_z", ".V_r", ".V_h"}) shapes[prefix + v] = {hidden, hidden};
  };
  shapes["embedding"] = {c.vocab_size, c.emb_dim};
  gru("utt_gru", c.emb_dim, c.utt_hidden);
  const std::size_t d = c.fused_dim();
  gru("flow_gru", c.flow_input_dim(), c.flow_hidden);
  if (!c.ablate_maf) {
    shapes["flow_att.W_key"] = {d, c.attention_width};
    shapes["flow_att.W_query"] = {d, c.attention_width};
    shapes["flow_att.bias"] = {c.attention_width};
    shapes["flow_att.context"] = {c.attention_width};
  }
  shapes["bilinear.A"] = {c.flow_hidden, c.flow_hidden};
  for (const char* m : {"cnn.word", "cnn.flow"}) {
    shapes[std::string(m) + ".kernels"] = {c.n_filters, c.kernel_size, c.kernel_size};
    shapes[std::string(m) + ".biases"] = {c.n_filters};
  }
  if (!c.ablate_cf) {
    gru("turn_gru", c.match_dim(), c.turns_hidden);
    shapes["turn_att.W_t"] = {c.flow_hidden, c.attention_width};
    shapes["turn_att.V_t"] = {c.turns_hidden, c.attention_width};
    shapes["turn_att.bias"] = {c.attention_width};
    shapes["turn_att.context"] = {c.attention_width};
  } else {
    shapes["mlp.W"] = {c.max_utterances * c.match_dim(), c.turns_hidden};
    shapes["mlp.bias"] = {c.turns_hidden};
  }
  shapes["out.W_s"] = {c.turns_hidden, 2};
  return shapes;
}

std::size_t parameter_count(const DuaConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(config)) n += shape_size(shape);
  return n;
}

ParamMap init_params(const DuaConfig& config) {
  Rng rng(config.seed);
  ParamMap params;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-config.init_scale, config.init_scale));
    params.emplace(name, std::move(t));
  }
  Tensor& emb = params.at("embedding");
  std::fill_n(emb.data().begin(), config.emb_dim, Real{0});
  return params;
}

void check_params(const DuaConfig& config, const ParamMap& params) {
  const auto shapes = parameter_shapes(config);
  if (shapes.size() != params.size()) {
    throw DimensionError("parameter set has " + std::to_string(params.size()) + " tensors, config expects " +
                         std::to_string(shapes.size()));
  }
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw DimensionError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                           ", config expects " + shape_string(shape));
    }
  }
}

void set_embedding_row(ParamMap& params, std::int32_t id, std::span<const Real> values) {
  Tensor& emb = params.at("embedding");
  if (values.size() != emb.dim(1)) {
    throw DimensionError("embedding row of width " + std::to_string(values.size()) + " for table " +
                         shape_string(emb.shape()));
  }
  if (id <= kPadId || static_cast<std::size_t>(id) >= emb.dim(0)) return;
  std::copy(values.begin(), values.end(), emb.data().begin() + id * emb.dim(1));
}

ModelVars bind(ad::Tape& tape, const DuaConfig& config, const ParamMap& params) {
  check_params(config, params);
  auto p = [&](const std::string& name) { return tape.parameter(name, params.at(name)); };
  ModelVars v;
  v.embedding = p("embedding");
  v.utt_gru = layers::bind_gru(tape, params, "utt_gru");
  v.flow_gru = layers::bind_gru(tape, params, "flow_gru");
  if (!config.ablate_maf) v.flow_att = layers::bind_attention(tape, params, "flow_att");
  v.bilinear = p("bilinear.A");
  v.word_cnn = layers::bind_cnn(tape, params, "cnn.word");
  v.flow_cnn = layers::bind_cnn(tape, params, "cnn.flow");
  if (!config.ablate_cf) {
    v.turn_gru = layers::bind_gru(tape, params, "turn_gru");
    v.turn_W_t = p("turn_att.W_t");
    v.turn_V_t = p("turn_att.V_t");
    v.turn_bias = p("turn_att.bias");
    v.turn_context = p("turn_att.context");
  } else {
    v.mlp_W = p("mlp.W");
    v.mlp_bias = p("mlp.bias");
  }
  v.out_W_s = p("out.W_s");
  return v;
}

Var fuse_with_last(Var sequence, Var last_state, Fusion strategy) {
  switch (strategy) {
    case Fusion::concat: return ops::concat_rowvec(sequence, last_state);
    case Fusion::sum: return ops::add_rowvec(sequence, last_state);
    case Fusion::mul: return ops::mul_rowvec(sequence, last_state);
  }
  return sequence;
}

std::vector<Var> fuse_with_last(const std::vector<Var>& sequences, Var last_state, Fusion strategy) {
  std::vector<Var> fused;
  fused.reserve(sequences.size());
  for (Var s : sequences) fused.push_back(fuse_with_last(s, last_state, strategy));
  return fused;
}

Aggregation aggregate_and_score(const ModelVars& vars, Var match_vectors, Var flow_finals) {
  if (!vars.turn_gru) throw ContractError("aggregate_and_score: model was bound without the turns GRU");
  const Tensor& m = match_vectors.value();
  const Tensor& p = flow_finals.value();
  if (m.rank() != 2 || p.rank() != 2 || m.dim(0) != p.dim(0) || m.dim(0) == 0) {
    throw DimensionError("aggregate_and_score: match vectors " + shape_string(m.shape()) + " with flow states " +
                         shape_string(p.shape()));
  }
  Var states = layers::gru_sequence(*vars.turn_gru, match_vectors, m.dim(0));
  Var pre = ops::add_rowvec(ops::add(ops::matmul(flow_finals, vars.turn_W_t), ops::matmul(states, vars.turn_V_t)),
                            vars.turn_bias);
  Var weights = ops::softmax(ops::matmul(ops::tanh(pre), vars.turn_context));
  Var v_f = ops::matmul(weights, states);
  return {v_f, ops::matmul(v_f, vars.out_W_s), weights};
}

namespace {

struct Encoded {
  Var emb;     // len x emb_dim
  Var states;  // len x utt_hidden
  std::size_t length = 0;
};

Encoded encode_sequence(const ModelVars& vars, std::span<const std::int32_t> ids) {
  Encoded e;
  e.length = ids.size();
  if (e.length == 0) return e;
  e.emb = ops::gather_rows(vars.embedding, ids);
  e.states = layers::gru_sequence(vars.utt_gru, e.emb, e.length);
  return e;
}

void check_sample(const DuaConfig& config, const EncodedSample& s) {
  if (s.max_utterances != config.max_utterances || s.max_words != config.max_words) {
    throw DimensionError("sample shaped " + std::to_string(s.max_utterances) + "x" + std::to_string(s.max_words) +
                         " for config " + std::to_string(config.max_utterances) + "x" +
                         std::to_string(config.max_words));
  }
  if (s.turns == 0 || s.turns > s.max_utterances) throw ContractError("sample has no context turns");
  if (s.response_length == 0) throw ContractError("sample has an empty response");
  bool any = false;
  for (std::size_t k = 0; k < s.turns; ++k) any = any || s.utterance_lengths[k] > 0;
  if (!any) throw ContractError("sample context has no non-empty utterance");
  for (std::size_t k = 0; k < s.max_utterances; ++k) {
    if (s.utterance_lengths[k] > s.max_words) throw ContractError("utterance length exceeds max_words");
  }
  if (s.response_length > s.max_words) throw ContractError("response length exceeds max_words");
}

}  // namespace

MatchOutput forward(const DuaConfig& config, const ModelVars& vars, const EncodedSample& sample,
                    bool collect_diagnostics) {
  check_sample(config, sample);
  ad::Tape& tape = *vars.embedding.tape;
  const std::size_t t = sample.turns;
  const std::size_t width = config.max_words;

  std::vector<Encoded> utts;
  utts.reserve(t);
  for (std::size_t k = 0; k < t; ++k) utts.push_back(encode_sequence(vars, sample.utterance(k)));
  Encoded resp = encode_sequence(vars, sample.response());

  // Final state of the last utterance (zero when it is empty).
  const Encoded& last = utts.back();
  Var last_state = last.length ? ops::row(last.states, last.length - 1)
                               : tape.constant(Tensor({config.utt_hidden}));

  auto fuse = [&](const Encoded& e) {
    return config.ablate_cf ? e.states : fuse_with_last(e.states, last_state, config.fusion);
  };

  std::optional<Diagnostics> diag;
  if (collect_diagnostics) diag.emplace();

  // Returns the flow states (len x flow_hidden) of a fused sequence.
  auto flow = [&](Var fused, std::size_t length, std::vector<Tensor>* attention) {
    if (config.ablate_maf) return layers::gru_sequence(vars.flow_gru, fused, length);
    layers::FlowResult r = layers::self_matching_flow(vars.flow_gru, *vars.flow_att, fused, length);
    if (attention) *attention = std::move(r.attention);
    return r.states;
  };

  Var resp_flow = flow(fuse(resp), resp.length, diag ? &diag->response_flow : nullptr);
  Var resp_emb = ops::pad_rows(resp.emb, width);
  Var resp_flow_padded = ops::pad_rows(resp_flow, width);

  const std::size_t match_dim = config.match_dim();
  std::vector<Var> matches;
  std::vector<Var> finals;
  if (diag) diag->utterance_flow.resize(t);
  for (std::size_t k = 0; k < t; ++k) {
    const Encoded& u = utts[k];
    if (u.length == 0) {
      Var zero = tape.constant(Tensor({width, width}));
      matches.push_back(layers::cnn_match_encode(vars.word_cnn, vars.flow_cnn, zero, zero, config.pool));
      finals.push_back(tape.constant(Tensor({config.flow_hidden})));
      continue;
    }
    Var p_u = flow(fuse(u), u.length, diag ? &diag->utterance_flow[k] : nullptr);
    finals.push_back(ops::row(p_u, u.length - 1));
    layers::MatchMatrices mm =
        layers::match_matrices(ops::pad_rows(u.emb, width), resp_emb, ops::pad_rows(p_u, width), resp_flow_padded,
                               vars.bilinear, std::pair{u.length, resp.length});
    matches.push_back(layers::cnn_match_encode(vars.word_cnn, vars.flow_cnn, mm.word, mm.flow, config.pool));
  }

  MatchOutput out;
  if (!config.ablate_cf) {
    Aggregation agg = aggregate_and_score(vars, ops::stack_rows(matches), ops::stack_rows(finals));
    out.logits_var = agg.logits;
    if (diag) diag->turn_weights = agg.weights.value();
  } else {
    // Utterances are right-aligned so the last one always lands in the final slot.
    std::vector<Var> slots;
    const std::size_t empty_slots = config.max_utterances - t;
    for (std::size_t i = 0; i < empty_slots; ++i) slots.push_back(tape.constant(Tensor({match_dim})));
    for (Var m : matches) slots.push_back(m);
    Var hidden = ops::tanh(ops::add(ops::matmul(ops::concat(slots), vars.mlp_W), vars.mlp_bias));
    out.logits_var = ops::matmul(hidden, vars.out_W_s);
  }

  if (diag) {
    for (Var m : matches) diag->match_vectors.push_back(m.value());
  }
  out.logits = out.logits_var.value();
  const Real z0 = out.logits[0], z1 = out.logits[1];
  out.score = Real{1} / (Real{1} + std::exp(z0 - z1));
  out.diagnostics = std::move(diag);
  return out;
}

MatchOutput score(const DuaConfig& config, const ParamMap& params, const EncodedSample& sample,
                  bool collect_diagnostics) {
  ad::Tape tape;
  ModelVars vars = bind(tape, config, params);
  MatchOutput out = forward(config, vars, sample, collect_diagnostics);
  out.logits_var = {};
  return out;
}

ad::Var loss(const MatchOutput& output, int label) {
  if (label != 0 && label != 1) throw ContractError("loss: label must be 0 or 1");
  if (!output.logits_var.tape) throw ContractError("loss: output is detached from its tape");
  return ops::cross_entropy(output.logits_var, static_cast<std::size_t>(label));
}

}  // namespace dua::model
