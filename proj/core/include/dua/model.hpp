#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dua/autodiff.hpp"
#include "dua/gradcheck.hpp"
#include "dua/layers.hpp"
#include "dua/sample.hpp"

namespace dua::model {

enum class Fusion { concat, sum, mul };

std::string to_string(Fusion f);
Fusion parse_fusion(const std::string& name);

/// Hyperparameters and structural switches.
struct DuaConfig {
  std::size_t max_utterances = 10;
  std::size_t max_words = 50;
  std::size_t emb_dim = 200;
  std::size_t utt_hidden = 200;
  std::size_t flow_hidden = 200;
  std::size_t turns_hidden = 200;
  std::size_t attention_width = 200;
  std::size_t n_filters = 8;
  std::size_t kernel_size = 3;
  std::size_t pool = 3;
  Fusion fusion = Fusion::concat;
  bool ablate_cf = false;   // no turns-aware fusion; MLP instead of turns GRU + attention
  bool ablate_maf = false;  // plain GRU instead of the self-matching flow
  std::size_t vocab_size = 2;
  std::uint64_t seed = 1;
  Real init_scale = 0.1;

  /// Throws ContractError naming the offending field.
  void validate() const;
  /// Width of F_j fed to the flow stage.
  std::size_t fused_dim() const;
  std::size_t flow_input_dim() const;
  /// Length of each per-utterance matching vector.
  std::size_t match_dim() const;

  friend bool operator==(const DuaConfig&, const DuaConfig&) = default;
};

/// Ordered name -> shape map of every trainable tensor for `config`.
std::map<std::string, Shape> parameter_shapes(const DuaConfig& config);
std::size_t parameter_count(const DuaConfig& config);

/// uniform(-init_scale, init_scale) from config.seed, in name order;
/// embedding row 0 (PAD) is zero.
ParamMap init_params(const DuaConfig& config);

/// Throws DimensionError if params do not match the config's shapes.
void check_params(const DuaConfig& config, const ParamMap& params);

/// Copy pretrained rows into the embedding table (row 0 stays zero).
void set_embedding_row(ParamMap& params, std::int32_t id, std::span<const Real> values);

/// Parameters bound to one tape. Build once per tape, then score any number
/// of samples against it.
struct ModelVars {
  ad::Var embedding;
  layers::GruVars utt_gru;
  layers::GruVars flow_gru;
  std::optional<layers::AttentionVars> flow_att;
  ad::Var bilinear;
  layers::CnnVars word_cnn;
  layers::CnnVars flow_cnn;
  std::optional<layers::GruVars> turn_gru;
  ad::Var turn_W_t, turn_V_t, turn_bias, turn_context;
  ad::Var mlp_W, mlp_bias;
  ad::Var out_W_s;
};

ModelVars bind(ad::Tape& tape, const DuaConfig& config, const ParamMap& params);

struct Diagnostics {
  std::vector<Tensor> match_vectors;                   // m_1..m_t
  std::vector<std::vector<Tensor>> utterance_flow;     // per utterance: one row per query position
  std::vector<Tensor> response_flow;
  std::optional<Tensor> turn_weights;                  // alpha_1..alpha_t
};

struct MatchOutput {
  Real score = 0.5;  // softmax(logits)[1]
  Tensor logits;
  ad::Var logits_var;
  std::optional<Diagnostics> diagnostics;
};

/// Turns-aware fusion of each sequence with `last_state` (the final state of
/// the last utterance).
ad::Var fuse_with_last(ad::Var sequence, ad::Var last_state, Fusion strategy);
std::vector<ad::Var> fuse_with_last(const std::vector<ad::Var>& sequences, ad::Var last_state, Fusion strategy);

struct Aggregation {
  ad::Var v_f;
  ad::Var logits;
  ad::Var weights;
};

/// Turns GRU over per-utterance matching vectors (t x match_dim), attention
/// with the final flow states (t x flow_hidden), projection to two logits.
Aggregation aggregate_and_score(const ModelVars& vars, ad::Var match_vectors, ad::Var flow_finals);

MatchOutput forward(const DuaConfig& config, const ModelVars& vars, const EncodedSample& sample,
                    bool collect_diagnostics = false);

/// Inference convenience: builds a private tape.
MatchOutput score(const DuaConfig& config, const ParamMap& params, const EncodedSample& sample,
                  bool collect_diagnostics = false);

/// Cross-entropy of the true class.
ad::Var loss(const MatchOutput& output, int label);

}  // namespace dua::model
