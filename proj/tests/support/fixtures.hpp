#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dua/model.hpp"
#include "dua/rng.hpp"
#include "dua/sample.hpp"
#include "dua/tensor.hpp"

namespace dua::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-scale, scale));
  return t;
}

/// Sample with the given utterance lengths (0 for an empty slot) and
/// response length, random non-PAD ids.
inline EncodedSample random_sample(Rng& rng, const model::DuaConfig& c, const std::vector<std::size_t>& lengths,
                                   std::size_t response_length, int label = 1) {
  EncodedSample s;
  s.max_utterances = c.max_utterances;
  s.max_words = c.max_words;
  s.utterance_ids.assign(c.max_utterances * c.max_words, kPadId);
  s.utterance_lengths.assign(c.max_utterances, 0);
  s.turns = lengths.size();
  auto id = [&] { return static_cast<std::int32_t>(1 + rng.below(c.vocab_size - 1)); };
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    s.utterance_lengths[k] = lengths[k];
    for (std::size_t w = 0; w < lengths[k]; ++w) s.utterance_ids[k * c.max_words + w] = id();
  }
  s.response_ids.assign(c.max_words, kPadId);
  s.response_length = response_length;
  for (std::size_t w = 0; w < response_length; ++w) s.response_ids[w] = id();
  s.label = label;
  return s;
}

/// Config with every dimension at most 8.
inline model::DuaConfig tiny_config() {
  model::DuaConfig c;
  c.max_utterances = 2;
  c.max_words = 5;
  c.emb_dim = 4;
  c.utt_hidden = 3;
  c.flow_hidden = 4;
  c.turns_hidden = 3;
  c.attention_width = 3;
  c.n_filters = 2;
  c.kernel_size = 3;
  c.pool = 3;
  c.vocab_size = 8;
  c.seed = 5;
  c.init_scale = 0.5;
  return c;
}

/// Point for the strict end-to-end gradient check. Widths of 4 with O(1)
/// weights keep every gradient coordinate well above the central-difference
/// roundoff floor (about ulp(loss) / 2eps = 5e-12).
inline model::DuaConfig gradient_config() {
  model::DuaConfig c = tiny_config();
  c.emb_dim = c.utt_hidden = c.flow_hidden = c.turns_hidden = c.attention_width = 4;
  c.init_scale = 1.0;
  c.seed = 302;
  return c;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace dua::testing
