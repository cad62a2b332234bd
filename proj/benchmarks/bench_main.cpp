#include <benchmark/benchmark.h>

#include "dua/layers.hpp"
#include "dua/metrics.hpp"
#include "dua/model.hpp"
#include "dua/ops.hpp"
#include "dua/rng.hpp"
#include "dua/trainer.hpp"

namespace {

using namespace dua;

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-1, 1));
  return t;
}

// Full-size widths are 200; the benchmarks default to a desk-sized 50.
model::DuaConfig bench_config(std::size_t width) {
  model::DuaConfig c;
  c.max_utterances = 10;
  c.max_words = 50;
  c.emb_dim = c.utt_hidden = c.flow_hidden = c.turns_hidden = c.attention_width = width;
  c.n_filters = 8;
  c.vocab_size = 1000;
  c.init_scale = 0.1;
  return c;
}

EncodedSample full_sample(Rng& rng, const model::DuaConfig& c) {
  EncodedSample s;
  s.max_utterances = c.max_utterances;
  s.max_words = c.max_words;
  s.turns = c.max_utterances;
  s.utterance_ids.resize(c.max_utterances * c.max_words);
  s.utterance_lengths.assign(c.max_utterances, c.max_words);
  for (auto& id : s.utterance_ids) id = static_cast<std::int32_t>(1 + rng.below(c.vocab_size - 1));
  s.response_ids.resize(c.max_words);
  for (auto& id : s.response_ids) id = static_cast<std::int32_t>(1 + rng.below(c.vocab_size - 1));
  s.response_length = c.max_words;
  s.label = 1;
  return s;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(ops::matmul(tape.constant(a), tape.constant(b)).value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(50)->Arg(200);

void BM_GruSequenceForwardBackward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ParamMap p;
  for (const char* w : {"g.W_z", "g.W_r", "g.W_h"}) p[w] = random_tensor(rng, {h, h});
  for (const char* v : {"g.V_z", "g.V_r", "g.V_h"}) p[v] = random_tensor(rng, {h, h});
  const Tensor xs = random_tensor(rng, {50, h});
  for (auto _ : state) {
    ad::Tape tape;
    auto out = layers::gru_sequence(layers::bind_gru(tape, p, "g"), tape.constant(xs), 50);
    benchmark::DoNotOptimize(tape.backward(ops::sum(out)));
  }
}
BENCHMARK(BM_GruSequenceForwardBackward)->Arg(50)->Arg(200);

void BM_ConvPool(benchmark::State& state) {
  Rng rng(3);
  const Tensor m = random_tensor(rng, {50, 50}), k = random_tensor(rng, {3, 3});
  for (auto _ : state) {
    ad::Tape tape;
    auto c = ops::conv2d_valid(tape.constant(m), tape.constant(k), tape.constant(Tensor({1}, {0.1})));
    benchmark::DoNotOptimize(ops::maxpool2d(c, 3).value()[0]);
  }
}
BENCHMARK(BM_ConvPool);

void BM_ModelScore(benchmark::State& state) {
  const auto c = bench_config(static_cast<std::size_t>(state.range(0)));
  const auto p = model::init_params(c);
  Rng rng(4);
  const auto s = full_sample(rng, c);
  for (auto _ : state) benchmark::DoNotOptimize(model::score(c, p, s).score);
}
BENCHMARK(BM_ModelScore)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_BatchGradient(benchmark::State& state) {
  const auto c = bench_config(50);
  const auto p = model::init_params(c);
  Rng rng(5);
  std::vector<EncodedSample> samples;
  for (int i = 0; i < 8; ++i) samples.push_back(full_sample(rng, c));
  std::vector<const EncodedSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train::batch_gradient(c, p, batch, 2, threads).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_BatchGradient)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Summarize(benchmark::State& state) {
  Rng rng(6);
  std::vector<eval::RankedGroup> groups(1000);
  for (auto& g : groups) {
    for (int i = 0; i < 10; ++i) {
      g.scores.push_back(rng.uniform());
      g.labels.push_back(i == 0);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::summarize(groups).map);
}
BENCHMARK(BM_Summarize);

}  // namespace

BENCHMARK_MAIN();
