#include "dua/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "dua/error.hpp"
#include "dua/ops.hpp"
#include "dua/evaluate.hpp"
#include "dua/rng.hpp"

namespace dua::train {
namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct ShardResult {
  double loss_sum = 0;
  ad::GradientMap grads;
};

ShardResult shard_gradient(const model::DuaConfig& config, const ParamMap& params,
                           std::span<const EncodedSample* const> shard, double scale) {
  ad::Tape tape;
  tape.set_check_finite(true);
  const auto vars = model::bind(tape, config, params);
  std::vector<ad::Var> losses;
  losses.reserve(shard.size());
  for (const EncodedSample* s : shard) {
    auto out = model::forward(config, vars, *s);
    losses.push_back(model::loss(out, s->label));
  }
  ad::Var total = ops::sum(ops::concat(losses));
  ShardResult r;
  r.loss_sum = total.value().item();
  r.grads = tape.backward(ops::scale(total, static_cast<Real>(scale)));
  return r;
}

}  // namespace

void TrainPlan::validate() const {
  if (batch_size == 0) throw ContractError("train: batch_size must be positive");
  if (shard_size == 0) throw ContractError("train: shard_size must be positive");
  if (valid_group_size == 0) throw ContractError("train: valid_group_size must be positive");
  if (!(learning_rate > 0)) throw ContractError("train: learning_rate must be positive");
  if (!eval::is_metric_name(valid_metric)) throw ContractError("train: unknown validation metric '" + valid_metric + "'");
}

TrainingError::TrainingError(std::size_t epoch, std::size_t batch, std::string op)
    : std::runtime_error("non-finite value in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                         ", produced by '" + op + "'"),
      epoch_(epoch),
      batch_(batch),
      op_(std::move(op)) {}

BatchGradient batch_gradient(const model::DuaConfig& config, const ParamMap& params,
                             std::span<const EncodedSample* const> batch, std::size_t shard_size,
                             std::size_t threads) {
  if (batch.empty()) throw ContractError("batch_gradient: empty batch");
  if (shard_size == 0) throw ContractError("batch_gradient: shard_size must be positive");
  const std::size_t n_shards = (batch.size() + shard_size - 1) / shard_size;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<ShardResult> results(n_shards);
  std::vector<std::exception_ptr> errors(n_shards);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n_shards;) {
      try {
        const std::size_t begin = i * shard_size;
        const std::size_t count = std::min(shard_size, batch.size() - begin);
        results[i] = shard_gradient(config, params, batch.subspan(begin, count), scale);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n_shards);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchGradient out;
  double loss_sum = 0;
  out.grads = std::move(results[0].grads);
  loss_sum = results[0].loss_sum;
  for (std::size_t i = 1; i < n_shards; ++i) {
    loss_sum += results[i].loss_sum;
    for (auto& [name, g] : out.grads) {
      const Tensor& add = results[i].grads.at(name);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += add[j];
    }
  }
  out.loss = loss_sum * scale;
  return out;
}

TrainResult train(const TrainPlan& plan, const model::DuaConfig& config, const data::Vocabulary& vocab,
                  std::span<const EncodedSample> train_set, std::span<const EncodedSample> valid_set,
                  std::optional<ParamMap> initial, const TrainLog& log) {
  plan.validate();
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  auto emit = [&](const std::string& line) {
    if (log) log(line);
  };

  ParamMap params = initial ? std::move(*initial) : model::init_params(config);
  model::check_params(config, params);
  AdamState adam = AdamState::for_params(params, plan.learning_rate);
  Rng rng(plan.seed);

  TrainResult result;
  result.best.config = config;
  result.best.vocab = vocab;
  result.best.params = params;
  result.best.meta.validation_metric = plan.valid_metric;
  double best_score = -1;

  std::vector<std::size_t> order(train_set.size());
  const std::size_t batches = (train_set.size() + plan.batch_size - 1) / plan.batch_size;

  for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    double epoch_loss = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * plan.batch_size;
      const std::size_t end = std::min(begin + plan.batch_size, order.size());
      std::vector<const EncodedSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);

      BatchGradient bg;
      try {
        bg = batch_gradient(config, params, batch, plan.shard_size, plan.threads);
      } catch (const NonFiniteError& e) {
        throw TrainingError(epoch, b + 1, e.op());
      }
      if (!std::isfinite(bg.loss)) throw TrainingError(epoch, b + 1, "loss");
      const double norm = clip_global_norm(bg.grads, plan.clip_norm);
      if (!std::isfinite(norm)) throw TrainingError(epoch, b + 1, "gradient");
      adam_step(params, bg.grads, adam);

      result.batches.push_back({epoch, b + 1, batch.size(), bg.loss, norm});
      epoch_loss += bg.loss * static_cast<double>(batch.size());
      emit("epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1) + "/" + std::to_string(batches) +
           " size " + std::to_string(batch.size()) + " loss " + fixed(bg.loss) + " grad_norm " + fixed(norm));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = epoch_loss / static_cast<double>(train_set.size());
    double score = 0;
    std::string line = "epoch " + std::to_string(epoch) + " mean_loss " + fixed(rec.mean_loss);
    if (plan.track_train_accuracy) {
      const auto scores = eval::score_samples(config, params, train_set, plan.threads);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > 0.5) == (train_set[i].label == 1);
      rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
      line += " train_acc " + fixed(*rec.train_accuracy);
    }
    if (!valid_set.empty()) {
      rec.validation = eval::evaluate_model(config, params, valid_set, plan.valid_group_size, plan.threads);
      score = rec.validation.metric(plan.valid_metric);
      for (const char* m : {"MAP", "MRR", "P@1", "R@1", "R@2", "R@5"}) {
        line += std::string(" valid_") + m + " " + fixed(rec.validation.metric(m));
      }
    }
    result.epochs.push_back(rec);

    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.vocab = vocab;
    ckpt.params = params;
    ckpt.adam = adam;
    ckpt.meta = {epoch, score, plan.valid_metric};
    // Strictly better wins; the earliest epoch keeps ties. Without a
    // validation set the latest epoch is kept.
    const bool improved = valid_set.empty() || score > best_score;
    if (improved) {
      best_score = score;
      result.best = ckpt;
      result.best_epoch = epoch;
      line += " best";
    }
    if (plan.checkpoint_dir) {
      save_checkpoint(*plan.checkpoint_dir / ("epoch-" + std::to_string(epoch) + ".ckpt"), ckpt);
      if (improved) save_checkpoint(*plan.checkpoint_dir / "best.ckpt", ckpt);
    }
    emit(line);
  }
  result.final_params = std::move(params);
  return result;
}

}  // namespace dua::train
