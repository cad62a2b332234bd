#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dua/checkpoint.hpp"
#include "dua/metrics.hpp"
#include "dua/model.hpp"
#include "dua/sample.hpp"

namespace dua::train {

struct TrainPlan {
  std::size_t batch_size = 200;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  Real learning_rate = 0.001;
  Real clip_norm = 5.0;
  std::string valid_metric = "R@1";
  std::size_t valid_group_size = 10;
  std::size_t threads = 1;
  /// Samples per tape. Gradients are summed shard by shard in a fixed order,
  /// so results do not depend on `threads`.
  std::size_t shard_size = 25;
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Score the training set after every epoch (costs one forward pass).
  bool track_train_accuracy = false;

  void validate() const;
};

/// Raised when a batch produces NaN or Inf.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch, std::string op);

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  const std::string& op() const noexcept { return op_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  std::string op_;
};

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t size = 0;
  double loss = 0;       // mean over the batch
  double grad_norm = 0;  // before clipping
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0;
  std::optional<double> train_accuracy;  // share of samples with (score > 0.5) == label
  eval::MetricsReport validation;
};

struct TrainResult {
  Checkpoint best;  // parameters of the best validation epoch
  ParamMap final_params;
  std::vector<BatchRecord> batches;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

using TrainLog = std::function<void(const std::string&)>;

/// Mean loss and summed gradients of one batch.
struct BatchGradient {
  double loss = 0;
  ad::GradientMap grads;
};

/// Loss is the mean cross-entropy over `batch`; gradients are of that mean.
BatchGradient batch_gradient(const model::DuaConfig& config, const ParamMap& params,
                             std::span<const EncodedSample* const> batch, std::size_t shard_size,
                             std::size_t threads);

/// Mini-batch Adam over `train_set`, evaluating on `valid_set` after every
/// epoch. `initial` defaults to init_params(config). Deterministic for a
/// fixed plan, config and data.
TrainResult train(const TrainPlan& plan, const model::DuaConfig& config, const data::Vocabulary& vocab,
                  std::span<const EncodedSample> train_set, std::span<const EncodedSample> valid_set,
                  std::optional<ParamMap> initial = std::nullopt, const TrainLog& log = {});

}  // namespace dua::train
