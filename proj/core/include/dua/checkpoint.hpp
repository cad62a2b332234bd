#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "dua/adam.hpp"
#include "dua/model.hpp"
#include "dua/vocabulary.hpp"

namespace dua::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::size_t epoch = 0;
  double validation_score = 0;
  std::string validation_metric = "R@1";
};

/// Everything needed to rebuild a trained model.
///
/// Binary layout (all integers and reals little-endian):
///   "DUA1"  u32 version  u8 bytes-per-real
///   u64 n, config text   (key=value lines)
///   u64 n, vocabulary    ("token TAB id" lines)
///   u64 n, metadata text (key=value lines)
///   u32 count, then per parameter:
///     u32 n, name  u32 rank  u64 dims[rank]  reals[prod(dims)]
///   u8 has_adam; when 1:
///     u64 step  f64 lr  f64 beta1  f64 beta2  f64 eps
///     per parameter in the same order: m reals, v reals
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  model::DuaConfig config;
  data::Vocabulary vocab;
  ParamMap params;
  std::optional<AdamState> adam;
  TrainingMeta meta;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws FormatError naming the byte offset of the first problem; never
/// returns a partially read checkpoint.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dua::train
