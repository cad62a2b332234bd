#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dua/model.hpp"
#include "dua/trainer.hpp"

namespace dua::config {

/// Everything a `key = value` config file can set.
struct Settings {
  model::DuaConfig model;
  train::TrainPlan plan;
  std::size_t min_count = 1;
  std::string embeddings;  // optional pretrained vector file
  std::string stop_words;  // optional stop-word list for retrieval
};

/// Sets one key. Throws ParseError for unknown keys or malformed values.
void apply(Settings& settings, const std::string& key, const std::string& value);

/// `key = value` lines; blank lines and text after '#' are ignored.
Settings parse_settings(std::istream& in, Settings base = {});
Settings load_settings(const std::filesystem::path& path, Settings base = {});
std::string format_settings(const Settings& settings);

/// Model-only key=value text as stored in checkpoints.
std::string format_model_config(const model::DuaConfig& config);
model::DuaConfig parse_model_config(const std::string& text);

}  // namespace dua::config
