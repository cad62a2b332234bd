#include "dua/settings.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dua/error.hpp"
#include "dua/metrics.hpp"

namespace dua::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ParseError("config: key '" + key + "' expects " + expected + ", got '" + value + "'");
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

Real parse_real(const std::string& key, const std::string& value) {
  double out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return static_cast<Real>(out);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true or false");
}

std::string real_text(Real v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<double>(v));
  return std::string(buf, ptr);
}

using Setter = std::function<void(Settings&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_field = [&](const char* name, auto member) {
      t[name] = [member](Settings& s, const std::string& k, const std::string& v) {
        s.model.*member = parse_unsigned<std::size_t>(k, v);
      };
    };
    size_field("max_utterances", &model::DuaConfig::max_utterances);
    size_field("max_words", &model::DuaConfig::max_words);
    size_field("emb_dim", &model::DuaConfig::emb_dim);
    size_field("utt_hidden", &model::DuaConfig::utt_hidden);
    size_field("flow_hidden", &model::DuaConfig::flow_hidden);
    size_field("turns_hidden", &model::DuaConfig::turns_hidden);
    size_field("attention_width", &model::DuaConfig::attention_width);
    size_field("n_filters", &model::DuaConfig::n_filters);
    size_field("kernel_size", &model::DuaConfig::kernel_size);
    size_field("pool", &model::DuaConfig::pool);
    size_field("vocab_size", &model::DuaConfig::vocab_size);
    t["fusion"] = [](Settings& s, const std::string& k, const std::string& v) {
      try {
        s.model.fusion = model::parse_fusion(v);
      } catch (const std::exception&) {
        bad_value(k, v, "concat, sum or mul");
      }
    };
    t["ablate_cf"] = [](Settings& s, const std::string& k, const std::string& v) { s.model.ablate_cf = parse_bool(k, v); };
    t["ablate_maf"] = [](Settings& s, const std::string& k, const std::string& v) { s.model.ablate_maf = parse_bool(k, v); };
    t["seed"] = [](Settings& s, const std::string& k, const std::string& v) {
      s.model.seed = parse_unsigned<std::uint64_t>(k, v);
      s.plan.seed = s.model.seed;
    };
    t["init_scale"] = [](Settings& s, const std::string& k, const std::string& v) { s.model.init_scale = parse_real(k, v); };

    t["batch_size"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.batch_size = parse_unsigned<std::size_t>(k, v); };
    t["epochs"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.epochs = parse_unsigned<std::size_t>(k, v); };
    t["shuffle_seed"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.seed = parse_unsigned<std::uint64_t>(k, v); };
    t["learning_rate"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.learning_rate = parse_real(k, v); };
    t["clip_norm"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.clip_norm = parse_real(k, v); };
    t["valid_metric"] = [](Settings& s, const std::string& k, const std::string& v) {
      if (!eval::is_metric_name(v)) bad_value(k, v, "one of MAP, MRR, P@1, R@1, R@2, R@5");
      s.plan.valid_metric = v;
    };
    t["valid_group_size"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.valid_group_size = parse_unsigned<std::size_t>(k, v); };
    t["threads"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.threads = parse_unsigned<std::size_t>(k, v); };
    t["shard_size"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.shard_size = parse_unsigned<std::size_t>(k, v); };
    t["track_train_accuracy"] = [](Settings& s, const std::string& k, const std::string& v) { s.plan.track_train_accuracy = parse_bool(k, v); };
    t["checkpoint_dir"] = [](Settings& s, const std::string&, const std::string& v) {
      if (v.empty()) s.plan.checkpoint_dir.reset();
      else s.plan.checkpoint_dir = v;
    };

    t["min_count"] = [](Settings& s, const std::string& k, const std::string& v) { s.min_count = parse_unsigned<std::size_t>(k, v); };
    t["embeddings"] = [](Settings& s, const std::string&, const std::string& v) { s.embeddings = v; };
    t["stop_words"] = [](Settings& s, const std::string&, const std::string& v) { s.stop_words = v; };
    return t;
  }();
  return table;
}

void model_lines(std::ostream& out, const model::DuaConfig& c) {
  out << "max_utterances=" << c.max_utterances << '\n'
      << "max_words=" << c.max_words << '\n'
      << "emb_dim=" << c.emb_dim << '\n'
      << "utt_hidden=" << c.utt_hidden << '\n'
      << "flow_hidden=" << c.flow_hidden << '\n'
      << "turns_hidden=" << c.turns_hidden << '\n'
      << "attention_width=" << c.attention_width << '\n'
      << "n_filters=" << c.n_filters << '\n'
      << "kernel_size=" << c.kernel_size << '\n'
      << "pool=" << c.pool << '\n'
      << "fusion=" << model::to_string(c.fusion) << '\n'
      << "ablate_cf=" << (c.ablate_cf ? "true" : "false") << '\n'
      << "ablate_maf=" << (c.ablate_maf ? "true" : "false") << '\n'
      << "vocab_size=" << c.vocab_size << '\n'
      << "seed=" << c.seed << '\n'
      << "init_scale=" << real_text(c.init_scale) << '\n';
}

}  // namespace

void apply(Settings& settings, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ParseError("config: unknown key '" + key + "'");
  it->second(settings, key, value);
}

Settings parse_settings(std::istream& in, Settings base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    try {
      apply(base, key, value);
    } catch (const ParseError& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

Settings load_settings(const std::filesystem::path& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  return parse_settings(in, std::move(base));
}

std::string format_settings(const Settings& s) {
  std::ostringstream out;
  out << "# model\n";
  model_lines(out, s.model);
  out << "# training\n"
      << "batch_size=" << s.plan.batch_size << '\n'
      << "epochs=" << s.plan.epochs << '\n'
      << "shuffle_seed=" << s.plan.seed << '\n'
      << "learning_rate=" << real_text(s.plan.learning_rate) << '\n'
      << "clip_norm=" << real_text(s.plan.clip_norm) << '\n'
      << "valid_metric=" << s.plan.valid_metric << '\n'
      << "valid_group_size=" << s.plan.valid_group_size << '\n'
      << "threads=" << s.plan.threads << '\n'
      << "shard_size=" << s.plan.shard_size << '\n'
      << "track_train_accuracy=" << (s.plan.track_train_accuracy ? "true" : "false") << '\n'
      << "checkpoint_dir=" << (s.plan.checkpoint_dir ? s.plan.checkpoint_dir->string() : "") << '\n'
      << "# data\n"
      << "min_count=" << s.min_count << '\n'
      << "embeddings=" << s.embeddings << '\n'
      << "stop_words=" << s.stop_words << '\n';
  return out.str();
}

std::string format_model_config(const model::DuaConfig& config) {
  std::ostringstream out;
  model_lines(out, config);
  return out.str();
}

model::DuaConfig parse_model_config(const std::string& text) {
  static const std::set<std::string> model_keys = {
      "max_utterances", "max_words", "emb_dim", "utt_hidden", "flow_hidden", "turns_hidden",
      "attention_width", "n_filters", "kernel_size", "pool", "fusion", "ablate_cf",
      "ablate_maf", "vocab_size", "seed", "init_scale"};
  std::istringstream in(text);
  std::string line;
  Settings s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("model config: expected key=value, got '" + line + "'");
    const std::string key = line.substr(0, eq);
    if (!model_keys.contains(key)) throw ParseError("model config: unknown key '" + key + "'");
    apply(s, key, line.substr(eq + 1));
  }
  return s.model;
}

}  // namespace dua::config
