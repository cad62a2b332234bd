#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dua/checkpoint.hpp"
#include "dua/corpus.hpp"
#include "dua/error.hpp"
#include "dua/evaluate.hpp"
#include "dua/model.hpp"
#include "dua/retrieval.hpp"
#include "dua/settings.hpp"
#include "dua/tfidf.hpp"
#include "dua/trainer.hpp"
#include "dua/vocabulary.hpp"

namespace dua::cli {
namespace fs = std::filesystem;
namespace {

/// Error raised by a command; `stage` prefixes the message.
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& msg) : std::runtime_error(msg), stage(std::move(stage)) {}
  std::string stage;
};

std::string fmt_real(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_context(const std::string& text) {
  std::vector<std::string> utts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find("||", start);
    std::string part = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (data::tokenize(part).empty()) {
      throw StageError("rank", "malformed context: utterance " + std::to_string(utts.size() + 1) + " is empty");
    }
    utts.push_back(std::move(part));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return utts;
}

data::SampleShape shape_of(const model::DuaConfig& c) { return {c.max_utterances, c.max_words}; }

std::vector<data::RawDialogue> load_corpus(const std::string& stage, const fs::path& path) {
  try {
    return data::load_tsv_corpus(path);
  } catch (const std::exception& e) {
    throw StageError(stage, path.string() + ": " + e.what());
  }
}

train::Checkpoint load_model(const std::string& stage, const fs::path& path) {
  try {
    return train::load_checkpoint(path);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

/// Encodes a corpus used for grouped evaluation, where dropping a sample
/// would shift every later group.
std::vector<EncodedSample> encode_for_eval(const std::string& stage, const std::vector<data::RawDialogue>& raw,
                                           const train::Checkpoint& ckpt) {
  auto enc = data::encode_corpus(raw, ckpt.vocab, shape_of(ckpt.config));
  if (!enc.skipped.empty()) {
    throw StageError(stage, "line " + std::to_string(enc.skipped.front() + 1) + " has an empty response");
  }
  return std::move(enc.samples);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void print_banner(std::ostream& out, const config::Settings& s) {
  out << "configuration:\n";
  std::istringstream lines(config::format_settings(s));
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && line[0] != '#') out << "  " << line << '\n';
  out << "parameters:\n";
  std::size_t total = 0;
  for (const auto& [name, shape] : model::parameter_shapes(s.model)) {
    out << "  " << name << ' ' << shape_string(shape) << ' ' << shape_size(shape) << '\n';
    total += shape_size(shape);
  }
  out << "  total " << total << '\n';
}

// ---------------------------------------------------------------- commands

struct PrepareArgs {
  std::string pool, positives, mode = "train", out, stop_words;
  std::size_t ratio = 1;
  std::uint64_t seed = 1;
};

void cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const std::string stage = "prepare-data";
  std::vector<std::string> pool;
  std::set<std::string> stops;
  try {
    pool = data::load_response_pool(a.pool);
    if (!a.stop_words.empty()) stops = data::load_stop_words(a.stop_words);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  auto positives = load_corpus(stage, a.positives);
  const auto mode = a.mode == "test" ? data::SamplingMode::test : data::SamplingMode::train;
  std::vector<data::RawDialogue> result;
  try {
    data::CandidateIndex index(pool, stops);
    result = data::negative_sample(positives, index, a.ratio, a.seed, mode);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  std::ofstream file(a.out, std::ios::binary);
  if (!file) throw StageError(stage, "cannot write " + a.out);
  data::write_tsv_corpus(file, result);
  out << "wrote " << result.size() << " samples (" << positives.size() << " contexts x " << a.ratio + 1
      << " candidates) to " << a.out << '\n';
}

struct TrainArgs {
  std::string train, valid, config, out;
  std::vector<std::string> overrides;  // key=value, applied in order after the file
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const std::string stage = "train";
  config::Settings s;
  try {
    if (!a.config.empty()) s = config::load_settings(a.config);
    for (const auto& kv : a.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("override '" + kv + "' is not key=value");
      config::apply(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }

  auto train_raw = load_corpus(stage, a.train);
  auto valid_raw = a.valid.empty() ? std::vector<data::RawDialogue>{} : load_corpus(stage, a.valid);

  const auto vocab = data::Vocabulary::build(train_raw, s.min_count);
  s.model.vocab_size = vocab.size();
  if (!s.plan.checkpoint_dir) s.plan.checkpoint_dir = a.out;
  try {
    s.model.validate();
    s.plan.validate();
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }

  ParamMap params = model::init_params(s.model);
  if (!s.embeddings.empty()) {
    try {
      const std::size_t filled = data::load_pretrained_embeddings(fs::path(s.embeddings), vocab, params.at("embedding"));
      out << "pretrained embeddings: " << filled << " of " << vocab.size() << " rows\n";
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

  auto train_enc = data::encode_corpus(train_raw, vocab, shape_of(s.model));
  if (!train_enc.skipped.empty()) out << "skipped " << train_enc.skipped.size() << " training samples with empty responses\n";
  auto valid_enc = data::encode_corpus(valid_raw, vocab, shape_of(s.model));
  if (!valid_enc.skipped.empty()) {
    throw StageError(stage, a.valid + " line " + std::to_string(valid_enc.skipped.front() + 1) + " has an empty response");
  }

  fs::create_directories(a.out);
  print_banner(out, s);
  write_text(fs::path(a.out) / "config.txt", config::format_settings(s));
  out << "training on " << train_enc.samples.size() << " samples, validating on " << valid_enc.samples.size() << '\n';

  std::ofstream log(fs::path(a.out) / "train.log");
  auto sink = [&](const std::string& line) {
    log << line << '\n';
    if (line.find(" batch ") == std::string::npos) out << line << '\n';
  };
  train::TrainResult result;
  try {
    result = train::train(s.plan, s.model, vocab, train_enc.samples, valid_enc.samples, std::move(params), sink);
  } catch (const train::TrainingError& e) {
    log << "abort " << e.what() << '\n';
    throw StageError(stage, e.what());
  }
  train::save_checkpoint(fs::path(a.out) / "best.ckpt", result.best);
  out << "best epoch " << result.best_epoch << " (" << s.plan.valid_metric << ' '
      << fmt_real(result.best.meta.validation_score) << "), checkpoint " << (fs::path(a.out) / "best.ckpt").string()
      << '\n';
}

struct EvalArgs {
  std::string model, test, format = "table";
  std::size_t group_size = 10;
  std::size_t threads = 1;
};

void print_report(std::ostream& out, const eval::MetricsReport& r, const std::string& format) {
  out << (format == "kv" ? r.key_values() : r.table());
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::string stage = "eval";
  const auto ckpt = load_model(stage, a.model);
  const auto raw = load_corpus(stage, a.test);
  const auto samples = encode_for_eval(stage, raw, ckpt);
  try {
    print_report(out, eval::evaluate_model(ckpt.config, ckpt.params, samples, a.group_size, a.threads), a.format);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct TfidfArgs {
  std::string train, test, format = "table";
  std::size_t group_size = 10;
};

void cmd_eval_tfidf(const TfidfArgs& a, std::ostream& out) {
  const std::string stage = "eval-tfidf";
  const auto fit = baseline::TfidfModel::fit(load_corpus(stage, a.train));
  const auto test = load_corpus(stage, a.test);
  try {
    print_report(out, baseline::evaluate_tfidf(fit, test, a.group_size), a.format);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct RankArgs {
  std::string model, context, candidates;
};

void cmd_rank(const RankArgs& a, std::ostream& out) {
  const std::string stage = "rank";
  const auto ckpt = load_model(stage, a.model);
  const auto context = split_context(a.context);
  std::ifstream in(a.candidates);
  if (!in) throw StageError(stage, "cannot open " + a.candidates);
  std::vector<std::string> candidates;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!data::tokenize(line).empty()) candidates.push_back(line);
  }
  if (candidates.empty()) throw StageError(stage, a.candidates + " has no candidates");

  std::vector<double> scores;
  for (const auto& c : candidates) {
    auto sample = data::encode({0, context, c, {}}, ckpt.vocab, shape_of(ckpt.config));
    scores.push_back(model::score(ckpt.config, ckpt.params, *sample).score);
  }
  eval::RankedGroup g;
  g.scores = scores;
  g.labels.assign(scores.size(), 0);
  for (std::size_t i : eval::rank_group(g)) out << fmt_real(scores[i], "%.6f") << '\t' << candidates[i] << '\n';
}

struct InspectArgs {
  std::string model, test, out;
  std::size_t line = 1;
};

void write_matrix(const fs::path& dir, const std::string& stem, const std::vector<std::string>& query,
                  const std::vector<std::string>& key, const std::vector<std::vector<double>>& weights) {
  std::ofstream csv(dir / (stem + ".csv"));
  for (const auto& row : weights) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << fmt_real(row[i], "%.17g");
    csv << '\n';
  }
  nlohmann::json j;
  j["tokens_query"] = query;
  j["tokens_key"] = key;
  j["weights"] = weights;
  std::ofstream(dir / (stem + ".json")) << j.dump(2) << '\n';
}

std::vector<std::vector<double>> attention_rows(const std::vector<Tensor>& rows, std::size_t length) {
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < length && t < rows.size(); ++t) {
    std::vector<double> r;
    for (std::size_t i = 0; i < length; ++i) r.push_back(rows[t][i]);
    out.push_back(std::move(r));
  }
  return out;
}

void cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const std::string stage = "inspect-attention";
  const auto ckpt = load_model(stage, a.model);
  const auto raw = load_corpus(stage, a.test);
  if (a.line == 0 || a.line > raw.size()) {
    throw StageError(stage, "sample line " + std::to_string(a.line) + " outside 1.." + std::to_string(raw.size()));
  }
  const auto sample = data::encode(raw[a.line - 1], ckpt.vocab, shape_of(ckpt.config));
  if (!sample) throw StageError(stage, "sample line " + std::to_string(a.line) + " has an empty response");
  if (ckpt.config.ablate_maf && ckpt.config.ablate_cf) {
    throw StageError(stage, "model has neither flow attention nor turn attention");
  }
  const auto result = model::score(ckpt.config, ckpt.params, *sample, true);
  const auto& diag = *result.diagnostics;
  const auto decoded = data::decode(*sample, ckpt.vocab);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  std::size_t files = 0;
  if (!ckpt.config.ablate_maf) {
    for (std::size_t k = 0; k < sample->turns; ++k) {
      const auto& tokens = decoded.context[k];
      if (tokens.empty()) continue;
      write_matrix(dir, "utterance_" + std::to_string(k + 1), tokens, tokens,
                   attention_rows(diag.utterance_flow[k], tokens.size()));
      files += 2;
    }
    write_matrix(dir, "response", decoded.response, decoded.response,
                 attention_rows(diag.response_flow, decoded.response.size()));
    files += 2;
  }
  if (diag.turn_weights) {
    std::vector<std::string> turns;
    std::vector<double> alpha;
    for (std::size_t k = 0; k < sample->turns; ++k) {
      turns.push_back("utterance_" + std::to_string(k + 1));
      alpha.push_back((*diag.turn_weights)[k]);
    }
    write_matrix(dir, "turn_weights", {"response"}, turns, {alpha});
    files += 2;
  }
  out << "score " << fmt_real(result.score) << "; wrote " << files << " files to " << a.out << '\n';
}

struct ShowArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void cmd_show_config(const ShowArgs& a, std::ostream& out) {
  config::Settings s;
  try {
    if (!a.config.empty()) s = config::load_settings(a.config);
    for (const auto& kv : a.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("override '" + kv + "' is not key=value");
      config::apply(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    s.model.validate();
  } catch (const std::exception& e) {
    throw StageError("show-config", e.what());
  }
  print_banner(out, s);
}

/// Adds a flag that appends "key=value" to `overrides` when given.
template <class T>
void override_option(CLI::App* cmd, std::vector<std::string>& overrides, const std::string& flag, const std::string& key,
                     const std::string& help) {
  cmd->add_option_function<T>(
      flag, [&overrides, key](const T& v) {
        std::ostringstream s;
        s << v;
        overrides.push_back(key + "=" + s.str());
      },
      help);
}

void add_model_overrides(CLI::App* cmd, std::vector<std::string>& ov) {
  cmd->add_option("--set", ov, "Override any config key (key=value), repeatable");
  override_option<std::size_t>(cmd, ov, "--epochs", "epochs", "Training epochs");
  override_option<std::size_t>(cmd, ov, "--batch-size", "batch_size", "Mini-batch size");
  override_option<std::string>(cmd, ov, "--lr", "learning_rate", "Adam learning rate");
  override_option<std::uint64_t>(cmd, ov, "--seed", "seed", "Initialization and shuffling seed");
  override_option<std::size_t>(cmd, ov, "--threads", "threads", "Worker threads");
  override_option<std::string>(cmd, ov, "--fusion", "fusion", "concat, sum or mul");
  override_option<std::size_t>(cmd, ov, "--max-utterances", "max_utterances", "Context turns kept");
  override_option<std::size_t>(cmd, ov, "--max-words", "max_words", "Words kept per sequence");
  override_option<std::size_t>(cmd, ov, "--valid-group-size", "valid_group_size", "Candidates per validation context");
  override_option<std::string>(cmd, ov, "--valid-metric", "valid_metric", "Selection metric");
  cmd->add_flag_callback("--ablate-maf", [&ov] { ov.push_back("ablate_maf=true"); }, "Plain GRU instead of the attention flow");
  cmd->add_flag_callback("--ablate-cf", [&ov] { ov.push_back("ablate_cf=true"); }, "No turns-aware fusion; MLP aggregation");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep utterance aggregation for multi-turn response selection", "dua"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare-data", "Add negative candidates to positive pairs");
  c_prep->add_option("--pool", prep.pool, "Response pool, one response per line")->required();
  c_prep->add_option("--positives", prep.positives, "TSV corpus of positive pairs")->required();
  c_prep->add_option("--mode", prep.mode, "train (uniform) or test (retrieved)")
      ->check(CLI::IsMember({"train", "test"}));
  c_prep->add_option("--ratio", prep.ratio, "Negatives per positive");
  c_prep->add_option("--seed", prep.seed, "Sampling seed");
  c_prep->add_option("--stop-words", prep.stop_words, "Stop-word list for retrieval");
  c_prep->add_option("--out", prep.out, "Output TSV")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model");
  c_train->add_option("--train", tr.train, "Training TSV")->required();
  c_train->add_option("--valid", tr.valid, "Validation TSV");
  c_train->add_option("--config", tr.config, "key=value config file");
  c_train->add_option("--out", tr.out, "Output directory")->required();
  add_model_overrides(c_train, tr.overrides);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Rank grouped candidates and report metrics");
  c_eval->add_option("--model", ev.model, "Checkpoint")->required();
  c_eval->add_option("--test", ev.test, "Test TSV")->required();
  c_eval->add_option("--group-size", ev.group_size, "Candidates per context");
  c_eval->add_option("--threads", ev.threads, "Worker threads");
  c_eval->add_option("--format", ev.format, "table or kv")->check(CLI::IsMember({"table", "kv"}));

  TfidfArgs tf;
  auto* c_tfidf = app.add_subcommand("eval-tfidf", "Evaluate the tf-idf baseline");
  c_tfidf->add_option("--train", tf.train, "Corpus for document frequencies")->required();
  c_tfidf->add_option("--test", tf.test, "Test TSV")->required();
  c_tfidf->add_option("--group-size", tf.group_size, "Candidates per context");
  c_tfidf->add_option("--format", tf.format, "table or kv")->check(CLI::IsMember({"table", "kv"}));

  RankArgs rk;
  auto* c_rank = app.add_subcommand("rank", "Score candidates for one context");
  c_rank->add_option("--model", rk.model, "Checkpoint")->required();
  c_rank->add_option("--context", rk.context, "Utterances separated by ||")->required();
  c_rank->add_option("--candidates", rk.candidates, "One candidate per line")->required();

  InspectArgs in;
  auto* c_inspect = app.add_subcommand("inspect-attention", "Export attention weights of one sample");
  c_inspect->add_option("--model", in.model, "Checkpoint")->required();
  c_inspect->add_option("--test", in.test, "TSV corpus")->required();
  c_inspect->add_option("--sample-line", in.line, "1-based line of the sample")->required();
  c_inspect->add_option("--out", in.out, "Output directory")->required();

  ShowArgs sh;
  auto* c_show = app.add_subcommand("show-config", "Print the effective configuration and parameter list");
  c_show->add_option("--config", sh.config, "key=value config file");
  add_model_overrides(c_show, sh.overrides);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; every other parse failure is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*c_prep) cmd_prepare(prep, out);
    else if (*c_train) cmd_train(tr, out);
    else if (*c_eval) cmd_eval(ev, out);
    else if (*c_tfidf) cmd_eval_tfidf(tf, out);
    else if (*c_rank) cmd_rank(rk, out);
    else if (*c_inspect) cmd_inspect(in, out);
    else if (*c_show) cmd_show_config(sh, out);
  } catch (const StageError& e) {
    err << "dua " << e.stage << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "dua " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dua::cli
