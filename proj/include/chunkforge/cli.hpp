// Command-line front end: run-configuration files, the train / grid / eval /
// gradcheck / stats subcommands, and the exit-code policy.
//
//   0  success
//   1  verification failure (gradcheck over threshold, oracle mismatch) or
//      an internal error
//   2  usage or configuration error
//   3  data error (unreadable or malformed corpus, embedding, checkpoint)
//
// Each subcommand is a plain function over a small options struct so the
// test suite can drive it in-process; run_cli() adds argument parsing and
// maps exceptions to exit codes.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chunkforge/corpus.hpp"
#include "chunkforge/eval.hpp"
#include "chunkforge/models.hpp"

namespace chunkforge {

// ----------------------------- run configuration -----------------------------

struct RunConfig {
  ModelConfig model;
  CorpusFormat format = CorpusFormat::chunking3col;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string embeddings_path;
  std::string checkpoint_dir = "checkpoints";
  std::string log_path;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline std::size_t to_size(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

inline double to_double(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.empty()) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
  return x;
}

inline bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": expected true|false, got '" + v + "'");
}

inline CorpusFormat to_format(const std::string& v, const std::string& where) {
  if (v == "chunking3col") return CorpusFormat::chunking3col;
  if (v == "slot2col") return CorpusFormat::slot2col;
  throw ConfigError(where + ": expected chunking3col|slot2col, got '" + v + "'");
}

inline std::string format_name(CorpusFormat f) {
  return f == CorpusFormat::chunking3col ? "chunking3col" : "slot2col";
}

inline std::string format_compact(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace detail

// "key = value" lines with '#' comments; every key must be known and may
// appear at most once.
inline RunConfig parse_run_config(std::istream& in,
                                  const std::string& filename = "<config>") {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    std::string where = filename + ":" + std::to_string(line_no);
    std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    std::string key = detail::trim(text.substr(0, eq));
    std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    ModelConfig& m = cfg.model;
    if (key == "variant") m.variant = parse_variant(value);
    else if (key == "format") cfg.format = detail::to_format(value, where);
    else if (key == "train") cfg.train_path = value;
    else if (key == "valid") cfg.valid_path = value;
    else if (key == "test") cfg.test_path = value;
    else if (key == "embeddings") cfg.embeddings_path = value;
    else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
    else if (key == "log_file") cfg.log_path = value;
    else if (key == "word_dim") m.word_dim = detail::to_size(value, where);
    else if (key == "use_char_cnn") m.use_char_cnn = detail::to_bool(value, where);
    else if (key == "char_dim") m.char_dim = detail::to_size(value, where);
    else if (key == "char_filters") m.char_filters = detail::to_size(value, where);
    else if (key == "char_window") m.char_window = detail::to_size(value, where);
    else if (key == "hidden_dim") m.hidden_dim = detail::to_size(value, where);
    else if (key == "pointer_dim") m.pointer_dim = detail::to_size(value, where);
    else if (key == "length_dim") m.length_dim = detail::to_size(value, where);
    else if (key == "max_chunk_len") m.max_chunk_len = detail::to_size(value, where);
    else if (key == "context_window") m.context_window = detail::to_size(value, where);
    else if (key == "chunk_filters") m.chunk_filters = detail::to_size(value, where);
    else if (key == "chunk_window") m.chunk_window = detail::to_size(value, where);
    else if (key == "dropout") m.dropout = detail::to_double(value, where);
    else if (key == "lr0") m.lr0 = detail::to_double(value, where);
    else if (key == "decay") m.decay = detail::to_double(value, where);
    else if (key == "epochs") m.epochs = detail::to_size(value, where);
    else if (key == "valid_fraction") m.valid_fraction = detail::to_double(value, where);
    else if (key == "min_count") m.min_count = detail::to_size(value, where);
    else if (key == "seed") m.seed = detail::to_size(value, where);
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }
  cfg.model.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_run_config(in, path);
}

// The echo block printed at the start of a run; fixed key order.
inline std::string render_run_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  std::ostringstream out;
  auto kv = [&](const char* key, const std::string& value) {
    out << "config " << key << "=" << value << "\n";
  };
  kv("variant", variant_name(m.variant));
  kv("format", detail::format_name(cfg.format));
  kv("train", cfg.train_path);
  kv("valid", cfg.valid_path);
  kv("test", cfg.test_path);
  kv("embeddings", cfg.embeddings_path);
  kv("checkpoint_dir", cfg.checkpoint_dir);
  kv("log_file", cfg.log_path);
  kv("word_dim", std::to_string(m.word_dim));
  kv("use_char_cnn", m.use_char_cnn ? "true" : "false");
  kv("char_dim", std::to_string(m.char_dim));
  kv("char_filters", std::to_string(m.char_filters));
  kv("char_window", std::to_string(m.char_window));
  kv("hidden_dim", std::to_string(m.hidden_dim));
  kv("pointer_dim", std::to_string(m.pointer_dim));
  kv("length_dim", std::to_string(m.length_dim));
  kv("max_chunk_len", std::to_string(m.max_chunk_len));
  kv("context_window", std::to_string(m.context_window));
  kv("chunk_filters", std::to_string(m.chunk_filters));
  kv("chunk_window", std::to_string(m.chunk_window));
  kv("dropout", detail::format_compact(m.dropout));
  kv("lr0", detail::format_compact(m.lr0));
  kv("decay", detail::format_compact(m.decay));
  kv("epochs", std::to_string(m.epochs));
  kv("valid_fraction", detail::format_compact(m.valid_fraction));
  kv("min_count", std::to_string(m.min_count));
  kv("seed", std::to_string(m.seed));
  return out.str();
}

// ----------------------------- tee stream -----------------------------

// Mirrors everything written to one buffer into a second one (console plus
// log file).
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    int ra = a_ != nullptr ? a_->sputc(traits_type::to_char_type(c)) : c;
    int rb = b_ != nullptr ? b_->sputc(traits_type::to_char_type(c)) : c;
    return ra == traits_type::eof() || rb == traits_type::eof()
               ? traits_type::eof()
               : c;
  }
  int sync() override {
    int ra = a_ != nullptr ? a_->pubsync() : 0;
    int rb = b_ != nullptr ? b_->pubsync() : 0;
    return ra == 0 && rb == 0 ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

// ----------------------------- shared command helpers -----------------------------

struct TrainOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct GridOptions {
  std::string config_path;
  std::vector<double> lr0_values;
  std::optional<std::uint64_t> seed;
};

struct EvalOptions {
  std::string checkpoint_path;  // with test_path: model evaluation
  std::string test_path;
  std::string tagged_path;  // standalone scoring of a "token gold pred" file
  std::string oracle_path;  // scorer self-check on a corpus file
  std::string dump_path;    // write "token gold pred" for the model mode
  std::string format = "chunking3col";  // for --oracle
  bool metrics = false;
};

struct GradcheckCliOptions {
  std::string variant = "all";
  std::size_t seeds = 20;
  std::size_t coords = 6;
  double threshold = 1e-4;
};

struct StatsOptions {
  std::string train_path;
  std::string format = "chunking3col";
  double valid_fraction = 0.1;
  std::uint64_t seed = 1;
};

namespace detail {

struct PreparedData {
  std::vector<Sentence> train;
  std::vector<Sentence> valid;
  // The vocabulary always comes from the complete train file, even when the
  // validation set is split off internally: checkpoint loading rebuilds the
  // vocabulary from that file, so the two constructions must see the same
  // sentences for the recorded fingerprints to match.
  Vocab vocab;
};

inline PreparedData prepare_data(const RunConfig& cfg) {
  if (cfg.train_path.empty()) {
    throw ConfigError("config is missing 'train = <corpus file>'");
  }
  PreparedData data;
  if (!cfg.valid_path.empty()) {
    data.train = parse_conll_file(cfg.train_path, cfg.format);
    data.valid = parse_conll_file(cfg.valid_path, cfg.format);
    data.vocab = build_vocab(data.train, cfg.model.min_count);
  } else {
    auto all = parse_conll_file(cfg.train_path, cfg.format);
    data.vocab = build_vocab(all, cfg.model.min_count);
    auto split = split_train_valid(all, cfg.model.valid_fraction, cfg.model.seed);
    data.train = std::move(split.first);
    data.valid = std::move(split.second);
  }
  if (data.train.empty()) throw ConfigError("training set is empty");
  return data;
}

inline void apply_embeddings(ChunkerModel& model, const RunConfig& cfg,
                             std::ostream& out) {
  if (cfg.embeddings_path.empty()) return;
  EmbeddingFile emb = load_embedding_path(cfg.embeddings_path);
  if (emb.dim != cfg.model.word_dim) {
    throw ConfigError("embeddings are " + std::to_string(emb.dim) +
                      "-dimensional but word_dim=" +
                      std::to_string(cfg.model.word_dim));
  }
  std::size_t n = apply_pretrained(model.store().get("emb.word"), model.vocab(), emb);
  out << "embeddings applied=" << n << "\n";
}

inline std::string checkpoint_path_for(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.checkpoint_dir);
  return cfg.checkpoint_dir + "/" + variant_name(cfg.model.variant) + ".ckpt";
}

inline const EpochLog& epoch_entry(const TrainResult& r, std::size_t epoch) {
  return r.epochs.at(epoch - 1);
}

// Runs one full training pass and reports through `out` (teed to the config's
// log file when one is set).
inline TrainResult run_training(ChunkerModel& model, const PreparedData& data,
                                const RunConfig& cfg, std::ostream& out) {
  std::ofstream log_file;
  if (!cfg.log_path.empty()) {
    log_file.open(cfg.log_path);
    if (!log_file) throw ConfigError("cannot write log file '" + cfg.log_path + "'");
  }
  TeeBuf tee(out.rdbuf(), log_file.is_open() ? log_file.rdbuf() : nullptr);
  std::ostream teed(&tee);
  TrainResult result = train_model(model, data.train, data.valid, &teed);
  const EpochLog& best = epoch_entry(result, result.best_epoch);
  teed << "best epoch=" << result.best_epoch
       << " valid_f1=" << format_fixed(best.valid_f1, 2)
       << " valid_seg_f1=" << format_fixed(best.valid_seg_f1, 2) << "\n";
  return result;
}

inline void write_tagged(const std::string& path,
                         const std::vector<Sentence>& sentences,
                         const TagSeqs& pred) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (std::size_t t = 0; t < sentences[i].size(); ++t) {
      out << sentences[i].tokens[t] << " " << sentences[i].gold_tags[t] << " "
          << pred[i][t] << "\n";
    }
    out << "\n";
  }
}

// The tiny fixed corpus behind `gradcheck`; no external data involved.
inline std::vector<Sentence> demo_corpus() {
  auto mk = [](std::size_t id, std::vector<std::string> tokens,
               std::vector<std::string> tags) {
    Sentence s;
    s.id = id;
    s.tokens = std::move(tokens);
    s.pos.assign(s.tokens.size(), "X");
    s.gold_tags = std::move(tags);
    return s;
  };
  return {
      mk(1, {"the", "old", "cat", "slept", "well"},
         {"B-NP", "I-NP", "I-NP", "B-VP", "B-ADVP"}),
      mk(2, {"dogs", "ran", "fast", "."}, {"B-NP", "B-VP", "B-ADVP", "O"}),
      mk(3, {"a", "dog", "sat"}, {"B-NP", "I-NP", "B-VP"}),
  };
}

}  // namespace detail

// ----------------------------- subcommands -----------------------------

inline int cmd_train(const TrainOptions& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt.config_path);
  if (opt.seed) cfg.model.seed = *opt.seed;
  out << render_run_config(cfg);
  detail::PreparedData data = detail::prepare_data(cfg);
  out << "data train_sentences=" << data.train.size()
      << " valid_sentences=" << data.valid.size() << "\n";
  ChunkerModel model(cfg.model, data.vocab);
  detail::apply_embeddings(model, cfg, out);
  TrainResult result = detail::run_training(model, data, cfg, out);
  model.store().restore(result.best_params);
  std::string path = detail::checkpoint_path_for(cfg);
  model.save_file(path, cfg.train_path, cfg.format);
  out << "checkpoint " << path << "\n";
  return 0;
}

inline int cmd_grid(const GridOptions& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt.config_path);
  if (opt.seed) cfg.model.seed = *opt.seed;
  if (opt.lr0_values.empty()) throw ConfigError("grid needs at least one lr0 value");
  for (double lr : opt.lr0_values) {
    if (lr <= 0.0) throw ConfigError("grid lr0 values must be > 0");
  }
  out << render_run_config(cfg);
  detail::PreparedData data = detail::prepare_data(cfg);
  out << "data train_sentences=" << data.train.size()
      << " valid_sentences=" << data.valid.size() << "\n";

  std::optional<ChunkerModel> best_model;
  std::map<std::string, std::vector<double>> best_params;
  double best_f1 = -1.0;
  double best_lr = 0.0;
  for (double lr : opt.lr0_values) {
    RunConfig point = cfg;
    point.model.lr0 = lr;
    ChunkerModel model(point.model, data.vocab);
    detail::apply_embeddings(model, point, out);
    out << "grid point lr0=" << detail::format_compact(lr) << "\n";
    TrainResult r = detail::run_training(model, data, point, out);
    if (r.best_f1 > best_f1) {
      best_f1 = r.best_f1;
      best_lr = lr;
      best_params = std::move(r.best_params);
      best_model.emplace(std::move(model));
    }
  }
  out << "grid best lr0=" << detail::format_compact(best_lr)
      << " valid_f1=" << format_fixed(best_f1, 2) << "\n";
  best_model->store().restore(best_params);
  std::string path = detail::checkpoint_path_for(cfg);
  best_model->save_file(path, cfg.train_path, cfg.format);
  out << "checkpoint " << path << "\n";
  return 0;
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  int modes = (!opt.checkpoint_path.empty() ? 1 : 0) +
              (!opt.tagged_path.empty() ? 1 : 0) +
              (!opt.oracle_path.empty() ? 1 : 0);
  if (modes != 1) {
    throw ConfigError("choose exactly one of --checkpoint, --tagged, --oracle");
  }

  if (!opt.tagged_path.empty()) {
    std::ifstream in(opt.tagged_path);
    if (!in) throw ParseError("cannot open '" + opt.tagged_path + "'");
    TaggedFile t = read_tagged(in, opt.tagged_path);
    EvalReport chunks = chunk_f1(t.gold, t.pred);
    out << render_report(chunks);
    if (opt.metrics) {
      EvalReport segments = segment_f1(t.gold, t.pred);
      out << render_metrics(chunks, &segments);
    }
    return 0;
  }

  if (!opt.oracle_path.empty()) {
    CorpusFormat format = detail::to_format(opt.format, "--format");
    auto sentences = parse_conll_file(opt.oracle_path, format);
    TagSeqs gold;
    gold.reserve(sentences.size());
    for (const Sentence& s : sentences) gold.push_back(repair_iob(s.gold_tags));
    EvalReport report = chunk_f1(gold, gold);
    out << render_report(report, "oracle self-evaluation");
    bool exact = report.overall.correct == report.overall.gold &&
                 report.overall.correct == report.overall.predicted;
    if (!exact) {
      out << "oracle FAILED: self-evaluation must match exactly\n";
      return 1;
    }
    out << "oracle ok\n";
    return 0;
  }

  if (opt.test_path.empty()) {
    throw ConfigError("--checkpoint also needs --test <corpus file>");
  }
  CorpusFormat format = CorpusFormat::chunking3col;
  ChunkerModel model = ChunkerModel::load_file(opt.checkpoint_path, nullptr, &format);
  auto sentences = parse_conll_file(opt.test_path, format);
  TagSeqs gold, pred;
  gold.reserve(sentences.size());
  pred.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    gold.push_back(s.gold_tags);
    pred.push_back(model.predict(s));
  }
  if (!opt.dump_path.empty()) {
    detail::write_tagged(opt.dump_path, sentences, pred);
    out << "dump " << opt.dump_path << "\n";
  }
  EvalReport chunks = chunk_f1(gold, pred);
  out << render_report(chunks, variant_name(model.config().variant) + " on " +
                                   opt.test_path);
  if (opt.metrics) {
    EvalReport segments = segment_f1(gold, pred);
    out << render_metrics(chunks, &segments);
  }
  return 0;
}

inline int cmd_gradcheck(const GradcheckCliOptions& opt, std::ostream& out) {
  if (opt.seeds == 0) throw ConfigError("--seeds must be >= 1");
  std::vector<Variant> variants;
  if (opt.variant == "all") {
    variants = {Variant::baseline, Variant::model1, Variant::model2,
                Variant::model3};
  } else {
    variants = {parse_variant(opt.variant)};
  }
  auto corpus = detail::demo_corpus();
  Vocab vocab = build_vocab(corpus);
  double worst_overall = 0.0;
  for (Variant v : variants) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.word_dim = 3;
    cfg.hidden_dim = 2;
    cfg.pointer_dim = 3;
    cfg.length_dim = 2;
    cfg.max_chunk_len = 3;
    cfg.chunk_filters = 2;
    cfg.dropout = 0.0;
    double worst = 0.0;
    for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
      cfg.seed = seed;
      ChunkerModel model(cfg, vocab);
      // Re-draw at O(1) scale: at the +-0.08 training init the deepest
      // gradients fall below the checker's relative-error floor and the
      // comparison would be dominated by finite-difference noise.
      Rng rng(seed * 7919);
      for (const auto& [pname, t] : model.store().all()) {
        for (double& x : model.store().get(pname).values())
          x = rng.uniform(-0.5, 0.5);
      }
      GradCheckOptions gopt;
      gopt.max_coords_per_param = opt.coords;
      gopt.sample_seed = seed;
      gopt.denom_floor = 1e-6;  // see GradCheckOptions: whole-model noise budget
      const Sentence& s = corpus[seed % corpus.size()];
      double err = finite_diff_check(
          model.store(),
          [&](Tape& tape) { return model.sentence_loss(tape, s, false).total; },
          gopt);
      worst = std::max(worst, err);
    }
    out << "gradcheck variant=" << variant_name(v) << " seeds=" << opt.seeds
        << " coords=" << opt.coords << " worst=" << detail::format_compact(worst)
        << "\n";
    worst_overall = std::max(worst_overall, worst);
  }
  if (worst_overall >= opt.threshold) {
    out << "gradcheck FAILED worst=" << detail::format_compact(worst_overall)
        << " threshold=" << detail::format_compact(opt.threshold) << "\n";
    return 1;
  }
  out << "gradcheck ok threshold=" << detail::format_compact(opt.threshold)
      << "\n";
  return 0;
}

inline int cmd_stats(const StatsOptions& opt, std::ostream& out) {
  if (opt.train_path.empty()) throw ConfigError("stats needs --train <corpus file>");
  CorpusFormat format = detail::to_format(opt.format, "--format");
  auto sentences = parse_conll_file(opt.train_path, format);
  std::size_t tokens = 0;
  for (const Sentence& s : sentences) tokens += s.size();
  Vocab vocab = build_vocab(sentences);
  LengthHistogram hist = chunk_length_histogram(sentences);
  out << "sentences " << sentences.size() << "\n";
  out << "tokens " << tokens << "\n";
  out << "distinct_tokens " << vocab.token_count() - 2 << "\n";  // minus oov/pad
  out << "labels";
  for (const std::string& l : vocab.labels) out << " " << l;
  out << "\n";
  out << "tags " << vocab.tags.size() << "\n";
  out << "chunks " << hist.total << "\n";
  static const char* kNames[3] = {"len1", "len2", "len3plus"};
  for (std::size_t i = 0; i < 3; ++i) {
    out << kNames[i] << " " << hist.counts[i] << " "
        << format_fixed(hist.percents[i], 2) << "%\n";
  }
  auto split = split_train_valid(sentences, opt.valid_fraction, opt.seed);
  out << "split train=" << split.first.size() << " valid=" << split.second.size()
      << " fraction=" << detail::format_compact(opt.valid_fraction) << "\n";
  return 0;
}

// ----------------------------- entry point -----------------------------

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"neural sequence chunking toolkit"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  CLI::App* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", train_opt.config_path, "run configuration file")
      ->required();
  std::int64_t train_seed = -1;
  train->add_option("--seed", train_seed, "override the config seed");

  GridOptions grid_opt;
  CLI::App* grid = app.add_subcommand("grid", "train over a set of lr0 values");
  grid->add_option("--config", grid_opt.config_path, "run configuration file")
      ->required();
  std::string grid_lrs;
  grid->add_option("--lr0", grid_lrs, "comma-separated learning rates")->required();
  std::int64_t grid_seed = -1;
  grid->add_option("--seed", grid_seed, "override the config seed");

  EvalOptions eval_opt;
  CLI::App* eval = app.add_subcommand("eval", "score predictions");
  eval->add_option("--checkpoint", eval_opt.checkpoint_path, "trained model");
  eval->add_option("--test", eval_opt.test_path, "corpus file to evaluate on");
  eval->add_option("--tagged", eval_opt.tagged_path,
                   "score a 'token gold pred' file");
  eval->add_option("--oracle", eval_opt.oracle_path,
                   "scorer self-check on a corpus file");
  eval->add_option("--dump", eval_opt.dump_path, "write 'token gold pred' output");
  eval->add_option("--format", eval_opt.format, "corpus format for --oracle");
  eval->add_flag("--metrics", eval_opt.metrics, "print the key=value block too");

  GradcheckCliOptions gc_opt;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--variant", gc_opt.variant, "baseline|model1|model2|model3|all");
  gradcheck->add_option("--seeds", gc_opt.seeds, "number of random restarts");
  gradcheck->add_option("--coords", gc_opt.coords, "coordinates sampled per block");
  gradcheck->add_option("--threshold", gc_opt.threshold, "max relative error");

  StatsOptions stats_opt;
  CLI::App* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("--train", stats_opt.train_path, "corpus file")->required();
  stats->add_option("--format", stats_opt.format, "chunking3col|slot2col");
  stats->add_option("--valid-fraction", stats_opt.valid_fraction,
                    "held-out fraction to preview");
  stats->add_option("--seed", stats_opt.seed, "split shuffle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      if (train_seed >= 0) train_opt.seed = static_cast<std::uint64_t>(train_seed);
      return cmd_train(train_opt, std::cout);
    }
    if (*grid) {
      if (grid_seed >= 0) grid_opt.seed = static_cast<std::uint64_t>(grid_seed);
      std::stringstream ss(grid_lrs);
      std::string piece;
      while (std::getline(ss, piece, ',')) {
        grid_opt.lr0_values.push_back(detail::to_double(detail::trim(piece), "--lr0"));
      }
      return cmd_grid(grid_opt, std::cout);
    }
    if (*eval) return cmd_eval(eval_opt, std::cout);
    if (*gradcheck) return cmd_gradcheck(gc_opt, std::cout);
    if (*stats) return cmd_stats(stats_opt, std::cout);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const AlignmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace chunkforge
