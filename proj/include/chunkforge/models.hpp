// The four sequence-chunking architectures over a shared Bi-LSTM encoder:
//
//   baseline  per-token classification over the full IOB tag set
//   model1    per-token {O,B,I} segmentation head plus a chunk classifier
//             over span-averaged encoder states
//   model2    the model1 segmentation head plus an LSTM decoder that walks
//             the chunk sequence and labels each chunk
//   model3    boundaries chosen by a pointer mechanism over candidate chunk
//             end positions, interleaved with the labeling decoder
//
// Chunks feed the decoder as [Cx ; Ch ; Cw]: a max-pooled convolution over
// the chunk's token vectors, the average of the encoder states across the
// span, and a context window around the chunk.  Training is teacher-forced
// throughout: gold chunks drive the decoder and the pointer, so the labeling
// loss never depends on boundary mistakes.  The total loss is the sum of the
// segmentation and labeling components, each averaged over its own decision
// points.
#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chunkforge/autodiff.hpp"
#include "chunkforge/common.hpp"
#include "chunkforge/corpus.hpp"
#include "chunkforge/eval.hpp"
#include "chunkforge/layers.hpp"

namespace chunkforge {

enum class Variant { baseline, model1, model2, model3 };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::model1: return "model1";
    case Variant::model2: return "model2";
    case Variant::model3: return "model3";
  }
  return "baseline";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "model1") return Variant::model1;
  if (name == "model2") return Variant::model2;
  if (name == "model3") return Variant::model3;
  throw ConfigError("unknown variant '" + name +
                    "' (expected baseline|model1|model2|model3)");
}

struct ModelConfig {
  Variant variant = Variant::baseline;
  std::size_t word_dim = 50;
  bool use_char_cnn = false;
  std::size_t char_dim = 30;      // character embedding width
  std::size_t char_filters = 30;  // character CNN feature count
  std::size_t char_window = 3;
  std::size_t hidden_dim = 100;  // per direction
  std::size_t pointer_dim = 100;
  std::size_t length_dim = 10;    // length embedding width
  std::size_t max_chunk_len = 10;
  std::size_t context_window = 3;  // odd; centered on the chunk boundary words
  std::size_t chunk_filters = 0;   // 0 means "same as the token width"
  std::size_t chunk_window = 2;
  double dropout = 0.5;
  double lr0 = 0.05;
  double decay = 1e-5;
  std::size_t epochs = 10;
  double valid_fraction = 0.1;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;

  std::size_t token_dim() const {
    return word_dim + (use_char_cnn ? char_filters : 0);
  }
  std::size_t decoder_dim() const { return 2 * hidden_dim; }
  std::size_t chunk_feature_dim() const {
    return chunk_filters != 0 ? chunk_filters : token_dim();
  }
  std::size_t decoder_input_dim() const {
    return chunk_feature_dim() + decoder_dim() + context_window * token_dim();
  }

  void validate() const {
    if (word_dim == 0) throw ConfigError("word_dim must be >= 1");
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
    if (use_char_cnn && (char_dim == 0 || char_filters == 0 || char_window == 0))
      throw ConfigError("char CNN dimensions must be >= 1");
    if (context_window == 0 || context_window % 2 == 0)
      throw ConfigError("context_window must be odd");
    if (max_chunk_len == 0) throw ConfigError("max_chunk_len must be >= 1");
    if (chunk_window == 0) throw ConfigError("chunk_window must be >= 1");
    if (pointer_dim == 0 || length_dim == 0)
      throw ConfigError("pointer_dim and length_dim must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must lie in [0, 1)");
    if (lr0 <= 0.0) throw ConfigError("lr0 must be > 0");
    if (decay < 0.0) throw ConfigError("decay must be >= 0");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (valid_fraction < 0.0 || valid_fraction >= 1.0)
      throw ConfigError("valid_fraction must lie in [0, 1)");
  }
};

// Per-sentence training loss with the component values for logging.
struct SentenceLoss {
  Tensor total;
  double segmentation = 0.0;
  double labeling = 0.0;
};

class ChunkerModel {
 public:
  ChunkerModel(const ModelConfig& config, Vocab vocab)
      : cfg_(config), vocab_(std::move(vocab)), rng_(config.seed) {
    cfg_.validate();
    if (cfg_.variant != Variant::baseline && vocab_.labels.empty()) {
      throw DomainError("training corpus has no labeled chunks");
    }
    build_params();
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  Rng& rng() { return rng_; }

  // ---------------- features ----------------

  // Clean (undropped) token vectors x_t = [word embedding ; char CNN].
  std::vector<Tensor> embed_tokens(Tape& tape,
                                   const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw DomainError("cannot embed an empty sentence");
    std::vector<Tensor> xs;
    xs.reserve(tokens.size());
    for (const std::string& raw : tokens) {
      Tensor word = tape.select_row(word_table_, vocab_.lookup_token(raw));
      if (!cfg_.use_char_cnn) {
        xs.push_back(word);
        continue;
      }
      std::vector<std::size_t> char_ids;
      char_ids.reserve(raw.size());
      for (char c : raw) char_ids.push_back(vocab_.lookup_char(c));
      Tensor chars = char_cnn_embed(tape, char_table_, char_filters_w_,
                                    char_filters_b_, char_ids, cfg_.char_window);
      xs.push_back(tape.concat(word, chars));
    }
    return xs;
  }

  struct Encoded {
    std::vector<Tensor> states;  // per-token [forward ; backward], post-dropout
    Tensor init_h;               // [forward last ; backward first], undropped
  };

  // Runs the encoder.  In training, dropout is applied once per token to the
  // LSTM input and once to each concatenated output state; the recurrent path
  // and the decoder-initial state stay undropped.
  Encoded encode(Tape& tape, const std::vector<Tensor>& xs, bool train) {
    std::vector<Tensor> inputs;
    inputs.reserve(xs.size());
    for (const Tensor& x : xs)
      inputs.push_back(dropout_apply(tape, x, cfg_.dropout, train, rng_));
    BiLstmOut enc = bilstm_run(tape, enc_fwd_, enc_bwd_, inputs);
    Encoded out;
    out.init_h = tape.concat(enc.fwd_last, enc.bwd_first);
    out.states.reserve(xs.size());
    for (Tensor& s : enc.states)
      out.states.push_back(dropout_apply(tape, s, cfg_.dropout, train, rng_));
    return out;
  }

  // [Cx ; Ch ; Cw] for one span.
  Tensor chunk_vector(Tape& tape, const std::vector<Tensor>& xs,
                      const std::vector<Tensor>& states,
                      const ChunkSpan& span) const {
    std::size_t b = span.begin, e = span.begin + span.length;  // [b, e)
    if (span.length == 0 || e > xs.size()) {
      throw IndexError("chunk span [" + std::to_string(b) + ", " +
                       std::to_string(e) + ") outside sentence of length " +
                       std::to_string(xs.size()));
    }
    std::vector<Tensor> span_x(xs.begin() + b, xs.begin() + e);
    Tensor cx = cnnmax(tape, chunk_filters_w_, chunk_filters_b_, span_x,
                       cfg_.chunk_window);
    std::vector<Tensor> span_h(states.begin() + b, states.begin() + e);
    Tensor ch = tape.average_rows(tape.stack_rows(span_h));
    // Context: (w-1)/2 tokens left of the first word, the first word itself,
    // and (w-1)/2 tokens right of the last word; out-of-range positions use
    // the learnable padding embedding (with a zero char part).
    std::size_t half = (cfg_.context_window - 1) / 2;
    std::vector<Tensor> ctx;
    ctx.reserve(cfg_.context_window);
    auto token_or_pad = [&](std::ptrdiff_t p) {
      if (p < 0 || p >= static_cast<std::ptrdiff_t>(xs.size()))
        return pad_vector(tape);
      return xs[static_cast<std::size_t>(p)];
    };
    auto first = static_cast<std::ptrdiff_t>(b);
    auto last = static_cast<std::ptrdiff_t>(e) - 1;
    for (std::ptrdiff_t p = first - static_cast<std::ptrdiff_t>(half); p <= first; ++p)
      ctx.push_back(token_or_pad(p));
    for (std::ptrdiff_t p = last + 1; p <= last + static_cast<std::ptrdiff_t>(half); ++p)
      ctx.push_back(token_or_pad(p));
    Tensor cw = tape.concat(ctx);
    return tape.concat({cx, ch, cw});
  }

  // Scores over candidate end positions i in [b, min(b + max_chunk_len, T)),
  // given the decoder state from before this chunk is consumed:
  //   u_i = v1 . tanh(W1 h_i + W2 x_i + W3 x_b + W4 d) + v2 . LE(i - b + 1)
  Tensor pointer_scores(Tape& tape, const std::vector<Tensor>& states,
                        const std::vector<Tensor>& xs, std::size_t b,
                        const Tensor& decoder_h) const {
    std::size_t n = xs.size();
    if (b >= n) {
      throw StateError("pointer start " + std::to_string(b) +
                       " is past the end of a sentence of length " +
                       std::to_string(n));
    }
    std::size_t n_cand = std::min(cfg_.max_chunk_len, n - b);
    Tensor w3xb = tape.matvec(ptr_w3_, xs[b]);
    Tensor w4d = tape.matvec(ptr_w4_, decoder_h);
    std::vector<Tensor> scores;
    scores.reserve(n_cand);
    for (std::size_t k = 0; k < n_cand; ++k) {
      std::size_t i = b + k;
      Tensor hidden = tape.tanh(tape.add(
          tape.add(tape.matvec(ptr_w1_, states[i]), tape.matvec(ptr_w2_, xs[i])),
          tape.add(w3xb, w4d)));
      Tensor content = tape.dot(ptr_v1_, hidden);
      Tensor length_bias = tape.dot(ptr_v2_, tape.select_row(ptr_le_, k));
      scores.push_back(tape.add(content, length_bias));
    }
    return tape.concat(scores);
  }

  // ---------------- training loss ----------------

  SentenceLoss sentence_loss(Tape& tape, const Sentence& sentence, bool train) {
    if (sentence.size() == 0) throw DomainError("empty sentence");
    std::vector<std::string> gold = repair_iob(sentence.gold_tags);
    std::vector<Tensor> xs = embed_tokens(tape, sentence.tokens);
    Encoded enc = encode(tape, xs, train);
    switch (cfg_.variant) {
      case Variant::baseline: return baseline_loss(tape, enc, gold);
      case Variant::model1: return model1_loss(tape, enc, gold);
      case Variant::model2: return model2_loss(tape, xs, enc, gold, train);
      case Variant::model3:
        return model3_loss(tape, xs, enc, gold, train, sentence.id);
    }
    throw StateError("unreachable");
  }

  // ---------------- inference ----------------

  std::vector<std::string> predict(const Sentence& sentence) {
    if (sentence.size() == 0) throw DomainError("empty sentence");
    Tape tape;
    std::vector<Tensor> xs = embed_tokens(tape, sentence.tokens);
    Encoded enc = encode(tape, xs, /*train=*/false);
    switch (cfg_.variant) {
      case Variant::baseline: {
        std::vector<std::string> tags;
        tags.reserve(xs.size());
        for (const Tensor& s : enc.states) {
          Tensor probs = classify(tape, tag_head_w_, tag_head_b_, s);
          tags.push_back(vocab_.tags[argmax(probs)]);
        }
        return repair_iob(tags);
      }
      case Variant::model1: {
        auto spans = segment_greedy(tape, enc);
        for (ChunkSpan& span : spans) {
          if (span.label == "O") continue;
          Tensor ch = span_average(tape, enc.states, span);
          Tensor probs = classify(tape, label_head_w_, label_head_b_, ch);
          span.label = vocab_.labels[argmax(probs)];
        }
        return chunks_to_iob(spans, sentence.size());
      }
      case Variant::model2: {
        auto spans = segment_greedy(tape, enc);
        LstmState d{enc.init_h, Tensor::zeros({cfg_.decoder_dim()})};
        for (ChunkSpan& span : spans) {
          Tensor vec = chunk_vector(tape, xs, enc.states, span);
          d = lstm_step(tape, dec_, vec, d);
          if (span.label == "O") continue;  // segmentation already fixed it
          Tensor probs = classify(tape, label_head_w_, label_head_b_, d.h);
          span.label = label_of_index(argmax(probs));
        }
        return chunks_to_iob(spans, sentence.size());
      }
      case Variant::model3: {
        std::vector<ChunkSpan> spans = decode_pointer(tape, xs, enc);
        return chunks_to_iob(spans, sentence.size());
      }
    }
    throw StateError("unreachable");
  }

  // Pointer-driven greedy decode; exposed for the decode-tiling tests.
  std::vector<ChunkSpan> decode_pointer(Tape& tape, const std::vector<Tensor>& xs,
                                        Encoded& enc) {
    std::vector<ChunkSpan> spans;
    LstmState d{enc.init_h, Tensor::zeros({cfg_.decoder_dim()})};
    std::size_t b = 0;
    while (b < xs.size()) {
      Tensor probs = tape.softmax(pointer_scores(tape, enc.states, xs, b, d.h));
      std::size_t len = argmax(probs) + 1;  // first index on ties: shortest
      ChunkSpan span{b, len, ""};
      Tensor vec = chunk_vector(tape, xs, enc.states, span);
      d = lstm_step(tape, dec_, vec, d);
      Tensor label_probs = classify(tape, label_head_w_, label_head_b_, d.h);
      span.label = label_of_index(argmax(label_probs));
      spans.push_back(span);
      b += len;
    }
    return spans;
  }

  // ---------------- checkpointing ----------------

  void save(std::ostream& out, const std::string& train_path,
            CorpusFormat format) const {
    out << "chunkforge-checkpoint v1\n";
    out << "variant " << variant_name(cfg_.variant) << "\n";
    out << "train " << train_path << "\n";
    out << "format "
        << (format == CorpusFormat::chunking3col ? "chunking3col" : "slot2col")
        << "\n";
    auto num = [&](const char* key, double x) {
      out << "config " << key << " " << format_g17(x) << "\n";
    };
    auto integer = [&](const char* key, std::size_t x) {
      out << "config " << key << " " << x << "\n";
    };
    integer("word_dim", cfg_.word_dim);
    integer("use_char_cnn", cfg_.use_char_cnn ? 1 : 0);
    integer("char_dim", cfg_.char_dim);
    integer("char_filters", cfg_.char_filters);
    integer("char_window", cfg_.char_window);
    integer("hidden_dim", cfg_.hidden_dim);
    integer("pointer_dim", cfg_.pointer_dim);
    integer("length_dim", cfg_.length_dim);
    integer("max_chunk_len", cfg_.max_chunk_len);
    integer("context_window", cfg_.context_window);
    integer("chunk_filters", cfg_.chunk_filters);
    integer("chunk_window", cfg_.chunk_window);
    num("dropout", cfg_.dropout);
    num("lr0", cfg_.lr0);
    num("decay", cfg_.decay);
    integer("epochs", cfg_.epochs);
    num("valid_fraction", cfg_.valid_fraction);
    integer("min_count", cfg_.min_count);
    integer("seed", cfg_.seed);
    out << "vocab_tokens " << vocab_.token_hash() << "\n";
    out << "vocab_labels " << vocab_.label_hash() << "\n";
    out << "vocab_chars " << vocab_.char_hash() << "\n";
    out << "step " << store_.step() << "\n";
    for (const auto& [name, t] : store_.all()) {
      out << "param " << name << " " << t.size();
      for (double v : t.values()) out << " " << format_g17(v);
      out << "\n";
    }
    out << "end\n";
  }

  void save_file(const std::string& path, const std::string& train_path,
                 CorpusFormat format) const {
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    save(out, train_path, format);
  }

  // Rebuilds the vocabulary from the training corpus recorded in the
  // checkpoint and verifies its fingerprints before loading parameters.
  // The recorded corpus location and format are reported through the
  // optional out-parameters (evaluation reuses them for the test file).
  static ChunkerModel load(std::istream& in, const std::string& name = "<ckpt>",
                           std::string* train_path_out = nullptr,
                           CorpusFormat* format_out = nullptr) {
    std::string line;
    if (!std::getline(in, line) || line != "chunkforge-checkpoint v1") {
      throw CheckpointError(name + ": not a checkpoint file");
    }
    ModelConfig cfg;
    std::string train_path, format_name;
    std::uint64_t want_tokens = 0, want_labels = 0, want_chars = 0;
    std::size_t step = 0;
    std::map<std::string, std::vector<double>> params;
    bool saw_end = false;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string kind;
      fields >> kind;
      if (kind.empty()) continue;
      if (kind == "end") {
        saw_end = true;
        break;
      }
      if (kind == "variant") {
        std::string v;
        fields >> v;
        cfg.variant = parse_variant(v);
      } else if (kind == "train") {
        fields >> train_path;
      } else if (kind == "format") {
        fields >> format_name;
      } else if (kind == "config") {
        std::string key;
        double value = 0;
        fields >> key >> value;
        apply_config_number(cfg, key, value, name);
      } else if (kind == "vocab_tokens") {
        fields >> want_tokens;
      } else if (kind == "vocab_labels") {
        fields >> want_labels;
      } else if (kind == "vocab_chars") {
        fields >> want_chars;
      } else if (kind == "step") {
        fields >> step;
      } else if (kind == "param") {
        std::string pname;
        std::size_t size = 0;
        fields >> pname >> size;
        std::vector<double> values(size);
        for (std::size_t i = 0; i < size; ++i) {
          if (!(fields >> values[i])) {
            throw CheckpointError(name + ": parameter '" + pname +
                                  "' is truncated");
          }
        }
        params[pname] = std::move(values);
      } else {
        throw CheckpointError(name + ": unknown record '" + kind + "'");
      }
    }
    if (!saw_end) throw CheckpointError(name + ": missing end record");
    CorpusFormat format = format_name == "slot2col" ? CorpusFormat::slot2col
                                                    : CorpusFormat::chunking3col;
    if (train_path_out != nullptr) *train_path_out = train_path;
    if (format_out != nullptr) *format_out = format;
    Vocab vocab = build_vocab(parse_conll_file(train_path, format), cfg.min_count);
    if (vocab.token_hash() != want_tokens || vocab.label_hash() != want_labels ||
        vocab.char_hash() != want_chars) {
      throw CheckpointError(name + ": vocabulary rebuilt from '" + train_path +
                            "' does not match the checkpoint fingerprint");
    }
    ChunkerModel model(cfg, std::move(vocab));
    for (const auto& [pname, values] : params) {
      if (!model.store_.has(pname)) {
        throw CheckpointError(name + ": unexpected parameter '" + pname + "'");
      }
      Tensor t = model.store_.get(pname);
      if (t.size() != values.size()) {
        throw CheckpointError(name + ": parameter '" + pname + "' has " +
                              std::to_string(values.size()) + " values, expected " +
                              std::to_string(t.size()));
      }
      t.values() = values;
    }
    for (const auto& [pname, t] : model.store_.all()) {
      if (!params.count(pname)) {
        throw CheckpointError(name + ": checkpoint is missing parameter '" +
                              pname + "'");
      }
    }
    model.store_.set_step(step);
    return model;
  }

  static ChunkerModel load_file(const std::string& path,
                                std::string* train_path_out = nullptr,
                                CorpusFormat* format_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    return load(in, path, train_path_out, format_out);
  }

  // Gold spans as the decoders see them: the tiling span list, with labeled
  // spans longer than max_chunk_len split for the pointer variant.
  std::vector<ChunkSpan> gold_spans(const Sentence& sentence) const {
    std::vector<ChunkSpan> spans = iob_to_chunks(repair_iob(sentence.gold_tags));
    if (cfg_.variant != Variant::model3) return spans;
    std::vector<ChunkSpan> out;
    for (const ChunkSpan& span : spans) {
      if (span.length <= cfg_.max_chunk_len) {
        out.push_back(span);
        continue;
      }
      log_warn("sentence " + std::to_string(sentence.id) + ": splitting a " +
               std::to_string(span.length) + "-token '" + span.label +
               "' chunk to fit max_chunk_len=" + std::to_string(cfg_.max_chunk_len));
      std::size_t off = 0;
      while (off < span.length) {
        std::size_t piece = std::min(cfg_.max_chunk_len, span.length - off);
        out.push_back({span.begin + off, piece, span.label});
        off += piece;
      }
    }
    return out;
  }

 private:
  // ---------------- parameters ----------------

  void build_params() {
    word_table_ = store_.create("emb.word", {vocab_.token_count(), cfg_.word_dim},
                                rng_);
    if (cfg_.use_char_cnn) {
      char_table_ = store_.create("emb.char", {vocab_.char_count(), cfg_.char_dim},
                                  rng_);
      char_filters_w_ = store_.create(
          "cnn.char.w", {cfg_.char_filters, cfg_.char_window * cfg_.char_dim},
          rng_);
      char_filters_b_ = store_.create_zeros("cnn.char.b", {cfg_.char_filters});
    }
    enc_fwd_ = LstmParams::create(store_, "enc.fwd", cfg_.token_dim(),
                                  cfg_.hidden_dim, rng_);
    enc_bwd_ = LstmParams::create(store_, "enc.bwd", cfg_.token_dim(),
                                  cfg_.hidden_dim, rng_);
    std::size_t enc_out = cfg_.decoder_dim();
    switch (cfg_.variant) {
      case Variant::baseline:
        tag_head_w_ = store_.create("head.tag.w", {vocab_.tags.size(), enc_out},
                                    rng_);
        tag_head_b_ = store_.create_zeros("head.tag.b", {vocab_.tags.size()});
        break;
      case Variant::model1:
        make_seg_head(enc_out);
        label_head_w_ = store_.create("head.label.w",
                                      {vocab_.labels.size(), enc_out}, rng_);
        label_head_b_ = store_.create_zeros("head.label.b", {vocab_.labels.size()});
        break;
      case Variant::model2:
        make_seg_head(enc_out);
        make_decoder();
        break;
      case Variant::model3:
        make_decoder();
        ptr_w1_ = store_.create("ptr.w1", {cfg_.pointer_dim, enc_out}, rng_);
        ptr_w2_ = store_.create("ptr.w2", {cfg_.pointer_dim, cfg_.token_dim()}, rng_);
        ptr_w3_ = store_.create("ptr.w3", {cfg_.pointer_dim, cfg_.token_dim()}, rng_);
        ptr_w4_ = store_.create("ptr.w4", {cfg_.pointer_dim, cfg_.decoder_dim()}, rng_);
        ptr_v1_ = store_.create("ptr.v1", {cfg_.pointer_dim}, rng_);
        ptr_v2_ = store_.create("ptr.v2", {cfg_.length_dim}, rng_);
        ptr_le_ = store_.create("ptr.le", {cfg_.max_chunk_len, cfg_.length_dim}, rng_);
        break;
    }
  }

  void make_seg_head(std::size_t enc_out) {
    seg_head_w_ = store_.create("head.seg.w", {3, enc_out}, rng_);
    seg_head_b_ = store_.create_zeros("head.seg.b", {3});
  }

  void make_decoder() {
    chunk_filters_w_ = store_.create(
        "cnn.chunk.w", {cfg_.chunk_feature_dim(), cfg_.chunk_window * cfg_.token_dim()},
        rng_);
    chunk_filters_b_ = store_.create_zeros("cnn.chunk.b", {cfg_.chunk_feature_dim()});
    dec_ = LstmParams::create(store_, "dec", cfg_.decoder_input_dim(),
                              cfg_.decoder_dim(), rng_);
    std::size_t n_labels = vocab_.labels.size() + 1;  // content labels + O
    label_head_w_ = store_.create("head.label.w",
                                  {n_labels, cfg_.decoder_dim()}, rng_);
    label_head_b_ = store_.create_zeros("head.label.b", {n_labels});
  }

  Tensor pad_vector(Tape& tape) const {
    Tensor word = tape.select_row(word_table_, Vocab::kPad);
    if (!cfg_.use_char_cnn) return word;
    return tape.concat(word, Tensor::zeros({cfg_.char_filters}));
  }

  static std::size_t argmax(const Tensor& probs) {
    const auto& v = probs.values();
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;  // strict: first index wins ties
    return best;
  }

  std::string label_of_index(std::size_t idx) const {
    return idx == vocab_.labels.size() ? "O" : vocab_.labels[idx];
  }

  std::size_t span_label_index(const ChunkSpan& span) const {
    if (span.label == "O") return vocab_.labels.size();
    return vocab_.lookup_label(span.label);
  }

  Tensor span_average(Tape& tape, const std::vector<Tensor>& states,
                      const ChunkSpan& span) const {
    std::vector<Tensor> span_h(states.begin() + span.begin,
                               states.begin() + span.begin + span.length);
    return tape.average_rows(tape.stack_rows(span_h));
  }

  static std::size_t seg_id(const std::string& tag) {
    char p = tag_prefix(tag);
    return p == 'O' ? 0 : p == 'B' ? 1 : 2;
  }

  // Greedy per-token {O,B,I} segmentation followed by repair; used by the
  // model1/model2 inference paths.
  std::vector<ChunkSpan> segment_greedy(Tape& tape, const Encoded& enc) const {
    static const char* kSegTags[3] = {"O", "B", "I"};
    std::vector<std::string> seg;
    seg.reserve(enc.states.size());
    for (const Tensor& s : enc.states) {
      Tensor probs = classify(tape, seg_head_w_, seg_head_b_, s);
      seg.push_back(kSegTags[argmax(probs)]);
    }
    return iob_to_chunks(repair_iob(seg));
  }

  Tensor mean_of(Tape& tape, std::vector<Tensor>& terms) const {
    Tensor sum = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) sum = tape.add(sum, terms[i]);
    return tape.scale(sum, 1.0 / static_cast<double>(terms.size()));
  }

  SentenceLoss baseline_loss(Tape& tape, const Encoded& enc,
                             const std::vector<std::string>& gold) {
    std::vector<Tensor> terms;
    terms.reserve(gold.size());
    for (std::size_t t = 0; t < gold.size(); ++t) {
      Tensor probs = classify(tape, tag_head_w_, tag_head_b_, enc.states[t]);
      terms.push_back(tape.cross_entropy(probs, vocab_.lookup_tag(gold[t])));
    }
    SentenceLoss loss;
    loss.total = mean_of(tape, terms);
    loss.segmentation = loss.total.item();
    return loss;
  }

  Tensor segmentation_tag_loss(Tape& tape, const Encoded& enc,
                               const std::vector<std::string>& gold) {
    std::vector<Tensor> terms;
    terms.reserve(gold.size());
    for (std::size_t t = 0; t < gold.size(); ++t) {
      Tensor probs = classify(tape, seg_head_w_, seg_head_b_, enc.states[t]);
      terms.push_back(tape.cross_entropy(probs, seg_id(gold[t])));
    }
    return mean_of(tape, terms);
  }

  SentenceLoss model1_loss(Tape& tape, const Encoded& enc,
                           const std::vector<std::string>& gold) {
    Tensor seg = segmentation_tag_loss(tape, enc, gold);
    std::vector<Tensor> label_terms;
    for (const ChunkSpan& span : iob_to_chunks(gold)) {
      if (span.label == "O") continue;
      Tensor ch = span_average(tape, enc.states, span);
      Tensor probs = classify(tape, label_head_w_, label_head_b_, ch);
      label_terms.push_back(
          tape.cross_entropy(probs, vocab_.lookup_label(span.label)));
    }
    SentenceLoss loss;
    loss.segmentation = seg.item();
    if (label_terms.empty()) {
      loss.total = seg;
      return loss;
    }
    Tensor lab = mean_of(tape, label_terms);
    loss.labeling = lab.item();
    loss.total = tape.add(seg, lab);
    return loss;
  }

  // Teacher-forced decoder walk shared by model2/model3: consumes the gold
  // chunk sequence and accumulates one labeling term per chunk.
  Tensor decoder_label_loss(Tape& tape, const std::vector<Tensor>& xs,
                            const Encoded& enc,
                            const std::vector<ChunkSpan>& spans, bool train,
                            std::vector<Tensor>* decoder_states_before) {
    LstmState d{enc.init_h, Tensor::zeros({cfg_.decoder_dim()})};
    std::vector<Tensor> terms;
    terms.reserve(spans.size());
    for (const ChunkSpan& span : spans) {
      if (decoder_states_before != nullptr) decoder_states_before->push_back(d.h);
      Tensor vec = chunk_vector(tape, xs, enc.states, span);
      vec = dropout_apply(tape, vec, cfg_.dropout, train, rng_);
      d = lstm_step(tape, dec_, vec, d);
      Tensor out = dropout_apply(tape, d.h, cfg_.dropout, train, rng_);
      Tensor probs = classify(tape, label_head_w_, label_head_b_, out);
      terms.push_back(tape.cross_entropy(probs, span_label_index(span)));
    }
    return mean_of(tape, terms);
  }

  SentenceLoss model2_loss(Tape& tape, const std::vector<Tensor>& xs,
                           const Encoded& enc,
                           const std::vector<std::string>& gold, bool train) {
    Tensor seg = segmentation_tag_loss(tape, enc, gold);
    Tensor lab =
        decoder_label_loss(tape, xs, enc, iob_to_chunks(gold), train, nullptr);
    SentenceLoss loss;
    loss.segmentation = seg.item();
    loss.labeling = lab.item();
    loss.total = tape.add(seg, lab);
    return loss;
  }

  SentenceLoss model3_loss(Tape& tape, const std::vector<Tensor>& xs,
                           const Encoded& enc,
                           const std::vector<std::string>& gold, bool train,
                           std::size_t sentence_id) {
    Sentence tmp;
    tmp.id = sentence_id;
    tmp.gold_tags = gold;
    std::vector<ChunkSpan> spans = gold_spans(tmp);
    std::vector<Tensor> states_before;
    states_before.reserve(spans.size());
    Tensor lab = decoder_label_loss(tape, xs, enc, spans, train, &states_before);
    std::vector<Tensor> seg_terms;
    seg_terms.reserve(spans.size());
    for (std::size_t j = 0; j < spans.size(); ++j) {
      Tensor probs = tape.softmax(
          pointer_scores(tape, enc.states, xs, spans[j].begin, states_before[j]));
      seg_terms.push_back(tape.cross_entropy(probs, spans[j].length - 1));
    }
    Tensor seg = mean_of(tape, seg_terms);
    SentenceLoss loss;
    loss.segmentation = seg.item();
    loss.labeling = lab.item();
    loss.total = tape.add(seg, lab);
    return loss;
  }

  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore store_;
  Rng rng_;

  Tensor word_table_, char_table_, char_filters_w_, char_filters_b_;
  LstmParams enc_fwd_, enc_bwd_, dec_;
  Tensor tag_head_w_, tag_head_b_;
  Tensor seg_head_w_, seg_head_b_;
  Tensor label_head_w_, label_head_b_;
  Tensor chunk_filters_w_, chunk_filters_b_;
  Tensor ptr_w1_, ptr_w2_, ptr_w3_, ptr_w4_, ptr_v1_, ptr_v2_, ptr_le_;

  static void apply_config_number(ModelConfig& cfg, const std::string& key,
                                  double value, const std::string& name) {
    auto sz = [&] { return static_cast<std::size_t>(value); };
    if (key == "word_dim") cfg.word_dim = sz();
    else if (key == "use_char_cnn") cfg.use_char_cnn = value != 0;
    else if (key == "char_dim") cfg.char_dim = sz();
    else if (key == "char_filters") cfg.char_filters = sz();
    else if (key == "char_window") cfg.char_window = sz();
    else if (key == "hidden_dim") cfg.hidden_dim = sz();
    else if (key == "pointer_dim") cfg.pointer_dim = sz();
    else if (key == "length_dim") cfg.length_dim = sz();
    else if (key == "max_chunk_len") cfg.max_chunk_len = sz();
    else if (key == "context_window") cfg.context_window = sz();
    else if (key == "chunk_filters") cfg.chunk_filters = sz();
    else if (key == "chunk_window") cfg.chunk_window = sz();
    else if (key == "dropout") cfg.dropout = value;
    else if (key == "lr0") cfg.lr0 = value;
    else if (key == "decay") cfg.decay = value;
    else if (key == "epochs") cfg.epochs = sz();
    else if (key == "valid_fraction") cfg.valid_fraction = value;
    else if (key == "min_count") cfg.min_count = sz();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(value);
    else throw CheckpointError(name + ": unknown config key '" + key + "'");
  }
};

// ----------------------------- training loop -----------------------------

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double seg_loss = 0.0;
  double lab_loss = 0.0;
  double valid_f1 = 0.0;
  double valid_seg_f1 = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  std::map<std::string, std::vector<double>> best_params;
};

inline std::string format_epoch_line(const EpochLog& e) {
  std::ostringstream out;
  out << "epoch=" << e.epoch << " train_loss=" << format_fixed(e.train_loss, 8)
      << " seg_loss=" << format_fixed(e.seg_loss, 8)
      << " lab_loss=" << format_fixed(e.lab_loss, 8)
      << " valid_f1=" << format_fixed(e.valid_f1, 2)
      << " valid_seg_f1=" << format_fixed(e.valid_seg_f1, 2)
      << " lr=" << format_fixed(e.lr, 8);
  return out.str();
}

// SGD with batch size 1: shuffle, one tape per sentence, backward, step.
// After each epoch the model is scored on the validation set; the best
// chunk-F1 parameter snapshot is retained (earliest epoch wins ties).
inline TrainResult train_model(ChunkerModel& model,
                               const std::vector<Sentence>& train_set,
                               const std::vector<Sentence>& valid_set,
                               std::ostream* log = nullptr) {
  if (train_set.empty()) throw DomainError("training set is empty");
  const ModelConfig& cfg = model.config();
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  TagSeqs valid_gold;
  valid_gold.reserve(valid_set.size());
  for (const Sentence& s : valid_set) valid_gold.push_back(repair_iob(s.gold_tags));
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    model.rng().shuffle(order);
    double total = 0.0, seg = 0.0, lab = 0.0;
    for (std::size_t idx : order) {
      Tape tape;
      SentenceLoss loss = model.sentence_loss(tape, train_set[idx], /*train=*/true);
      double value = loss.total.item();
      if (!std::isfinite(value)) {
        throw StateError("non-finite loss at epoch " + std::to_string(epoch) +
                         ", sentence " + std::to_string(train_set[idx].id) +
                         " (diverged; lower lr0)");
      }
      tape.backward(loss.total);
      model.store().sgd_step(cfg.lr0, cfg.decay);
      total += value;
      seg += loss.segmentation;
      lab += loss.labeling;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = total / static_cast<double>(train_set.size());
    entry.seg_loss = seg / static_cast<double>(train_set.size());
    entry.lab_loss = lab / static_cast<double>(train_set.size());
    entry.lr = model.store().current_lr(cfg.lr0, cfg.decay);
    if (!valid_set.empty()) {
      TagSeqs pred;
      pred.reserve(valid_set.size());
      for (const Sentence& s : valid_set) pred.push_back(model.predict(s));
      entry.valid_f1 = chunk_f1(valid_gold, pred).overall.f1();
      entry.valid_seg_f1 = segment_f1(valid_gold, pred).overall.f1();
    }
    result.epochs.push_back(entry);
    if (log != nullptr) *log << format_epoch_line(entry) << "\n";
    if (entry.valid_f1 > result.best_f1) {
      result.best_f1 = entry.valid_f1;
      result.best_epoch = epoch;
      result.best_params = model.store().snapshot();
    }
  }
  return result;
}

}  // namespace chunkforge
