// Network building blocks on top of the tape: LSTM cell and bidirectional
// runner, max-pooled convolution over vector sequences, character-level CNN
// features, inverted dropout, a softmax classifier head, and the pretrained
// embedding loader.
#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "chunkforge/autodiff.hpp"
#include "chunkforge/common.hpp"
#include "chunkforge/corpus.hpp"

namespace chunkforge {

// ----------------------------- LSTM -----------------------------

struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor wi, ui, bi;  // input gate
  Tensor wf, uf, bf;  // forget gate (bias starts at 1)
  Tensor wo, uo, bo;  // output gate
  Tensor wg, ug, bg;  // candidate

  static LstmParams create(ParamStore& store, const std::string& prefix,
                           std::size_t input_dim, std::size_t hidden_dim,
                           Rng& rng) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    auto w = [&](const char* name) {
      return store.create(prefix + "." + name, {hidden_dim, input_dim}, rng);
    };
    auto u = [&](const char* name) {
      return store.create(prefix + "." + name, {hidden_dim, hidden_dim}, rng);
    };
    p.wi = w("wi"); p.ui = u("ui"); p.bi = store.create_zeros(prefix + ".bi", {hidden_dim});
    p.wf = w("wf"); p.uf = u("uf");
    p.bf = store.create_full(prefix + ".bf", {hidden_dim}, 1.0);
    p.wo = w("wo"); p.uo = u("uo"); p.bo = store.create_zeros(prefix + ".bo", {hidden_dim});
    p.wg = w("wg"); p.ug = u("ug"); p.bg = store.create_zeros(prefix + ".bg", {hidden_dim});
    return p;
  }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

inline LstmState lstm_zero_state(std::size_t hidden_dim) {
  return {Tensor::zeros({hidden_dim}), Tensor::zeros({hidden_dim})};
}

// One cell update:
//   i = sigmoid(Wi x + Ui h + bi)      f = sigmoid(Wf x + Uf h + bf)
//   o = sigmoid(Wo x + Uo h + bo)      g = tanh(Wg x + Ug h + bg)
//   c' = f * c + i * g                 h' = o * tanh(c')
inline LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x,
                           const LstmState& prev) {
  if (x.rank() != 1 || x.size() != p.input_dim) {
    throw DimensionError("lstm_step input has shape " +
                         detail::shape_str(x.shape()) + ", expected [" +
                         std::to_string(p.input_dim) + "]");
  }
  if (prev.h.size() != p.hidden_dim || prev.c.size() != p.hidden_dim) {
    throw DimensionError("lstm_step state width " +
                         std::to_string(prev.h.size()) + ", expected " +
                         std::to_string(p.hidden_dim));
  }
  auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
    return tape.add(tape.matvec(w, x), tape.matvec(u, prev.h), b);
  };
  Tensor i = tape.sigmoid(gate(p.wi, p.ui, p.bi));
  Tensor f = tape.sigmoid(gate(p.wf, p.uf, p.bf));
  Tensor o = tape.sigmoid(gate(p.wo, p.uo, p.bo));
  Tensor g = tape.tanh(gate(p.wg, p.ug, p.bg));
  LstmState next;
  next.c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  next.h = tape.mul(o, tape.tanh(next.c));
  return next;
}

struct BiLstmOut {
  std::vector<Tensor> states;  // per token: [forward h ; backward h]
  Tensor fwd_last;             // forward hidden after the last token
  Tensor bwd_first;            // backward hidden after the first token
};

inline BiLstmOut bilstm_run(Tape& tape, const LstmParams& fwd,
                            const LstmParams& bwd,
                            const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DomainError("bilstm_run on an empty sequence");
  std::size_t n = xs.size();
  std::vector<Tensor> fh(n), bh(n);
  LstmState state = lstm_zero_state(fwd.hidden_dim);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_step(tape, fwd, xs[t], state);
    fh[t] = state.h;
  }
  Tensor fwd_last = state.h;
  state = lstm_zero_state(bwd.hidden_dim);
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_step(tape, bwd, xs[t], state);
    bh[t] = state.h;
  }
  BiLstmOut out;
  out.fwd_last = fwd_last;
  out.bwd_first = state.h;
  out.states.reserve(n);
  for (std::size_t t = 0; t < n; ++t)
    out.states.push_back(tape.concat(fh[t], bh[t]));
  return out;
}

// ----------------------------- convolution -----------------------------

// Convolution with max-over-time pooling: slides a window of `window` input
// vectors (right-padded with zero vectors when the sequence is shorter than
// the window), applies tanh(filters @ window + bias) per position, and takes
// the columnwise max.  filters is [m x window*d]; the result is [m].
inline Tensor cnnmax(Tape& tape, const Tensor& filters, const Tensor& bias,
                     const std::vector<Tensor>& xs, std::size_t window) {
  if (xs.empty()) throw DomainError("cnnmax on an empty sequence");
  if (window == 0) throw DomainError("cnnmax window must be >= 1");
  std::size_t d = xs[0].size();
  for (const Tensor& x : xs) {
    if (x.rank() != 1 || x.size() != d) {
      throw DimensionError("cnnmax inputs must share shape [" +
                           std::to_string(d) + "]");
    }
  }
  if (filters.rank() != 2 || filters.cols() != window * d) {
    throw DimensionError("cnnmax filters have shape " +
                         detail::shape_str(filters.shape()) + ", expected [m x " +
                         std::to_string(window * d) + "]");
  }
  std::size_t n = xs.size();
  std::size_t positions = n >= window ? n - window + 1 : 1;
  Tensor pad = Tensor::zeros({d});
  std::vector<Tensor> responses;
  responses.reserve(positions);
  for (std::size_t p = 0; p < positions; ++p) {
    std::vector<Tensor> parts;
    parts.reserve(window);
    for (std::size_t k = 0; k < window; ++k)
      parts.push_back(p + k < n ? xs[p + k] : pad);
    Tensor win = tape.concat(parts);
    responses.push_back(tape.tanh(tape.add(tape.matvec(filters, win), bias)));
  }
  return tape.max_over_time(tape.stack_rows(responses));
}

// Character CNN word feature: embeds the raw character ids (id 0 is the
// unseen-character row; an empty word maps to that single row) and pools
// with a width-3 window.
inline Tensor char_cnn_embed(Tape& tape, const Tensor& char_table,
                             const Tensor& filters, const Tensor& bias,
                             const std::vector<std::size_t>& char_ids,
                             std::size_t window = 3) {
  std::vector<std::size_t> ids = char_ids;
  if (ids.empty()) ids.push_back(0);
  std::vector<Tensor> rows;
  rows.reserve(ids.size());
  for (std::size_t id : ids) rows.push_back(tape.select_row(char_table, id));
  return cnnmax(tape, filters, bias, rows, window);
}

// ----------------------------- dropout -----------------------------

// Inverted dropout: in training, zeroes each coordinate with probability
// `rate` and scales survivors by 1/(1-rate) so the expectation is unchanged;
// in evaluation it is the identity (and consumes no randomness).
inline Tensor dropout_apply(Tape& tape, const Tensor& x, double rate,
                            bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw DomainError("dropout rate must lie in [0, 1)");
  }
  if (!train || rate == 0.0) return x;
  double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return tape.mul(x, Tensor(x.shape(), std::move(mask)));
}

// ----------------------------- classifier head -----------------------------

inline Tensor classify(Tape& tape, const Tensor& w, const Tensor& b,
                       const Tensor& x) {
  return tape.softmax(tape.add(tape.matvec(w, x), b));
}

// ----------------------------- pretrained embeddings -----------------------------

struct EmbeddingFile {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;  // keyed by normalized form
};

// Text format: one entry per line, "word v1 v2 ... vd", whitespace separated.
// The dimension is fixed by the first line.  Words are normalized the same
// way as vocabulary tokens; the first occurrence of a form wins.
inline EmbeddingFile load_embedding_file(std::istream& in,
                                         const std::string& filename = "<input>") {
  EmbeddingFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = detail::split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() < 2) {
      throw ParseError(filename + ":" + std::to_string(line_no) +
                       ": expected 'word v1 ... vd'");
    }
    std::vector<double> vec;
    vec.reserve(cols.size() - 1);
    for (std::size_t i = 1; i < cols.size(); ++i) {
      try {
        vec.push_back(std::stod(cols[i]));
      } catch (const std::exception&) {
        throw ParseError(filename + ":" + std::to_string(line_no) +
                         ": bad number '" + cols[i] + "'");
      }
    }
    if (file.dim == 0) file.dim = vec.size();
    if (vec.size() != file.dim) {
      throw ParseError(filename + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(file.dim) + " values, got " +
                       std::to_string(vec.size()));
    }
    file.vectors.emplace(Vocab::normalize(cols[0]), std::move(vec));
  }
  return file;
}

inline EmbeddingFile load_embedding_path(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return load_embedding_file(in, path);
}

// Overwrites the rows of `table` whose vocabulary token appears in the file;
// all other rows keep their random initialization.  Returns the number of
// rows written.
inline std::size_t apply_pretrained(const Tensor& table, const Vocab& vocab,
                                    const EmbeddingFile& file) {
  if (table.rank() != 2 || table.rows() != vocab.token_count() ||
      table.cols() != file.dim) {
    throw DimensionError("embedding table is " + detail::shape_str(table.shape()) +
                         " but vocabulary has " +
                         std::to_string(vocab.token_count()) +
                         " tokens of width " + std::to_string(file.dim));
  }
  std::size_t written = 0;
  for (std::size_t row = 0; row < vocab.tokens.size(); ++row) {
    auto it = file.vectors.find(vocab.tokens[row]);
    if (it == file.vectors.end()) continue;
    auto& values = table.values();
    for (std::size_t c = 0; c < file.dim; ++c)
      values[row * file.dim + c] = it->second[c];
    ++written;
  }
  return written;
}

}  // namespace chunkforge
