// Corpus handling: column-format parsing, the IOB tag codec, train/valid
// splitting, chunk statistics, and vocabulary construction.
//
// Tag alphabet: "O", labeled "B-X"/"I-X", and the bare segmentation tags
// "B"/"I" (used internally when boundaries are predicted separately from
// labels; bare tags never appear in data files).  A span list always tiles
// its sentence: labeled chunks cover their tokens and every O token is a
// length-1 span labeled "O".
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chunkforge/common.hpp"

namespace chunkforge {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> pos;  // filled by the 3-column format, else empty
  std::vector<std::string> gold_tags;
  std::size_t id = 0;

  std::size_t size() const { return tokens.size(); }
};

struct ChunkSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::string label;  // "O" for outside spans, "" for unlabeled segments

  bool operator==(const ChunkSpan&) const = default;
};

enum class CorpusFormat { chunking3col, slot2col };

// ----------------------------- tag helpers -----------------------------

inline bool valid_file_tag(const std::string& tag) {
  if (tag == "O") return true;
  return tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

inline char tag_prefix(const std::string& tag) {
  return tag.empty() ? 'O' : tag[0];
}

// "B-NP" -> "NP", "O" -> "O", bare "B"/"I" -> "".
inline std::string tag_label(const std::string& tag) {
  if (tag == "O") return "O";
  if (tag.size() >= 2 && tag[1] == '-') return tag.substr(2);
  return "";
}

inline std::string make_tag(char prefix, const std::string& label) {
  if (label == "O") return "O";
  if (label.empty()) return std::string(1, prefix);
  return std::string(1, prefix) + "-" + label;
}

// ----------------------------- parsing -----------------------------

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

inline std::vector<Sentence> parse_conll(std::istream& in, CorpusFormat format,
                                         const std::string& filename = "<input>") {
  const std::size_t want_cols = format == CorpusFormat::chunking3col ? 3 : 2;
  std::vector<Sentence> sentences;
  Sentence current;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      current.id = sentences.size();
      sentences.push_back(std::move(current));
      current = Sentence{};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cols = detail::split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.size() != want_cols) {
      throw ParseError(filename + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(want_cols) + " columns, got " +
                       std::to_string(cols.size()));
    }
    const std::string& tag = cols.back();
    if (!valid_file_tag(tag)) {
      throw ParseError(filename + ":" + std::to_string(line_no) +
                       ": malformed tag '" + tag + "'");
    }
    current.tokens.push_back(cols[0]);
    if (format == CorpusFormat::chunking3col) current.pos.push_back(cols[1]);
    current.gold_tags.push_back(tag);
  }
  flush();
  return sentences;
}

inline std::vector<Sentence> parse_conll_file(const std::string& path,
                                              CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_conll(in, format, path);
}

inline void serialize_conll(std::ostream& out,
                            const std::vector<Sentence>& sentences,
                            CorpusFormat format) {
  for (const Sentence& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (format == CorpusFormat::chunking3col) {
        out << s.tokens[i] << " " << (i < s.pos.size() ? s.pos[i] : "-") << " "
            << s.gold_tags[i] << "\n";
      } else {
        out << s.tokens[i] << " " << s.gold_tags[i] << "\n";
      }
    }
    out << "\n";
  }
}

// ----------------------------- IOB codec -----------------------------

// Canonicalizes a tag sequence: an I that cannot continue the previous chunk
// (sentence start, after O, or after a different label) becomes a B.  O and
// chunk labels are never changed, and the function is idempotent.
inline std::vector<std::string> repair_iob(const std::vector<std::string>& tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O" || tag_prefix(tag) == 'B') {
      out.push_back(tag);
      continue;
    }
    bool continues = false;
    if (i > 0) {
      const std::string& prev = out.back();
      continues = prev != "O" && tag_label(prev) == tag_label(tag);
    }
    out.push_back(continues ? tag : make_tag('B', tag_label(tag)));
  }
  return out;
}

inline bool is_repaired(const std::vector<std::string>& tags) {
  return tags == repair_iob(tags);
}

// Decomposes a repaired tag sequence into spans that tile the sentence:
// maximal B I...I runs become labeled chunks and each O token becomes a
// length-1 span labeled "O".
inline std::vector<ChunkSpan> iob_to_chunks(const std::vector<std::string>& tags) {
  if (!is_repaired(tags)) {
    throw StateError("iob_to_chunks requires a repaired tag sequence");
  }
  std::vector<ChunkSpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == "O") {
      spans.push_back({i, 1, "O"});
      continue;
    }
    // tags[i] starts with B here; extend over the following I run.
    std::string label = tag_label(tags[i]);
    std::size_t j = i + 1;
    while (j < tags.size() && tag_prefix(tags[j]) == 'I') ++j;
    spans.push_back({i, j - i, label});
    i = j - 1;
  }
  return spans;
}

// Inverse of iob_to_chunks.  The spans must tile [0, length) exactly.
inline std::vector<std::string> chunks_to_iob(const std::vector<ChunkSpan>& spans,
                                              std::size_t length) {
  std::vector<ChunkSpan> ordered = spans;
  std::sort(ordered.begin(), ordered.end(),
            [](const ChunkSpan& a, const ChunkSpan& b) { return a.begin < b.begin; });
  std::vector<std::string> out;
  out.reserve(length);
  std::size_t next = 0;
  for (const ChunkSpan& span : ordered) {
    if (span.length == 0) {
      throw TilingError("empty span at index " + std::to_string(span.begin));
    }
    if (span.begin != next) {
      throw TilingError((span.begin > next ? "gap" : "overlap") +
                        std::string(" at index ") + std::to_string(std::min(span.begin, next)));
    }
    if (span.begin + span.length > length) {
      throw TilingError("span at index " + std::to_string(span.begin) +
                        " extends past sentence end");
    }
    if (span.label == "O") {
      for (std::size_t k = 0; k < span.length; ++k) out.push_back("O");
    } else {
      out.push_back(make_tag('B', span.label));
      for (std::size_t k = 1; k < span.length; ++k)
        out.push_back(make_tag('I', span.label));
    }
    next = span.begin + span.length;
  }
  if (next != length) {
    throw TilingError("gap at index " + std::to_string(next));
  }
  return out;
}

// ----------------------------- dataset utilities -----------------------------

// Shuffles deterministically under the seed, then takes the first
// n - floor(n * fraction) sentences as train and the remainder as valid.
inline std::pair<std::vector<Sentence>, std::vector<Sentence>> split_train_valid(
    const std::vector<Sentence>& sentences, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw DomainError("split fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t n = sentences.size();
  // The small epsilon guards against 0.1 * n landing a hair under an integer.
  auto valid_count = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * fraction + 1e-9));
  std::size_t train_count = n - valid_count;
  std::pair<std::vector<Sentence>, std::vector<Sentence>> out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < train_count ? out.first : out.second).push_back(sentences[order[i]]);
  }
  return out;
}

struct LengthHistogram {
  std::array<std::size_t, 3> counts{};  // chunk lengths 1, 2, >= 3
  std::array<double, 3> percents{};
  std::size_t total = 0;
};

inline LengthHistogram chunk_length_histogram(const std::vector<Sentence>& sentences) {
  LengthHistogram h;
  for (const Sentence& s : sentences) {
    for (const ChunkSpan& span : iob_to_chunks(repair_iob(s.gold_tags))) {
      if (span.label == "O") continue;
      ++h.counts[span.length >= 3 ? 2 : span.length - 1];
      ++h.total;
    }
  }
  if (h.total > 0) {
    for (std::size_t i = 0; i < 3; ++i)
      h.percents[i] = 100.0 * static_cast<double>(h.counts[i]) /
                      static_cast<double>(h.total);
  }
  return h;
}

// ----------------------------- vocabulary -----------------------------

struct Vocab {
  static constexpr std::size_t kOov = 0;
  static constexpr std::size_t kPad = 1;

  std::vector<std::string> tokens;  // [0] = <oov>, [1] = <pad>, then corpus order
  std::unordered_map<std::string, std::size_t> token_index;
  std::string char_list;  // distinct raw characters, sorted; char id = pos + 1
  std::unordered_map<char, std::size_t> char_index;  // 0 reserved for unseen
  std::vector<std::string> labels;  // content labels, sorted, no "O"
  std::unordered_map<std::string, std::size_t> label_index;
  std::vector<std::string> tags;  // "O" first, then B-X, I-X per label
  std::unordered_map<std::string, std::size_t> tag_index;

  // Lowercases ASCII letters and maps every digit to '0', so "Ab3" and "aB7"
  // share the row "ab0".  Raw characters keep their case for the char CNN.
  static std::string normalize(const std::string& raw) {
    std::string out = raw;
    for (char& c : out) {
      auto u = static_cast<unsigned char>(c);
      if (std::isdigit(u)) {
        c = '0';
      } else {
        c = static_cast<char>(std::tolower(u));
      }
    }
    return out;
  }

  std::size_t token_count() const { return tokens.size(); }
  std::size_t char_count() const { return char_list.size() + 1; }

  std::size_t lookup_token(const std::string& raw) const {
    auto it = token_index.find(normalize(raw));
    return it == token_index.end() ? kOov : it->second;
  }

  std::size_t lookup_char(char c) const {
    auto it = char_index.find(c);
    return it == char_index.end() ? 0 : it->second;
  }

  std::size_t lookup_label(const std::string& label) const {
    auto it = label_index.find(label);
    if (it == label_index.end()) {
      throw IndexError("label '" + label + "' not in training vocabulary");
    }
    return it->second;
  }

  std::size_t lookup_tag(const std::string& tag) const {
    auto it = tag_index.find(tag);
    if (it == tag_index.end()) {
      throw IndexError("tag '" + tag + "' not in training vocabulary");
    }
    return it->second;
  }

  std::uint64_t token_hash() const {
    std::uint64_t h = fnv1a("tokens");
    for (const std::string& t : tokens) h = fnv1a("\n", fnv1a(t, h));
    return h;
  }

  std::uint64_t label_hash() const {
    std::uint64_t h = fnv1a("labels");
    for (const std::string& l : labels) h = fnv1a("\n", fnv1a(l, h));
    return h;
  }

  std::uint64_t char_hash() const { return fnv1a(char_list, fnv1a("chars")); }
};

// Builds the vocabulary from training sentences only.  Token identity is the
// normalized form; tokens seen fewer than min_count times fall back to the
// <oov> row.  Characters are taken raw (case kept).  Labels come from the
// gold chunks; the tag list is "O" plus B-/I- per label.
inline Vocab build_vocab(const std::vector<Sentence>& train,
                         std::size_t min_count = 1) {
  Vocab v;
  v.tokens = {"<oov>", "<pad>"};
  v.token_index = {{"<oov>", Vocab::kOov}, {"<pad>", Vocab::kPad}};

  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> first_seen;
  std::set<char> char_set;
  std::set<std::string> label_set;
  for (const Sentence& s : train) {
    for (const std::string& raw : s.tokens) {
      std::string norm = Vocab::normalize(raw);
      if (counts[norm]++ == 0) first_seen.push_back(norm);
      for (char c : raw) char_set.insert(c);
    }
    for (const std::string& tag : s.gold_tags) {
      std::string label = tag_label(tag);
      if (label != "O" && !label.empty()) label_set.insert(label);
    }
  }
  for (const std::string& tok : first_seen) {
    if (counts[tok] < min_count) continue;
    v.token_index.emplace(tok, v.tokens.size());
    v.tokens.push_back(tok);
  }
  for (char c : char_set) {
    v.char_index.emplace(c, v.char_list.size() + 1);
    v.char_list.push_back(c);
  }
  v.labels.assign(label_set.begin(), label_set.end());
  for (std::size_t i = 0; i < v.labels.size(); ++i)
    v.label_index.emplace(v.labels[i], i);
  v.tags = {"O"};
  for (const std::string& label : v.labels) {
    v.tags.push_back("B-" + label);
    v.tags.push_back("I-" + label);
  }
  for (std::size_t i = 0; i < v.tags.size(); ++i) v.tag_index.emplace(v.tags[i], i);
  return v;
}

}  // namespace chunkforge
