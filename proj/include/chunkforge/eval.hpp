// Chunk-level evaluation: exact span matching with the same semantics as the
// classic CoNLL scoring script.  Tags are repaired, decomposed into spans,
// O spans dropped, and a predicted chunk counts as correct only when its
// boundaries and label both match a gold chunk.  Precision, recall, and FB1
// are reported in percent.
#pragma once

#include <array>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "chunkforge/common.hpp"
#include "chunkforge/corpus.hpp"

namespace chunkforge {

struct BucketScore {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  double precision() const {
    return predicted == 0 ? 0.0
                          : 100.0 * static_cast<double>(correct) /
                                static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0 ? 0.0
                     : 100.0 * static_cast<double>(correct) /
                           static_cast<double>(gold);
  }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  // A bucket with no gold and no predicted chunks has no defined score.
  bool applicable() const { return gold + predicted > 0; }
};

struct EvalReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  BucketScore overall;
  std::map<std::string, BucketScore> per_label;
  std::array<BucketScore, 3> per_length{};  // chunk lengths 1, 2, >= 3
};

using TagSeqs = std::vector<std::vector<std::string>>;

// Scoring-side chunk extraction: tolerant of unrepaired input.
inline std::vector<ChunkSpan> eval_chunks(const std::vector<std::string>& tags) {
  std::vector<ChunkSpan> out;
  for (const ChunkSpan& span : iob_to_chunks(repair_iob(tags))) {
    if (span.label != "O") out.push_back(span);
  }
  return out;
}

inline std::size_t length_bucket(std::size_t len) {
  return len >= 3 ? 2 : len - 1;
}

inline EvalReport chunk_f1(const TagSeqs& gold, const TagSeqs& pred) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) +
                         " sentences, predictions have " +
                         std::to_string(pred.size()));
  }
  EvalReport report;
  report.sentences = gold.size();
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw AlignmentError("sentence " + std::to_string(s) + ": gold has " +
                           std::to_string(gold[s].size()) +
                           " tokens, prediction has " +
                           std::to_string(pred[s].size()));
    }
    report.tokens += gold[s].size();
    auto gold_spans = eval_chunks(gold[s]);
    auto pred_spans = eval_chunks(pred[s]);
    std::set<std::tuple<std::size_t, std::size_t, std::string>> gold_set;
    for (const ChunkSpan& g : gold_spans) {
      gold_set.emplace(g.begin, g.length, g.label);
      ++report.overall.gold;
      ++report.per_label[g.label].gold;
      ++report.per_length[length_bucket(g.length)].gold;
    }
    for (const ChunkSpan& p : pred_spans) {
      ++report.overall.predicted;
      ++report.per_label[p.label].predicted;
      ++report.per_length[length_bucket(p.length)].predicted;
      if (gold_set.count({p.begin, p.length, p.label})) {
        ++report.overall.correct;
        ++report.per_label[p.label].correct;
        ++report.per_length[length_bucket(p.length)].correct;
      }
    }
  }
  return report;
}

// Strips labels down to {O, B, I} so only boundaries are compared.
inline std::vector<std::string> strip_labels(const std::vector<std::string>& tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (const std::string& tag : tags)
    out.push_back(tag == "O" ? "O" : std::string(1, tag_prefix(tag)));
  return out;
}

inline EvalReport segment_f1(const TagSeqs& gold, const TagSeqs& pred) {
  TagSeqs g, p;
  g.reserve(gold.size());
  p.reserve(pred.size());
  for (const auto& t : gold) g.push_back(strip_labels(t));
  for (const auto& t : pred) p.push_back(strip_labels(t));
  return chunk_f1(g, p);
}

inline std::array<BucketScore, 3> per_length_f1(const TagSeqs& gold,
                                                const TagSeqs& pred) {
  return chunk_f1(gold, pred).per_length;
}

// ----------------------------- rendering -----------------------------

inline std::string render_report(const EvalReport& r,
                                 const std::string& title = "") {
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  out << "processed " << r.sentences << " sentences, " << r.tokens
      << " tokens\n";
  out << "phrases: gold " << r.overall.gold << ", found " << r.overall.predicted
      << ", correct " << r.overall.correct << "\n";
  out << "overall: precision " << format_fixed(r.overall.precision(), 2)
      << "%  recall " << format_fixed(r.overall.recall(), 2) << "%  FB1 "
      << format_fixed(r.overall.f1(), 2) << "\n";
  for (const auto& [label, b] : r.per_label) {
    out << "  " << (label.empty() ? "<segment>" : label) << ": precision "
        << format_fixed(b.precision(), 2) << "%  recall "
        << format_fixed(b.recall(), 2) << "%  FB1 " << format_fixed(b.f1(), 2)
        << "  (gold " << b.gold << ", found " << b.predicted << ")\n";
  }
  static const char* kBucketNames[3] = {"length 1", "length 2", "length >=3"};
  for (std::size_t i = 0; i < 3; ++i) {
    const BucketScore& b = r.per_length[i];
    out << "  " << kBucketNames[i] << ": ";
    if (!b.applicable()) {
      out << "n/a\n";
    } else {
      out << "precision " << format_fixed(b.precision(), 2) << "%  recall "
          << format_fixed(b.recall(), 2) << "%  FB1 " << format_fixed(b.f1(), 2)
          << "  (gold " << b.gold << ", found " << b.predicted << ")\n";
    }
  }
  return out.str();
}

// Machine-readable key=value block.  Segment scores are included when a
// boundary-only report is supplied.
inline std::string render_metrics(const EvalReport& chunks,
                                  const EvalReport* segments = nullptr) {
  std::ostringstream out;
  out << "tokens=" << chunks.tokens << "\n";
  out << "gold_chunks=" << chunks.overall.gold << "\n";
  out << "pred_chunks=" << chunks.overall.predicted << "\n";
  out << "correct_chunks=" << chunks.overall.correct << "\n";
  out << "precision=" << format_fixed(chunks.overall.precision(), 2) << "\n";
  out << "recall=" << format_fixed(chunks.overall.recall(), 2) << "\n";
  out << "f1=" << format_fixed(chunks.overall.f1(), 2) << "\n";
  if (segments != nullptr) {
    out << "segment_precision=" << format_fixed(segments->overall.precision(), 2)
        << "\n";
    out << "segment_recall=" << format_fixed(segments->overall.recall(), 2)
        << "\n";
    out << "segment_f1=" << format_fixed(segments->overall.f1(), 2) << "\n";
  }
  static const char* kKeys[3] = {"length1_f1", "length2_f1", "length3plus_f1"};
  for (std::size_t i = 0; i < 3; ++i) {
    const BucketScore& b = chunks.per_length[i];
    out << kKeys[i] << "="
        << (b.applicable() ? format_fixed(b.f1(), 2) : std::string("n/a"))
        << "\n";
  }
  return out.str();
}

// ----------------------------- tagged-file input -----------------------------

// Reads "token gold pred" lines with blank-line sentence breaks, the layout
// written by --dump and accepted for standalone scoring.
struct TaggedFile {
  std::vector<std::vector<std::string>> tokens;
  TagSeqs gold;
  TagSeqs pred;
};

inline TaggedFile read_tagged(std::istream& in,
                              const std::string& filename = "<input>") {
  TaggedFile out;
  std::vector<std::string> toks, gold, pred;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!toks.empty()) {
      out.tokens.push_back(std::move(toks));
      out.gold.push_back(std::move(gold));
      out.pred.push_back(std::move(pred));
      toks.clear();
      gold.clear();
      pred.clear();
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = detail::split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.size() != 3) {
      throw ParseError(filename + ":" + std::to_string(line_no) +
                       ": expected 'token gold pred', got " +
                       std::to_string(cols.size()) + " columns");
    }
    toks.push_back(cols[0]);
    gold.push_back(cols[1]);
    pred.push_back(cols[2]);
  }
  flush();
  return out;
}

}  // namespace chunkforge
