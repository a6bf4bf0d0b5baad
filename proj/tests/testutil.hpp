// Helpers shared by the test binaries.
#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkforge/common.hpp"
#include "chunkforge/corpus.hpp"

namespace testutil {

inline std::string source_path(const std::string& rel) {
  return std::string(CHUNKFORGE_SOURCE_DIR) + "/" + rel;
}

// Random span tiling of [0, len): O tokens as length-1 spans, labeled chunks
// of length 1..4.  Repaired by construction.
inline std::vector<chunkforge::ChunkSpan> random_tiling(
    chunkforge::Rng& rng, std::size_t len,
    const std::vector<std::string>& labels) {
  std::vector<chunkforge::ChunkSpan> spans;
  std::size_t pos = 0;
  while (pos < len) {
    if (rng.below(3) == 0) {
      spans.push_back({pos, 1, "O"});
      pos += 1;
    } else {
      std::size_t max_len = std::min<std::size_t>(4, len - pos);
      std::size_t l = 1 + rng.below(max_len);
      spans.push_back({pos, l, labels[rng.below(labels.size())]});
      pos += l;
    }
  }
  return spans;
}

// One frozen scoring fixture: tag pairs plus the reference scorer's output.
struct ScoringCase {
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> pred;
  std::string precision, recall, f1;  // "%.2f" strings from the reference
  std::size_t gold_chunks = 0, pred_chunks = 0, correct_chunks = 0;
};

inline std::vector<ScoringCase> load_scoring_cases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fixture file " + path);
  std::vector<ScoringCase> cases;
  ScoringCase current;
  std::vector<std::string> gold_sent, pred_sent;
  std::string line;
  auto flush_sentence = [&] {
    if (!gold_sent.empty()) {
      current.gold.push_back(gold_sent);
      current.pred.push_back(pred_sent);
      gold_sent.clear();
      pred_sent.clear();
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush_sentence();
      continue;
    }
    if (line[0] == '#') continue;
    if (line.rfind("==", 0) == 0) {
      flush_sentence();
      std::istringstream fields(line.substr(2));
      fields >> current.precision >> current.recall >> current.f1 >>
          current.gold_chunks >> current.pred_chunks >> current.correct_chunks;
      cases.push_back(std::move(current));
      current = ScoringCase{};
      continue;
    }
    std::istringstream pair(line);
    std::string g, p;
    pair >> g >> p;
    gold_sent.push_back(g);
    pred_sent.push_back(p);
  }
  return cases;
}

// Arbitrary tag stream over {O} + {B-,I-} x labels; frequently unrepaired.
inline std::vector<std::string> random_tag_stream(
    chunkforge::Rng& rng, std::size_t len,
    const std::vector<std::string>& labels) {
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t pick = rng.below(1 + 2 * labels.size());
    if (pick == 0) {
      tags.push_back("O");
    } else {
      const std::string& label = labels[(pick - 1) / 2];
      tags.push_back(((pick - 1) % 2 == 0 ? "B-" : "I-") + label);
    }
  }
  return tags;
}

}  // namespace testutil
