#include "chunkforge/corpus.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "testutil.hpp"

using namespace chunkforge;

TEST(Parse, ThreeColumnBasic) {
  std::istringstream in(
      "He PRP B-NP\n"
      "reckons  VBZ\tB-VP\n"
      "\n"
      "\n"
      "Yes UH O\r\n"
      "\n");
  auto sents = parse_conll(in, CorpusFormat::chunking3col, "t.txt");
  ASSERT_EQ(sents.size(), 2u);
  EXPECT_EQ(sents[0].tokens, (std::vector<std::string>{"He", "reckons"}));
  EXPECT_EQ(sents[0].pos, (std::vector<std::string>{"PRP", "VBZ"}));
  EXPECT_EQ(sents[0].gold_tags, (std::vector<std::string>{"B-NP", "B-VP"}));
  EXPECT_EQ(sents[0].id, 0u);
  EXPECT_EQ(sents[1].tokens, (std::vector<std::string>{"Yes"}));
  EXPECT_EQ(sents[1].id, 1u);
}

TEST(Parse, TwoColumnBasic) {
  std::istringstream in(
      "show O\n"
      "flights O\n"
      "boston B-fromloc.city_name\n");
  auto sents = parse_conll(in, CorpusFormat::slot2col);
  ASSERT_EQ(sents.size(), 1u);
  EXPECT_TRUE(sents[0].pos.empty());
  EXPECT_EQ(sents[0].gold_tags[2], "B-fromloc.city_name");
}

TEST(Parse, ReportsColumnCountWithLineNumber) {
  std::istringstream in("ok PRP B-NP\nbad B-NP\n");
  try {
    parse_conll(in, CorpusFormat::chunking3col, "f.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("f.txt:2"), std::string::npos);
  }
}

TEST(Parse, RejectsMalformedTags) {
  for (const char* tag : {"X-NP", "B", "I", "B-", "o"}) {
    std::istringstream in(std::string("word ") + tag + "\n");
    EXPECT_THROW(parse_conll(in, CorpusFormat::slot2col), ParseError) << tag;
  }
}

TEST(Parse, EmptyStreamYieldsNoSentences) {
  std::istringstream in("\n\n");
  EXPECT_TRUE(parse_conll(in, CorpusFormat::slot2col).empty());
}

TEST(Parse, MissingFileThrows) {
  EXPECT_THROW(parse_conll_file("/nonexistent/x.txt", CorpusFormat::slot2col),
               ParseError);
}

TEST(Parse, SerializeRoundTripIsIdentity) {
  std::istringstream in(
      "He PRP B-NP\n"
      "runs VBZ B-VP\n"
      "\n"
      "Stop VB B-VP\n");
  auto sents = parse_conll(in, CorpusFormat::chunking3col);
  std::ostringstream out;
  serialize_conll(out, sents, CorpusFormat::chunking3col);
  std::istringstream again(out.str());
  auto sents2 = parse_conll(again, CorpusFormat::chunking3col);
  ASSERT_EQ(sents2.size(), sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    EXPECT_EQ(sents2[i].tokens, sents[i].tokens);
    EXPECT_EQ(sents2[i].pos, sents[i].pos);
    EXPECT_EQ(sents2[i].gold_tags, sents[i].gold_tags);
  }
}

TEST(Repair, HandCases) {
  using V = std::vector<std::string>;
  EXPECT_EQ(repair_iob(V{"I-NP"}), (V{"B-NP"}));
  EXPECT_EQ(repair_iob(V{"O", "I-NP"}), (V{"O", "B-NP"}));
  EXPECT_EQ(repair_iob(V{"B-NP", "I-VP"}), (V{"B-NP", "B-VP"}));
  EXPECT_EQ(repair_iob(V{"B-NP", "I-NP"}), (V{"B-NP", "I-NP"}));
  EXPECT_EQ(repair_iob(V{"B-NP", "I-NP", "I-VP"}), (V{"B-NP", "I-NP", "B-VP"}));
  // Bare segmentation alphabet follows the same rules.
  EXPECT_EQ(repair_iob(V{"I"}), (V{"B"}));
  EXPECT_EQ(repair_iob(V{"O", "I", "I"}), (V{"O", "B", "I"}));
  EXPECT_EQ(repair_iob(V{"B-NP", "I"}), (V{"B-NP", "B"}));
  EXPECT_EQ(repair_iob(V{}), (V{}));
}

TEST(Repair, IdempotentOnRandomStreams) {
  Rng rng(101);
  std::vector<std::string> labels = {"NP", "VP", "PP"};
  for (int trial = 0; trial < 2000; ++trial) {
    auto tags = testutil::random_tag_stream(rng, 1 + rng.below(12), labels);
    auto once = repair_iob(tags);
    EXPECT_EQ(repair_iob(once), once);
    // O positions and chunk labels survive repair.
    for (std::size_t i = 0; i < tags.size(); ++i) {
      EXPECT_EQ(tags[i] == "O", once[i] == "O");
      EXPECT_EQ(tag_label(tags[i]), tag_label(once[i]));
    }
  }
}

TEST(Codec, FigureSentenceSpans) {
  // "But it could be much worse" with one O token and three chunks.
  std::vector<std::string> tags = {"O",      "B-NP",   "B-VP",
                                   "I-VP",   "B-ADJP", "I-ADJP"};
  auto spans = iob_to_chunks(tags);
  ASSERT_EQ(spans.size(), 4u);
  EXPECT_EQ(spans[0], (ChunkSpan{0, 1, "O"}));
  EXPECT_EQ(spans[1], (ChunkSpan{1, 1, "NP"}));
  EXPECT_EQ(spans[2], (ChunkSpan{2, 2, "VP"}));
  EXPECT_EQ(spans[3], (ChunkSpan{4, 2, "ADJP"}));
}

TEST(Codec, RejectsUnrepairedInput) {
  EXPECT_THROW(iob_to_chunks({"O", "I-NP"}), StateError);
  EXPECT_THROW(iob_to_chunks({"B-NP", "I-VP"}), StateError);
}

TEST(Codec, SpansTileTheSentence) {
  Rng rng(55);
  std::vector<std::string> labels = {"NP", "VP"};
  for (int trial = 0; trial < 500; ++trial) {
    auto tags = repair_iob(testutil::random_tag_stream(rng, 1 + rng.below(15), labels));
    auto spans = iob_to_chunks(tags);
    std::size_t next = 0;
    for (const auto& s : spans) {
      EXPECT_EQ(s.begin, next);
      EXPECT_GE(s.length, 1u);
      next += s.length;
    }
    EXPECT_EQ(next, tags.size());
  }
}

TEST(Codec, ChunksToIobTilingErrors) {
  using S = std::vector<ChunkSpan>;
  EXPECT_THROW(chunks_to_iob(S{{0, 1, "NP"}, {2, 1, "VP"}}, 3), TilingError);  // gap
  EXPECT_THROW(chunks_to_iob(S{{0, 2, "NP"}, {1, 1, "VP"}}, 3), TilingError);  // overlap
  EXPECT_THROW(chunks_to_iob(S{{0, 4, "NP"}}, 3), TilingError);  // past end
  EXPECT_THROW(chunks_to_iob(S{{0, 2, "NP"}}, 3), TilingError);  // missing tail
  EXPECT_THROW(chunks_to_iob(S{{0, 0, "NP"}, {0, 3, "NP"}}, 3), TilingError);  // empty
}

TEST(Codec, MultiTokenOutsideSpanEmitsPlainO) {
  auto tags = chunks_to_iob({{0, 2, "O"}, {2, 1, "NP"}}, 3);
  EXPECT_EQ(tags, (std::vector<std::string>{"O", "O", "B-NP"}));
}

TEST(Codec, UnlabeledSegmentsUseBareTags) {
  auto tags = chunks_to_iob({{0, 2, ""}, {2, 1, "O"}}, 3);
  EXPECT_EQ(tags, (std::vector<std::string>{"B", "I", "O"}));
  auto spans = iob_to_chunks(tags);
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0], (ChunkSpan{0, 2, ""}));
}

TEST(Codec, RoundTripOnRandomTilings) {
  Rng rng(77);
  std::vector<std::string> labels = {"NP", "VP", "PP", "ADJP"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t len = 1 + rng.below(20);
    auto spans = testutil::random_tiling(rng, len, labels);
    auto tags = chunks_to_iob(spans, len);
    EXPECT_TRUE(is_repaired(tags));
    EXPECT_EQ(iob_to_chunks(tags), spans);
    EXPECT_EQ(chunks_to_iob(iob_to_chunks(tags), len), tags);
  }
}

TEST(Split, ArithmeticMatchesCeilingRule) {
  std::vector<Sentence> corpus(8936);
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i].id = i;
  auto [train, valid] = split_train_valid(corpus, 0.1, 42);
  EXPECT_EQ(train.size(), 8043u);
  EXPECT_EQ(valid.size(), 893u);

  std::vector<Sentence> ten(10);
  auto [t10, v10] = split_train_valid(ten, 0.1, 1);
  EXPECT_EQ(t10.size(), 9u);
  EXPECT_EQ(v10.size(), 1u);
}

TEST(Split, DeterministicDisjointAndComplete) {
  std::vector<Sentence> corpus(100);
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i].id = i;
  auto [a_train, a_valid] = split_train_valid(corpus, 0.2, 9);
  auto [b_train, b_valid] = split_train_valid(corpus, 0.2, 9);
  ASSERT_EQ(a_train.size(), b_train.size());
  for (std::size_t i = 0; i < a_train.size(); ++i)
    EXPECT_EQ(a_train[i].id, b_train[i].id);

  std::set<std::size_t> seen;
  for (const auto& s : a_train) seen.insert(s.id);
  for (const auto& s : a_valid) seen.insert(s.id);
  EXPECT_EQ(seen.size(), 100u);

  // A different seed produces a different shuffle.
  auto [c_train, c_valid] = split_train_valid(corpus, 0.2, 10);
  bool any_diff = false;
  for (std::size_t i = 0; i < a_train.size(); ++i)
    any_diff = any_diff || a_train[i].id != c_train[i].id;
  EXPECT_TRUE(any_diff);
}

TEST(Split, RejectsFractionOutsideRange) {
  std::vector<Sentence> corpus(5);
  EXPECT_THROW(split_train_valid(corpus, 1.0, 1), DomainError);
  EXPECT_THROW(split_train_valid(corpus, -0.1, 1), DomainError);
}

TEST(Histogram, HandCase) {
  // Chunks of lengths 1, 1, 2, 3, 5 -> buckets [2, 1, 2].
  std::istringstream in(
      "a B-NP\nb B-VP\n\n"
      "c B-NP\nd I-NP\ne O\n\n"
      "f B-PP\ng I-PP\nh I-PP\n\n"
      "i B-NP\nj I-NP\nk I-NP\nl I-NP\nm I-NP\n");
  auto sents = parse_conll(in, CorpusFormat::slot2col);
  auto h = chunk_length_histogram(sents);
  EXPECT_EQ(h.total, 5u);
  EXPECT_EQ(h.counts, (std::array<std::size_t, 3>{2, 1, 2}));
  EXPECT_NEAR(h.percents[0], 40.0, 1e-9);
  EXPECT_NEAR(h.percents[1], 20.0, 1e-9);
  EXPECT_NEAR(h.percents[2], 40.0, 1e-9);
  EXPECT_NEAR(h.percents[0] + h.percents[1] + h.percents[2], 100.0, 0.1);
}

TEST(Histogram, EmptyCorpusIsAllZero) {
  auto h = chunk_length_histogram({});
  EXPECT_EQ(h.total, 0u);
  EXPECT_EQ(h.counts, (std::array<std::size_t, 3>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(h.percents[0], 0.0);
}

TEST(Vocab, NormalizationLowercasesAndMapsDigits) {
  EXPECT_EQ(Vocab::normalize("Ab3"), "ab0");
  EXPECT_EQ(Vocab::normalize("WORLD-99"), "world-00");
  EXPECT_EQ(Vocab::normalize("x"), "x");
  EXPECT_EQ(Vocab::normalize("1234"), "0000");
}

TEST(Vocab, BuildAssignsReservedAndCorpusOrderIds) {
  std::istringstream in(
      "Show O\nme B-X\nflights B-Y\n\n"
      "show O\nME O\n");
  auto sents = parse_conll(in, CorpusFormat::slot2col);
  Vocab v = build_vocab(sents);
  EXPECT_EQ(v.tokens[Vocab::kOov], "<oov>");
  EXPECT_EQ(v.tokens[Vocab::kPad], "<pad>");
  // First-occurrence order of normalized forms: show, me, flights.
  EXPECT_EQ(v.lookup_token("Show"), 2u);
  EXPECT_EQ(v.lookup_token("show"), 2u);
  EXPECT_EQ(v.lookup_token("ME"), 3u);
  EXPECT_EQ(v.lookup_token("flights"), 4u);
  EXPECT_EQ(v.lookup_token("unseen"), Vocab::kOov);
  EXPECT_EQ(v.token_count(), 5u);
  // Labels sorted; tag list O-first with B/I pairs in label order.
  EXPECT_EQ(v.labels, (std::vector<std::string>{"X", "Y"}));
  EXPECT_EQ(v.tags,
            (std::vector<std::string>{"O", "B-X", "I-X", "B-Y", "I-Y"}));
  EXPECT_EQ(v.lookup_tag("I-Y"), 4u);
  EXPECT_THROW(v.lookup_label("Z"), IndexError);
  EXPECT_THROW(v.lookup_tag("B-Z"), IndexError);
}

TEST(Vocab, CharInventoryIsRawAndCaseSensitive) {
  std::istringstream in("Ab O\nba O\n");
  auto sents = parse_conll(in, CorpusFormat::slot2col);
  Vocab v = build_vocab(sents);
  // Distinct raw chars sorted: 'A', 'a', 'b'.
  EXPECT_EQ(v.char_list, "Aab");
  EXPECT_EQ(v.lookup_char('A'), 1u);
  EXPECT_EQ(v.lookup_char('a'), 2u);
  EXPECT_EQ(v.lookup_char('z'), 0u);
  EXPECT_EQ(v.char_count(), 4u);  // three chars plus the unseen slot
}

TEST(Vocab, MinCountFiltersRareTokens) {
  std::istringstream in("rare O\ncommon O\n\ncommon O\n");
  auto sents = parse_conll(in, CorpusFormat::slot2col);
  Vocab v = build_vocab(sents, 2);
  EXPECT_EQ(v.lookup_token("rare"), Vocab::kOov);
  EXPECT_NE(v.lookup_token("common"), Vocab::kOov);
}

TEST(Vocab, HashesTrackContent) {
  std::istringstream in1("a B-X\n");
  std::istringstream in2("a B-X\n");
  std::istringstream in3("b B-X\n");
  Vocab v1 = build_vocab(parse_conll(in1, CorpusFormat::slot2col));
  Vocab v2 = build_vocab(parse_conll(in2, CorpusFormat::slot2col));
  Vocab v3 = build_vocab(parse_conll(in3, CorpusFormat::slot2col));
  EXPECT_EQ(v1.token_hash(), v2.token_hash());
  EXPECT_EQ(v1.label_hash(), v2.label_hash());
  EXPECT_NE(v1.token_hash(), v3.token_hash());
  EXPECT_EQ(v1.label_hash(), v3.label_hash());
}
