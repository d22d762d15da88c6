#include <gtest/gtest.h>

#include <set>

#include "ffgan/errors.hpp"
#include "ffgan/toyshapes.hpp"
#include "ffgan/vocabulary.hpp"
#include "support/fixtures.hpp"

namespace ffgan {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("A Red, circle!"), (TokenList{"a", "red", "circle"}));
  EXPECT_EQ(tokenize("  on\tthe   left. "), (TokenList{"on", "the", "left"}));
  EXPECT_TRUE(tokenize(" ,.; ").empty());
}

TEST(BuildVocabulary, TieBrokenLexicographically) {
  auto v = build_vocabulary({{"red", "circle"}, {"red", "square"}}, 1);
  ASSERT_EQ(v.size(), 5);
  EXPECT_EQ(v.id("red"), 2);
  EXPECT_EQ(v.id("circle"), 3);
  EXPECT_EQ(v.id("square"), 4);
}

TEST(BuildVocabulary, MinCountCanExcludeEverything) {
  auto v = build_vocabulary({{"a", "a"}}, 3);
  EXPECT_EQ(v.size(), 2);
  EXPECT_EQ(v.id("a"), Vocabulary::kUnkId);
}

TEST(BuildVocabulary, EmptyCorpusIsAnError) { EXPECT_THROW(build_vocabulary({}, 1), ConfigurationError); }

TEST(BuildVocabulary, ShapesGrammarGivesTerminalsPlusTwo) {
  const auto specs = toyshapes::all_specs();
  std::vector<TokenList> corpus;
  for (int i = 0; i < 5000; ++i) {
    corpus.push_back(toyshapes::caption_for(specs[static_cast<size_t>(i) % specs.size()], static_cast<uint64_t>(i)));
  }
  auto v = build_vocabulary(corpus, 1);
  EXPECT_EQ(v.size(), static_cast<int64_t>(toyshapes::grammar_terminals().size()) + 2);
}

TEST(Vocabulary, IdsAreContiguousAndBijective) {
  auto v = build_vocabulary({{"x", "y", "z", "x"}, {"w"}}, 1);
  EXPECT_NE(v.pad_id(), v.unk_id());
  std::set<std::string> seen;
  for (int64_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v.id(v.token(i)), i);
    seen.insert(v.token(i));
  }
  EXPECT_EQ(static_cast<int64_t>(seen.size()), v.size());
  EXPECT_THROW(v.token(v.size()), LookupError);
}

TEST(Vocabulary, SaveLoadRoundTripIsByteStable) {
  auto dir = testing::scratch_dir("vocab");
  auto v = build_vocabulary({{"red", "circle"}, {"blue", "square", "red"}}, 1);
  v.save(dir / "a.tsv");
  auto back = Vocabulary::load(dir / "a.tsv");
  EXPECT_EQ(back, v);
  back.save(dir / "b.tsv");
  EXPECT_EQ(testing::read_file(dir / "a.tsv"), testing::read_file(dir / "b.tsv"));
}

TEST(EncodeCaption, PadsToMaxLength) {
  auto v = build_vocabulary({{"red", "circle"}}, 1);
  auto c = encode_caption({"red", "circle"}, v, 5);
  EXPECT_EQ(c.ids, (std::vector<int64_t>{v.id("red"), v.id("circle"), 0, 0, 0}));
  EXPECT_EQ(c.length, 2);
  EXPECT_EQ(c.mask, (std::vector<bool>{true, true, false, false, false}));
}

TEST(EncodeCaption, TruncatesAtMaxLength) {
  auto v = build_vocabulary({{"w"}}, 1);
  auto c = encode_caption(TokenList(20, "w"), v, 18);
  EXPECT_EQ(c.length, 18);
  EXPECT_EQ(c.max_length(), 18);
  for (bool m : c.mask) EXPECT_TRUE(m);
}

TEST(EncodeCaption, EmptyIsAnError) {
  auto v = build_vocabulary({{"w"}}, 1);
  EXPECT_THROW(encode_caption({}, v, 5), PreconditionError);
}

TEST(EncodeCaption, UnknownTokensMapToUnk) {
  auto v = build_vocabulary({{"w"}}, 1);
  auto c = encode_caption({"w", "nope"}, v, 4);
  EXPECT_EQ(c.ids[1], Vocabulary::kUnkId);
}

TEST(EncodeCaption, MaskIsAPrefixAndPaddingIsPad) {
  auto v = build_vocabulary({{"a", "b", "c"}}, 1);
  for (int n = 1; n <= 6; ++n) {
    auto c = encode_caption(TokenList(static_cast<size_t>(n), "b"), v, 4);
    EXPECT_GE(c.length, 1);
    EXPECT_LE(c.length, 4);
    for (int64_t t = 0; t < c.max_length(); ++t) {
      EXPECT_EQ(c.mask[static_cast<size_t>(t)], t < c.length);
      if (t >= c.length) EXPECT_EQ(c.ids[static_cast<size_t>(t)], v.pad_id());
    }
  }
}

}  // namespace
}  // namespace ffgan
