#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "wsd/embeddings.hpp"

using namespace wsd;

TEST(Vocabulary, PadIsIdZeroAndIdsFollowInsertion) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 1u);
  EXPECT_EQ(v.token(kPadId), kPadToken);
  EXPECT_EQ(v.add("river"), 1u);
  EXPECT_EQ(v.add("money"), 2u);
  EXPECT_EQ(v.add("river"), 1u);
  EXPECT_EQ(v.add(kPadToken), kPadId);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id("money"), 2u);
  EXPECT_EQ(v.id("unseen"), kPadId);
  EXPECT_TRUE(v.contains("river"));
  EXPECT_FALSE(v.contains("unseen"));
  EXPECT_THROW(v.token(3), IndexError);
}

TEST(SenseInventory, GlobalIdsAndCandidateOrder) {
  SenseInventory inv;
  EXPECT_EQ(inv.add_sense("bank.n", "bank%1"), 0u);
  EXPECT_EQ(inv.add_sense("cold.a", "cold%1"), 1u);
  EXPECT_EQ(inv.add_sense("bank.n", "bank%2"), 2u);
  EXPECT_EQ(inv.add_sense("bank.n", "bank%1"), 0u);
  EXPECT_EQ(inv.lexelt_count(), 2u);
  EXPECT_EQ(inv.sense_count(), 3u);
  const auto c = inv.candidates("bank.n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], 0u);
  EXPECT_EQ(c[1], 2u);
  EXPECT_EQ(inv.lexelt_of(2), 0u);
  EXPECT_EQ(inv.sense_name(1), "cold%1");
  EXPECT_EQ(*inv.find_sense(*inv.find_lexelt("bank.n"), "bank%2"), 2u);
  EXPECT_FALSE(inv.find_lexelt("serve.v"));
  EXPECT_THROW(inv.candidates("serve.v"), KeyError);
  EXPECT_THROW(inv.sense_name(3), IndexError);
}

TEST(EmbeddingTable, ColumnsLookupsAndLogicalMatrix) {
  EmbeddingTable t(TableKind::word, 3, 4);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < 3; ++k) t.column(c)[k] = double(10 * c + k);
  EXPECT_EQ(lookup_word(t, 2), (Vector{20, 21, 22}));
  const Matrix m = t.as_matrix();
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 4u);
  EXPECT_EQ(m(1, 3), 31.0);
  EXPECT_THROW(t.column(4), IndexError);
  EXPECT_THROW(lookup_word(t, 9), IndexError);
  EXPECT_FALSE(t.trainable(0));
  EXPECT_TRUE(t.trainable(1));
  EmbeddingTable s(TableKind::sense, 3, 2);
  EXPECT_TRUE(s.trainable(0));
  EXPECT_THROW(lookup_sense(s, 2), IndexError);
}

TEST(EmbeddingInit, SenseTableUniformInRange) {
  SenseInventory inv;
  for (int i = 0; i < 50; ++i) inv.add_sense("x.n", "s" + std::to_string(i));
  Rng a(1), b(1);
  const EmbeddingTable t = init_sense_table(inv, 100, a);
  EXPECT_EQ(t.width(), 50u);
  double lo = 1, hi = -1;
  for (double x : t.raw()) {
    EXPECT_GT(x, -kInitRange);
    EXPECT_LT(x, kInitRange);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  EXPECT_LT(lo, -0.09);
  EXPECT_GT(hi, 0.09);
  EXPECT_EQ(init_sense_table(inv, 100, b), t);
  Rng c(1);
  EXPECT_THROW(init_sense_table(SenseInventory{}, 10, c), ConfigError);
  EXPECT_THROW(init_sense_table(inv, 0, c), ConfigError);
}

TEST(EmbeddingInit, RandomWordTableKeepsPadZero) {
  Vocabulary v;
  v.add("a");
  v.add("b");
  Rng rng(2);
  const EmbeddingTable t = init_random_word_table(v, 5, rng);
  for (double x : t.column(0)) EXPECT_EQ(x, 0.0);
  for (std::size_t c = 1; c < 3; ++c)
    for (double x : t.column(c)) {
      EXPECT_NE(x, 0.0);
      EXPECT_LT(std::abs(x), kInitRange);
    }
}

namespace {

Vocabulary vocab_of(std::initializer_list<const char*> toks) {
  Vocabulary v;
  for (const char* t : toks) v.add(t);
  return v;
}

}  // namespace

TEST(Glove, ReadsKnownTokensAndFallsBackForMissing) {
  const Vocabulary v = vocab_of({"cat", "dog", "emu"});
  std::istringstream in("cat 0.5 -1 2e-3\nzebra 1 2 3\ndog -0.25 0 1.5\r\n\ncat 9 9 9\n");
  Rng rng(3);
  GloveStats st;
  const EmbeddingTable t = read_glove(in, v, 3, rng, &st);
  EXPECT_EQ(lookup_word(t, 1), (Vector{0.5, -1.0, 0.002}));  // first occurrence wins
  EXPECT_EQ(lookup_word(t, 2), (Vector{-0.25, 0.0, 1.5}));
  for (double x : t.column(3)) EXPECT_LT(std::abs(x), kInitRange);
  for (double x : t.column(0)) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(st.found, 2u);
  EXPECT_EQ(st.missing, 1u);
  EXPECT_EQ(st.lines, 5u);
}

TEST(Glove, DimensionMismatchIsFormatError) {
  const Vocabulary v = vocab_of({"cat"});
  std::istringstream in("cat 1 2\n");
  Rng rng(4);
  EXPECT_THROW(read_glove(in, v, 3, rng), FormatError);
}

TEST(Glove, MalformedValueReportsLine) {
  const Vocabulary v = vocab_of({"cat"});
  std::istringstream in("cat 1 2 3\nother 1 x 3\n");
  Rng rng(5);
  try {
    read_glove(in, v, 3, rng);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream lonely("cat\n");
  EXPECT_THROW(read_glove(lonely, v, 3, rng), ParseError);
}

TEST(Glove, WriteReadRoundTripIsExact) {
  const std::string text = testutil::slurp(testutil::data_path("fixture/vectors.txt"));
  Vocabulary v;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) v.add(line.substr(0, line.find(' ')));
  }
  Rng r1(6), r2(7);
  std::istringstream in1(text);
  GloveStats st;
  const EmbeddingTable t1 = read_glove(in1, v, 10, r1, &st);
  EXPECT_EQ(st.missing, 0u);
  std::ostringstream out1;
  write_glove(out1, t1, v);
  std::istringstream in2(out1.str());
  const EmbeddingTable t2 = read_glove(in2, v, 10, r2);
  EXPECT_EQ(t1, t2);
  std::ostringstream out2;
  write_glove(out2, t2, v);
  EXPECT_EQ(out1.str(), out2.str());
}

TEST(Glove, ShortestRoundTripOfArbitraryDoubles) {
  Vocabulary v = vocab_of({"a", "b"});
  Rng rng(8);
  EmbeddingTable t = init_random_word_table(v, 16, rng);
  t.column(1)[0] = 1e-300;
  t.column(1)[1] = -123456.789;
  std::ostringstream out;
  write_glove(out, t, v);
  std::istringstream in(out.str());
  Rng unused(9);
  EXPECT_EQ(read_glove(in, v, 16, unused), t);
}

TEST(Glove, MissingFileIsIoError) {
  Rng rng(10);
  EXPECT_THROW(load_glove("/nonexistent/vectors.txt", Vocabulary{}, 3, rng), IoError);
}
