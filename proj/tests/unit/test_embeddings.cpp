#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "nmt/common/error.hpp"
#include "nmt/common/random.hpp"
#include "nmt/common/textio.hpp"
#include "nmt/embeddings/embeddings.hpp"
#include "synthetic.hpp"

using namespace nmt;
using namespace nmt::embeddings;

TEST(LoadTable, ThreeRowsOfFourDims) {
  const auto dir = synth::scratch_dir("emb3");
  write_lines(dir / "e.txt", {"a 1 2 3 4", "b 0.5 -0.5 0 1e-3", "தமிழ் 9 9 9 9"});
  const auto t = load_embedding_table(dir / "e.txt");
  EXPECT_EQ(t.dim(), 4u);
  EXPECT_EQ(t.size(), 3u);
  EXPECT_EQ(*t.find("b"), (std::vector<double>{0.5, -0.5, 0, 1e-3}));
  EXPECT_EQ(t.find("c"), nullptr);
}

TEST(LoadTable, HeaderDeclaresDimension) {
  const auto dir = synth::scratch_dir("emb300");
  std::ofstream out(dir / "e.vec");
  out << "2 300\n";
  for (const char* tok : {"x", "y"}) {
    out << tok;
    for (int k = 0; k < 300; ++k) out << ' ' << k * 0.01;
    out << '\n';
  }
  out.close();
  const auto t = load_embedding_table(dir / "e.vec", 300);
  EXPECT_EQ(t.dim(), 300u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_THROW(load_embedding_table(dir / "e.vec", 100), FormatError);
}

TEST(LoadTable, ShortRowNamesItsLine) {
  const auto dir = synth::scratch_dir("emb299");
  std::ofstream out(dir / "e.vec");
  out << "2 300\nx";
  for (int k = 0; k < 300; ++k) out << " 1";
  out << "\ny";
  for (int k = 0; k < 299; ++k) out << " 1";
  out << '\n';
  out.close();
  try {
    load_embedding_table(dir / "e.vec");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("299"), std::string::npos) << msg;
  }
}

TEST(LoadTable, EmptyOrMissingFile) {
  const auto dir = synth::scratch_dir("embempty");
  write_file(dir / "e.vec", "");
  EXPECT_THROW(load_embedding_table(dir / "e.vec"), FormatError);
  write_file(dir / "h.vec", "0 4\n");
  EXPECT_THROW(load_embedding_table(dir / "h.vec"), FormatError);
  EXPECT_THROW(load_embedding_table(dir / "nope.vec"), IoError);
  write_file(dir / "bad.vec", "a 1 two\n");
  EXPECT_THROW(load_embedding_table(dir / "bad.vec"), FormatError);
}

TEST(LoadTable, WriteReloadKeepsFullPrecision) {
  Rng rng(4);
  EmbeddingTable t(7);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(7);
    for (auto& x : v) x = rng.uniform(-1e3, 1e3) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10);
    t.insert("tok" + std::to_string(i), v);
  }
  const auto dir = synth::scratch_dir("embrt");
  write_embedding_table(t, dir / "t.vec");
  const auto back = load_embedding_table(dir / "t.vec");
  ASSERT_EQ(back.tokens(), t.tokens());
  for (const auto& tok : t.tokens()) EXPECT_EQ(*back.find(tok), *t.find(tok));
}

TEST(Table, RejectsWrongArity) {
  EmbeddingTable t(3);
  EXPECT_THROW(t.insert("a", {1, 2}), std::invalid_argument);
  EXPECT_TRUE(t.insert("a", {1, 2, 3}));
  EXPECT_FALSE(t.insert("a", {4, 5, 6}));
  EXPECT_EQ(*t.find("a"), (std::vector<double>{1, 2, 3}));
}

TEST(BuildLookup, FullCoverageCopiesRows) {
  const bpe::Vocab vocab({"a", "b", "c"});
  EmbeddingTable t(2);
  t.insert("a", {1, 2});
  t.insert("b", {3, 4});
  t.insert("c", {5, 6});
  const auto lk = build_lookup(vocab, &t, 2, 1);
  EXPECT_EQ(lk.matrix.rows(), 7);
  for (int id = 4; id < 7; ++id) {
    const auto& v = *t.find(vocab.token_of(id));
    EXPECT_EQ(lk.matrix(id, 0), v[0]);
    EXPECT_EQ(lk.matrix(id, 1), v[1]);
  }
  EXPECT_EQ(lk.coverage.hits, 3u);
  EXPECT_EQ(lk.coverage.misses, 0u);
}

TEST(BuildLookup, NoTableGivesSeededRowsAndZeroPad) {
  const bpe::Vocab vocab({"a", "b", "c", "d"});
  const auto lk = build_lookup(vocab, nullptr, 16, 9);
  EXPECT_TRUE(lk.matrix.row(bpe::Vocab::kPad).isZero(0.0));
  for (Eigen::Index i = 1; i < lk.matrix.rows(); ++i) {
    EXPECT_FALSE(lk.matrix.row(i).isZero(0.0));
    EXPECT_LE(lk.matrix.row(i).cwiseAbs().maxCoeff(), kInitRange);
  }
  EXPECT_EQ(build_lookup(vocab, nullptr, 16, 9).matrix, lk.matrix);
  EXPECT_NE(build_lookup(vocab, nullptr, 16, 10).matrix, lk.matrix);
  EXPECT_EQ(lk.coverage.misses, 4u);
}

TEST(BuildLookup, CoverageMatchesSetIntersection) {
  Rng rng(11);
  std::vector<std::string> vocab_tokens;
  for (int i = 0; i < 200; ++i) vocab_tokens.push_back("v" + std::to_string(i));
  EmbeddingTable t(3);
  std::set<std::string> table_tokens;
  for (int i = 0; i < 300; ++i) {
    const std::string tok = "v" + std::to_string(rng.below(400));
    if (t.insert(tok, {1, 1, 1})) table_tokens.insert(tok);
  }
  std::size_t expected = 0;
  for (const auto& v : vocab_tokens) expected += table_tokens.contains(v);
  const auto lk = build_lookup(bpe::Vocab(vocab_tokens), &t, 3, 0);
  EXPECT_EQ(lk.coverage.hits, expected);
  EXPECT_EQ(lk.coverage.misses, 200 - expected);
}

TEST(BuildLookup, DimMismatchIsAnArgumentError) {
  EmbeddingTable t(3);
  t.insert("a", {1, 2, 3});
  EXPECT_THROW(build_lookup(bpe::Vocab({"a"}), &t, 4, 0), std::invalid_argument);
}
