#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "nmt/common/random.hpp"
#include "nmt/corpus/tokenize.hpp"
#include "nmt/eval/bleu.hpp"

using namespace nmt;
using namespace nmt::eval;

namespace {

Tokens toks(const std::string& s) { return corpus::split_whitespace(s); }

Tokens random_sentence(Rng& rng, std::size_t max_len, std::size_t min_len = 1) {
  static const char* words[] = {"a", "b", "c", "d", "e", "f"};
  Tokens t;
  for (auto n = min_len + rng.below(max_len - min_len + 1); n > 0; --n) t.push_back(words[rng.below(6)]);
  return t;
}

// Independent count of clipped n-gram matches for one pair.
std::pair<std::size_t, std::size_t> clipped(const Tokens& hyp, const Tokens& ref, std::size_t n) {
  std::map<Tokens, std::size_t> h, r;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++h[Tokens(hyp.begin() + i, hyp.begin() + i + n)];
  for (std::size_t i = 0; i + n <= ref.size(); ++i) ++r[Tokens(ref.begin() + i, ref.begin() + i + n)];
  std::size_t match = 0, total = 0;
  for (const auto& [g, c] : h) {
    total += c;
    match += std::min(c, r.contains(g) ? r[g] : 0);
  }
  return {match, total};
}

}  // namespace

TEST(ModifiedPrecision, ClippedUnigramExample) {
  const auto m = modified_precision({toks("the the the the the the the")}, {toks("the cat is on the mat")}, 1);
  EXPECT_EQ(m.clipped, 2u);
  EXPECT_EQ(m.total, 7u);
  const auto r = corpus_bleu({toks("the the the the the the the")}, {toks("the cat is on the mat")});
  EXPECT_NEAR(r.precisions[0], 2.0 / 7.0, 1e-9);
}

TEST(ModifiedPrecision, PerfectAndDisjoint) {
  const Tokens s = toks("a b c d e f");
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto m = modified_precision({s}, {s}, n);
    EXPECT_EQ(m.clipped, m.total);
    EXPECT_EQ(m.total, 7 - n);
    EXPECT_EQ(modified_precision({s}, {toks("u v w x y z")}, n).clipped, 0u);
  }
}

TEST(ModifiedPrecision, MultipleReferencesClipByTheMostGenerous) {
  const auto m = modified_precision({toks("the the the")}, std::vector<std::vector<Tokens>>{{toks("the a"), toks("the the b")}}, 1);
  EXPECT_EQ(m.clipped, 2u);
  EXPECT_EQ(m.total, 3u);
}

TEST(ModifiedPrecision, MatchesIndependentCounterOnRandomPairs) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> hyps, refs;
    std::size_t want[5][2] = {};
    for (auto k = 1 + rng.below(5); k > 0; --k) {
      hyps.push_back(random_sentence(rng, 12));
      refs.push_back(random_sentence(rng, 12));
      for (std::size_t n = 1; n <= 4; ++n) {
        const auto [m, t] = clipped(hyps.back(), refs.back(), n);
        want[n][0] += m;
        want[n][1] += t;
      }
    }
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto got = modified_precision(hyps, refs, n);
      EXPECT_EQ(got.clipped, want[n][0]);
      EXPECT_EQ(got.total, want[n][1]);
    }
  }
}

TEST(ModifiedPrecision, ArgumentErrors) {
  EXPECT_THROW(modified_precision({toks("a")}, {toks("a"), toks("b")}, 1), std::invalid_argument);
  EXPECT_THROW(modified_precision({toks("a")}, {toks("a")}, 0), std::invalid_argument);
}

TEST(BrevityPenalty, ClosedForm) {
  EXPECT_EQ(brevity_penalty(7, 7), 1.0);
  EXPECT_EQ(brevity_penalty(9, 7), 1.0);
  EXPECT_NEAR(brevity_penalty(6, 12), std::exp(-1.0), 1e-9);
  EXPECT_NEAR(brevity_penalty(6, 12), 0.3679, 5e-5);
  EXPECT_EQ(brevity_penalty(0, 5), 0.0);
}

TEST(CorpusBleu, IdenticalCorporaScoreOneHundred) {
  const std::vector<Tokens> c = {toks("the cat sat on the mat"), toks("a b c d e"), toks("x y z w")};
  const auto r = corpus_bleu(c, c);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_EQ(r.percent(), 100.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

TEST(CorpusBleu, PerfectOnlyWhenEveryPairMatches) {
  // at least one 4-gram per sentence, otherwise p4 is 0/0
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> hyps, refs;
    for (auto k = 1 + rng.below(4); k > 0; --k) {
      refs.push_back(random_sentence(rng, 10, 4));
      hyps.push_back(rng.below(3) == 0 ? random_sentence(rng, 10, 4) : refs.back());
    }
    const bool equal = hyps == refs;
    EXPECT_EQ(corpus_bleu(hyps, refs).score == 1.0, equal);
  }
}

TEST(CorpusBleu, HandComputedTwoPairExample) {
  // pair 1: "the cat sat on the mat" vs "the cat is on the mat"
  //   p1 5/6, p2 3/5, p3 1/4, p4 0/3
  // pair 2: identical five tokens, adding 5/5, 4/4, 3/3, 2/2
  const std::vector<Tokens> hyps = {toks("the cat sat on the mat"), toks("a b c d e")};
  const std::vector<Tokens> refs = {toks("the cat is on the mat"), toks("a b c d e")};
  const auto r = corpus_bleu(hyps, refs);
  const double p[4] = {10.0 / 11, 7.0 / 9, 4.0 / 7, 2.0 / 5};
  for (int n = 0; n < 4; ++n) EXPECT_NEAR(r.precisions[n], p[n], 1e-12);
  EXPECT_EQ(r.hyp_len, 11u);
  EXPECT_EQ(r.ref_len, 11u);
  const double expected = std::exp((std::log(p[0]) + std::log(p[1]) + std::log(p[2]) + std::log(p[3])) / 4);
  EXPECT_NEAR(r.score, expected, 1e-12);
}

TEST(CorpusBleu, ZeroOrderWithAndWithoutSmoothing) {
  const std::vector<Tokens> hyps = {toks("the cat sat on the mat")};
  const std::vector<Tokens> refs = {toks("the cat is on the mat")};
  EXPECT_EQ(corpus_bleu(hyps, refs).score, 0.0);
  const auto s = corpus_bleu(hyps, refs, 4, Smoothing::kAddOne);
  EXPECT_NEAR(s.precisions[3], 1.0 / 4, 1e-12);
  const double expected = std::exp((std::log(5.0 / 6) + std::log(3.0 / 5) + std::log(1.0 / 4) + std::log(1.0 / 4)) / 4);
  EXPECT_NEAR(s.score, expected, 1e-12);
}

TEST(CorpusBleu, ShortHypothesisScoresZeroUnsmoothed) {
  EXPECT_EQ(corpus_bleu({toks("a b c")}, {toks("a b c")}).score, 0.0);
  EXPECT_GT(corpus_bleu({toks("a b c")}, {toks("a b c")}, 4, Smoothing::kAddOne).score, 0.0);
}

TEST(CorpusBleu, BrevityPenaltyApplies) {
  const auto r = corpus_bleu({toks("a b c d e f")}, {toks("a b c d e f g h i j k l")});
  EXPECT_NEAR(r.brevity_penalty, std::exp(-1.0), 1e-9);
  EXPECT_NEAR(r.score, std::exp(-1.0), 1e-9);
}

TEST(CorpusBleu, ClosestReferenceLengthPrefersShorterOnTies) {
  const std::vector<std::vector<Tokens>> refs = {{toks("a b c d"), toks("a b c d e f")}};
  EXPECT_EQ(corpus_bleu({toks("a b c d e")}, refs).ref_len, 4u);
  const std::vector<std::vector<Tokens>> refs2 = {{toks("a b c d e f g h"), toks("a b c d e f")}};
  EXPECT_EQ(corpus_bleu({toks("a b c d e")}, refs2).ref_len, 6u);
}

TEST(CorpusBleu, PermutationInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tokens> hyps, refs;
    for (int k = 0; k < 8; ++k) {
      refs.push_back(random_sentence(rng, 12));
      hyps.push_back(random_sentence(rng, 12));
    }
    const auto base = corpus_bleu(hyps, refs, 4, Smoothing::kAddOne);
    std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Tokens> h2, r2;
    for (const auto i : order) {
      h2.push_back(hyps[i]);
      r2.push_back(refs[i]);
    }
    EXPECT_EQ(corpus_bleu(h2, r2, 4, Smoothing::kAddOne).score, base.score);
  }
}

TEST(CorpusBleu, ReportIsInternallyConsistent) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> hyps, refs;
    for (auto k = 1 + rng.below(6); k > 0; --k) {
      refs.push_back(random_sentence(rng, 15));
      hyps.push_back(random_sentence(rng, 15));
    }
    for (const auto sm : {Smoothing::kNone, Smoothing::kAddOne}) {
      const auto r = corpus_bleu(hyps, refs, 4, sm);
      EXPECT_NEAR(score_from(r.precisions, r.brevity_penalty), r.score, 1e-12);
      EXPECT_GE(r.score, 0.0);
      EXPECT_LE(r.score, 1.0);
      ASSERT_EQ(r.matches.size(), 4u);
      if (sm == Smoothing::kNone) {
        for (int n = 0; n < 4; ++n) {
          const double p = r.matches[n].total ? double(r.matches[n].clipped) / r.matches[n].total : 0.0;
          EXPECT_NEAR(r.precisions[n], p, 1e-12);
        }
      }
      const auto j = r.to_json();
      EXPECT_NEAR(j.at("bleu").get<double>(), r.percent(), 1e-12);
      EXPECT_EQ(j.at("precisions").size(), 4u);
    }
  }
}

TEST(CorpusBleu, ArgumentErrors) {
  EXPECT_THROW(corpus_bleu(std::vector<Tokens>{}, std::vector<Tokens>{}), std::invalid_argument);
  EXPECT_THROW(corpus_bleu({toks("a")}, std::vector<Tokens>{}), std::invalid_argument);
  EXPECT_THROW(parse_smoothing("laplace"), std::invalid_argument);
  EXPECT_EQ(parse_smoothing(to_string(Smoothing::kAddOne)), Smoothing::kAddOne);
}

TEST(TokenizeLines, WhitespaceAndOptionalLowercase) {
  const auto t = tokenize_lines({"The  Cat\tSAT", "தமிழ் Text"}, true);
  EXPECT_EQ(t[0], (Tokens{"the", "cat", "sat"}));
  EXPECT_EQ(t[1], (Tokens{"தமிழ்", "text"}));
  EXPECT_EQ(tokenize_lines({"The Cat"}, false)[0], (Tokens{"The", "Cat"}));
}
