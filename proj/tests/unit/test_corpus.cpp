#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "nmt/common/error.hpp"
#include "nmt/common/random.hpp"
#include "nmt/common/textio.hpp"
#include "nmt/corpus/corpus.hpp"
#include "nmt/corpus/tokenize.hpp"
#include "synthetic.hpp"

using namespace nmt;
using namespace nmt::corpus;

namespace {

ParallelCorpus make_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                           std::string target_lang = "ta") {
  ParallelCorpus c;
  c.source_lang = "en";
  c.target_lang = std::move(target_lang);
  for (const auto& [s, t] : pairs) c.pairs.push_back(SentencePair::make(s, t));
  return c;
}

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

// A random corpus with plenty of repeats, conflicts and long lines.
ParallelCorpus random_corpus(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  ParallelCorpus c;
  c.source_lang = "en";
  c.target_lang = "en";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string s = "s" + std::to_string(rng.below(15)) + " " + words(rng.below(4), "x");
    const std::string t = words(1 + rng.below(rng.below(5) == 0 ? 60 : 12), "t" + std::to_string(rng.below(3)));
    std::string tail = rng.below(10) == 0 ? " !!" : "";
    c.pairs.push_back(SentencePair::make(s + tail, t));
  }
  return c;
}

bool is_subsequence(const std::vector<SentencePair>& sub, const std::vector<SentencePair>& full) {
  std::size_t j = 0;
  for (const auto& p : full) {
    if (j < sub.size() && sub[j] == p) ++j;
  }
  return j == sub.size();
}

void expect_accounting(const CleanReport& r) {
  EXPECT_EQ(r.input_size, r.output_size + r.removed());
}

}  // namespace

TEST(LoadParallel, ZipsLineAlignedFiles) {
  const auto dir = synth::scratch_dir("load3");
  write_lines(dir / "a.en", {"one", "two  ", "three"});
  write_lines(dir / "a.ta", {"ஒன்று", "இரண்டு", "மூன்று"});
  const auto c = load_parallel(dir / "a.en", dir / "a.ta");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.pairs[1].source, "two");
  EXPECT_EQ(c.pairs[2].target, "மூன்று");
  EXPECT_EQ(c.pairs[0].source_len, 1u);
}

TEST(LoadParallel, LineCountMismatchNamesBothCounts) {
  const auto dir = synth::scratch_dir("load34");
  write_lines(dir / "a.en", {"a", "b", "c"});
  write_lines(dir / "a.ta", {"a", "b", "c", "d"});
  try {
    load_parallel(dir / "a.en", dir / "a.ta");
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('3'), std::string::npos);
    EXPECT_NE(msg.find('4'), std::string::npos);
  }
  EXPECT_THROW(load_parallel(dir / "nope.en", dir / "a.ta"), IoError);
}

TEST(LoadParallel, BlankSidesAreSkippedAndCounted) {
  const auto dir = synth::scratch_dir("loadblank");
  write_lines(dir / "a.en", {"a", "   ", "c"});
  write_lines(dir / "a.ta", {"x", "y", "z"});
  const auto c = load_parallel(dir / "a.en", dir / "a.ta");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.blank_lines, 1u);
}

TEST(LoadParallel, MalayalamTrainingSizeFromTableOne) {
  const auto dir = synth::scratch_dir("load548k");
  {
    std::ofstream s(dir / "train.en"), t(dir / "train.ml");
    for (int i = 0; i < 548000; ++i) {
      s << "s" << i << '\n';
      t << "t" << i << '\n';
    }
  }
  EXPECT_EQ(load_parallel(dir / "train.en", dir / "train.ml", "en", "ml").size(), 548000u);
}

TEST(LoadTsv, SplitsOnTab) {
  const auto dir = synth::scratch_dir("tsv");
  write_lines(dir / "c.tsv", {"hello\tவணக்கம்", "bye\tபோ"});
  const auto c = load_tsv(dir / "c.tsv");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.pairs[0].target, "வணக்கம்");
}

TEST(DedupExact, KeepsFirstOccurrence) {
  const auto r = dedup_exact(make_corpus({{"s1", "t1"}, {"s1", "t1"}, {"s2", "t2"}}));
  ASSERT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.corpus.pairs[0].source, "s1");
  EXPECT_EQ(r.corpus.pairs[1].source, "s2");
  EXPECT_EQ(r.report.exact_dup, 1u);
}

TEST(DedupExact, NoDuplicatesIsIdentity) {
  const auto c = make_corpus({{"a", "b"}, {"c", "d"}});
  const auto r = dedup_exact(c);
  EXPECT_EQ(r.corpus.pairs, c.pairs);
  EXPECT_EQ(r.report.exact_dup, 0u);
}

TEST(DedupExact, TwentyCopiesLeaveOne) {
  std::vector<std::pair<std::string, std::string>> p(20, {"same source", "same target"});
  const auto r = dedup_exact(make_corpus(p));
  EXPECT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.report.exact_dup, 19u);
}

TEST(DedupExact, ComparesAfterNfc) {
  const auto r = dedup_exact(make_corpus({{"caf\xC3\xA9", "x"}, {"cafe\xCC\x81", "x"}}, "en"));
  EXPECT_EQ(r.corpus.size(), 1u);
}

TEST(DropConflicting, TwoTranslationsAreKept) {
  const auto r = drop_conflicting(make_corpus({{"s", words(3)}, {"s", words(4)}}));
  EXPECT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.report.conflict, 0u);
}

TEST(DropConflicting, ThreeCloseTranslationsAreAllRemoved) {
  const auto r = drop_conflicting(make_corpus({{"s", words(7, "a")}, {"s", words(8, "b")}, {"s", words(9, "c")},
                                               {"other", "kept"}}));
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].source, "other");
  EXPECT_EQ(r.report.conflict, 3u);
}

TEST(DropConflicting, ThreeDistantTranslationsAreKept) {
  const auto r = drop_conflicting(make_corpus({{"s", words(3)}, {"s", words(20)}, {"s", words(40)}}));
  EXPECT_EQ(r.corpus.size(), 3u);
}

TEST(DropConflicting, OnlyMembersWithinTheWindowGo) {
  // lengths 2, 6, 30: 2 and 6 are within 5 of each other, 30 is not near either
  const auto r = drop_conflicting(make_corpus({{"s", words(2)}, {"s", words(6)}, {"s", words(30)}}));
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].target_len, 30u);
}

TEST(DropConflicting, RepeatedTargetComparesSourceLengths) {
  const auto r = drop_conflicting(make_corpus({{words(4, "a"), "t"}, {words(5, "b"), "t"}, {words(6, "c"), "t"}}));
  EXPECT_EQ(r.corpus.size(), 0u);
  EXPECT_EQ(r.report.conflict, 3u);
}

TEST(DropConflicting, DeduplicatesFirst) {
  // Exact copies are not separate translations.
  const auto r = drop_conflicting(make_corpus({{"s", "t u"}, {"s", "t u"}, {"s", "t u"}}));
  EXPECT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.report.exact_dup, 2u);
  EXPECT_EQ(r.report.conflict, 0u);
}

TEST(FilterLength, BoundaryIsInclusive) {
  const auto r = filter_length(make_corpus({{words(51), "t"}, {words(50), words(50)}, {"s", words(51)}}));
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].source_len, 50u);
  EXPECT_EQ(r.report.over_length, 2u);
  EXPECT_EQ(filter_length(ParallelCorpus{}).corpus.size(), 0u);
}

TEST(StripNoise, LatinTargetForTamilIsDropped) {
  const auto r = strip_noise(make_corpus({{"hello", "this is english"}, {"hello", "வணக்கம்"}}),
                             NoiseRuleSet::defaults());
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].target, "வணக்கம்");
  EXPECT_EQ(r.report.noise, 1u);
}

TEST(StripNoise, RepeatedPunctuationCollapses) {
  const auto r = strip_noise(make_corpus({{"stop  !!", "நில் !!"}}), NoiseRuleSet::defaults());
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].source, "stop!");
  EXPECT_EQ(r.corpus.pairs[0].target, "நில்!");
}

TEST(StripNoise, EmptyRuleSetIsIdentity) {
  const auto c = make_corpus({{"stop !!", "english target"}});
  const auto r = strip_noise(c, NoiseRuleSet{});
  EXPECT_EQ(r.corpus.pairs, c.pairs);
}

TEST(StripNoise, CustomRules) {
  const auto rules = NoiseRuleSet::parse(
      "# drop anything mentioning spam\n"
      "drop both \"spam\"\n"
      "replace target \"\\(.*?\\)\" \"\"\n");
  const auto r = strip_noise(make_corpus({{"buy spam", "x"}, {"a", "b (note)"}, {"c", "(only)"}}, "en"), rules);
  ASSERT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.corpus.pairs[0].target, "b");
  EXPECT_EQ(r.report.noise, 2u);
}

TEST(StripNoise, MalformedPatternIsAConfigError) {
  EXPECT_THROW(NoiseRuleSet::parse("drop source \"([\"\n"), ConfigError);
  EXPECT_THROW(NoiseRuleSet::parse("frobnicate source x\n"), ConfigError);
}

TEST(SplitCorpus, TamilCountsFromTableOne) {
  ParallelCorpus c;
  for (int i = 0; i < 186451; ++i) c.pairs.push_back({"s" + std::to_string(i), "t", 1, 1, ""});
  const auto s = split_corpus(c, 2000, 1000, 7);
  EXPECT_EQ(s.train.size(), 183451u);
  EXPECT_EQ(s.test.size(), 2000u);
  EXPECT_EQ(s.dev.size(), 1000u);
}

TEST(SplitCorpus, DeterministicAndPartitioning) {
  const auto c = dedup_exact(random_corpus(3, 300)).corpus;
  const auto a = split_corpus(c, 20, 10, 11);
  const auto b = split_corpus(c, 20, 10, 11);
  EXPECT_EQ(a.train.pairs, b.train.pairs);
  EXPECT_EQ(a.test.pairs, b.test.pairs);
  EXPECT_EQ(a.dev.pairs, b.dev.pairs);
  EXPECT_EQ(a.train.size() + a.test.size() + a.dev.size(), c.size());
  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.test, &a.dev}) {
    for (const auto& p : part->pairs) all.insert(p.source + '\t' + p.target);
  }
  std::multiset<std::string> expected;
  for (const auto& p : c.pairs) expected.insert(p.source + '\t' + p.target);
  EXPECT_EQ(all, expected);
  EXPECT_NE(split_corpus(c, 20, 10, 12).test.pairs, a.test.pairs);
}

TEST(SplitCorpus, OversizedRequestIsAnArgumentError) {
  const auto c = make_corpus({{"a", "b"}, {"c", "d"}});
  EXPECT_THROW(split_corpus(c, 2, 0, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(c, 1, 1, 1), std::invalid_argument);
}

TEST(Tokenize, SourceModeIsolatesPunctuation) {
  EXPECT_EQ(tokenize_basic("Hello, world!", TokenizeMode::kSource),
            (std::vector<std::string>{"Hello", ",", "world", "!"}));
  EXPECT_TRUE(tokenize_basic("", TokenizeMode::kSource).empty());
  EXPECT_EQ(tokenize_basic("வணக்கம், உலகம்!", TokenizeMode::kTarget),
            (std::vector<std::string>{"வணக்கம்,", "உலகம்!"}));
}

TEST(Tokenize, JoinAndRetokenizeIsAFixedPoint) {
  Rng rng(5);
  const std::string alphabet[] = {"a", "b", " ", ",", ".", "!", "க", "  ", "?", "x"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (std::size_t k = rng.below(20); k > 0; --k) text += alphabet[rng.below(10)];
    for (const auto mode : {TokenizeMode::kSource, TokenizeMode::kTarget}) {
      const auto once = tokenize_basic(text, mode);
      EXPECT_EQ(tokenize_basic(join(once), mode), once) << text;
    }
  }
}

TEST(CleanPipeline, ReportAccountsForEveryRemoval) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = clean(random_corpus(seed, 200), CleanOptions{});
    expect_accounting(r.report);
    EXPECT_EQ(r.report.input_size, 200u);
    EXPECT_EQ(r.report.output_size, r.corpus.size());
  }
}

TEST(CleanPipeline, Idempotent) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto once = clean(random_corpus(seed, 200), CleanOptions{});
    const auto twice = clean(once.corpus, CleanOptions{});
    EXPECT_EQ(twice.corpus.pairs, once.corpus.pairs) << "seed " << seed;
    EXPECT_EQ(twice.report.removed(), 0u);
  }
}

TEST(CleanPipeline, EachRulePreservesOrder) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = random_corpus(seed, 200);
    EXPECT_TRUE(is_subsequence(dedup_exact(c).corpus.pairs, c.pairs));
    EXPECT_TRUE(is_subsequence(drop_conflicting(c).corpus.pairs, c.pairs));
    EXPECT_TRUE(is_subsequence(filter_length(c).corpus.pairs, c.pairs));
    EXPECT_TRUE(is_subsequence(strip_noise(c, NoiseRuleSet{}).corpus.pairs, c.pairs));
    for (const auto& r : {dedup_exact(c), drop_conflicting(c), filter_length(c)}) expect_accounting(r.report);
  }
}

TEST(CleanPipeline, SplitsAfterCleaningAreDisjoint) {
  const auto cleaned = clean(random_corpus(8, 400), CleanOptions{}).corpus;
  const auto s = split_corpus(cleaned, 8, 8, 2);
  std::set<std::string> seen;
  for (const auto* part : {&s.train, &s.test, &s.dev}) {
    std::set<std::string> mine;
    for (const auto& p : part->pairs) mine.insert(p.source + '\t' + p.target);
    for (const auto& k : mine) EXPECT_TRUE(seen.insert(k).second) << k;
  }
}

TEST(SentencePair, CountsWhitespaceTokensAfterTrimming) {
  const auto p = SentencePair::make("  a  b c ", "x");
  EXPECT_EQ(p.source, "a  b c");
  EXPECT_EQ(p.source_len, 3u);
  EXPECT_EQ(p.target_len, 1u);
}
