#include "nmt/corpus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "nmt/common/error.hpp"
#include "nmt/common/random.hpp"
#include "nmt/common/textio.hpp"
#include "nmt/common/unicode.hpp"
#include "nmt/corpus/tokenize.hpp"

namespace nmt::corpus {
namespace {

ParallelCorpus from_columns(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                            std::string source_lang, std::string target_lang, const std::string& origin) {
  ParallelCorpus corpus;
  corpus.source_lang = std::move(source_lang);
  corpus.target_lang = std::move(target_lang);
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto pair = SentencePair::make(src[i], tgt[i], origin);
    if (pair.source.empty() || pair.target.empty()) {
      ++corpus.blank_lines;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

CleanReport identity_report(std::size_t n) {
  CleanReport r;
  r.input_size = n;
  r.output_size = n;
  return r;
}

std::vector<SentencePair> survivors(const ParallelCorpus& corpus, const std::vector<bool>& removed) {
  std::vector<SentencePair> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!removed[i]) out.push_back(corpus.pairs[i]);
  }
  return out;
}

// Marks members of oversized groups whose length lies within `window` of
// another member's length.
void mark_conflicts(const std::map<std::string, std::vector<std::size_t>>& groups,
                    const std::vector<std::size_t>& lengths, std::size_t max_reps, std::size_t window,
                    std::vector<bool>& removed) {
  for (const auto& [key, members] : groups) {
    if (members.size() <= max_reps) continue;
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t len = lengths[order[k]];
      const bool near_prev = k > 0 && len - lengths[order[k - 1]] <= window;
      const bool near_next = k + 1 < order.size() && lengths[order[k + 1]] - len <= window;
      if (near_prev || near_next) removed[order[k]] = true;
    }
  }
}

bool side_applies(Side rule_side, Side side) { return rule_side == Side::kBoth || rule_side == side; }

bool script_mismatch(const std::string& text, const std::string& lang, double threshold) {
  const auto expected = unicode::script_for_language(lang);
  if (!expected) return false;
  std::size_t letters = 0;
  std::size_t foreign = 0;
  for (const char32_t cp : unicode::decode(text)) {
    const auto script = unicode::script_of(cp);
    if (script == unicode::Script::kOther) continue;
    ++letters;
    if (script != *expected) ++foreign;
  }
  return letters > 0 && static_cast<double>(foreign) / static_cast<double>(letters) > threshold;
}

}  // namespace

SentencePair SentencePair::make(std::string_view source, std::string_view target, std::string origin) {
  SentencePair p;
  p.source = trim(source);
  p.target = trim(target);
  p.source_len = count_tokens(p.source);
  p.target_len = count_tokens(p.target);
  p.origin = std::move(origin);
  return p;
}

CleanReport& CleanReport::then(const CleanReport& next) {
  exact_dup += next.exact_dup;
  conflict += next.conflict;
  over_length += next.over_length;
  noise += next.noise;
  output_size = next.output_size;
  return *this;
}

nlohmann::json CleanReport::to_json() const {
  return {{"input_size", input_size}, {"output_size", output_size}, {"exact_dup", exact_dup},
          {"conflict", conflict},     {"over_length", over_length}, {"noise", noise}};
}

ParallelCorpus load_parallel(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                             std::string source_lang, std::string target_lang) {
  const auto src = read_lines(source_path);
  const auto tgt = read_lines(target_path);
  if (src.size() != tgt.size()) {
    throw AlignmentError("line count mismatch: " + source_path.string() + " has " + std::to_string(src.size()) +
                         " lines, " + target_path.string() + " has " + std::to_string(tgt.size()));
  }
  return from_columns(src, tgt, std::move(source_lang), std::move(target_lang), source_path.filename().string());
}

ParallelCorpus load_tsv(const std::filesystem::path& path, std::string source_lang, std::string target_lang) {
  const auto lines = read_lines(path);
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  src.reserve(lines.size());
  tgt.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": missing TAB separator");
    }
    src.push_back(lines[i].substr(0, tab));
    tgt.push_back(lines[i].substr(tab + 1));
  }
  return from_columns(src, tgt, std::move(source_lang), std::move(target_lang), path.filename().string());
}

void write_parallel(const ParallelCorpus& corpus, const std::filesystem::path& source_path,
                    const std::filesystem::path& target_path) {
  std::ofstream src(source_path, std::ios::binary);
  std::ofstream tgt(target_path, std::ios::binary);
  if (!src) throw IoError("cannot write " + source_path.string());
  if (!tgt) throw IoError("cannot write " + target_path.string());
  for (const auto& p : corpus.pairs) {
    src << p.source << '\n';
    tgt << p.target << '\n';
  }
  if (!src || !tgt) throw IoError("write failed for " + source_path.string());
}

CleanResult dedup_exact(const ParallelCorpus& corpus) {
  std::unordered_set<std::string> seen;
  std::vector<bool> removed(corpus.size(), false);
  CleanReport report = identity_report(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus.pairs[i];
    std::string key = unicode::nfc(p.source);
    key += '\t';
    key += unicode::nfc(p.target);
    if (!seen.insert(std::move(key)).second) {
      removed[i] = true;
      ++report.exact_dup;
    }
  }
  report.output_size = corpus.size() - report.exact_dup;
  return {corpus.with_pairs(survivors(corpus, removed)), report};
}

CleanResult drop_conflicting(const ParallelCorpus& corpus, std::size_t max_reps, std::size_t length_window) {
  auto [unique, report] = dedup_exact(corpus);

  std::map<std::string, std::vector<std::size_t>> by_source;
  std::map<std::string, std::vector<std::size_t>> by_target;
  std::vector<std::size_t> source_lens(unique.size());
  std::vector<std::size_t> target_lens(unique.size());
  for (std::size_t i = 0; i < unique.size(); ++i) {
    const auto& p = unique.pairs[i];
    by_source[unicode::nfc(p.source)].push_back(i);
    by_target[unicode::nfc(p.target)].push_back(i);
    source_lens[i] = p.source_len;
    target_lens[i] = p.target_len;
  }

  std::vector<bool> removed(unique.size(), false);
  // Same source, different translations: compare target lengths.
  mark_conflicts(by_source, target_lens, max_reps, length_window, removed);
  // Same translation, different sources: compare source lengths.
  mark_conflicts(by_target, source_lens, max_reps, length_window, removed);

  CleanReport stage = identity_report(unique.size());
  stage.conflict = static_cast<std::size_t>(std::count(removed.begin(), removed.end(), true));
  stage.output_size = unique.size() - stage.conflict;
  report.then(stage);
  return {unique.with_pairs(survivors(unique, removed)), report};
}

CleanResult filter_length(const ParallelCorpus& corpus, std::size_t max_len) {
  std::vector<bool> removed(corpus.size(), false);
  CleanReport report = identity_report(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus.pairs[i];
    if (p.source_len > max_len || p.target_len > max_len) {
      removed[i] = true;
      ++report.over_length;
    }
  }
  report.output_size = corpus.size() - report.over_length;
  return {corpus.with_pairs(survivors(corpus, removed)), report};
}

CleanResult strip_noise(const ParallelCorpus& corpus, const NoiseRuleSet& rules) {
  CleanReport report = identity_report(corpus.size());
  std::vector<SentencePair> out;
  out.reserve(corpus.size());
  for (const auto& original : corpus.pairs) {
    std::string source = original.source;
    std::string target = original.target;
    bool drop = false;
    for (const auto& rule : rules.rules()) {
      for (const Side side : {Side::kSource, Side::kTarget}) {
        if (drop || !side_applies(rule.side, side)) continue;
        std::string& text = side == Side::kSource ? source : target;
        switch (rule.kind) {
          case NoiseRule::Kind::kReplace:
            text = std::regex_replace(text, rule.regex, rule.replacement);
            break;
          case NoiseRule::Kind::kDrop:
            drop = std::regex_search(text, rule.regex);
            break;
          case NoiseRule::Kind::kScript:
            drop = script_mismatch(text, side == Side::kSource ? corpus.source_lang : corpus.target_lang,
                                   rule.threshold);
            break;
        }
      }
    }
    auto cleaned = SentencePair::make(source, target, original.origin);
    if (drop || cleaned.source.empty() || cleaned.target.empty()) {
      ++report.noise;
      continue;
    }
    out.push_back(std::move(cleaned));
  }
  report.output_size = out.size();
  return {corpus.with_pairs(std::move(out)), report};
}

CleanResult clean(const ParallelCorpus& corpus, const CleanOptions& options) {
  auto noise = strip_noise(corpus, options.rules);
  CleanReport report = noise.report;
  auto conflicts = drop_conflicting(noise.corpus, options.max_reps, options.length_window);
  report.then(conflicts.report);
  auto lengths = filter_length(conflicts.corpus, options.max_len);
  report.then(lengths.report);
  return {std::move(lengths.corpus), report};
}

CorpusSplit split_corpus(const ParallelCorpus& corpus, std::size_t n_test, std::size_t n_dev, std::uint64_t seed) {
  if (n_test + n_dev >= corpus.size()) {
    throw std::invalid_argument("split sizes test=" + std::to_string(n_test) + " dev=" + std::to_string(n_dev) +
                                " leave no training pairs in a corpus of " + std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<SentencePair> part;
    part.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) part.push_back(corpus.pairs[order[k]]);
    return corpus.with_pairs(std::move(part));
  };
  CorpusSplit split;
  split.test = take(0, n_test);
  split.dev = take(n_test, n_test + n_dev);
  split.train = take(n_test + n_dev, corpus.size());
  return split;
}

}  // namespace nmt::corpus
