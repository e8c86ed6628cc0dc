#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmt/corpus/noise.hpp"

namespace nmt::corpus {

struct SentencePair {
  std::string source;
  std::string target;
  std::size_t source_len = 0;
  std::size_t target_len = 0;
  std::string origin;

  // Trims both sides and fills the token counts.
  static SentencePair make(std::string_view source, std::string_view target, std::string origin = {});

  bool operator==(const SentencePair& other) const {
    return source == other.source && target == other.target;
  }
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::string source_lang = "en";
  std::string target_lang = "ta";
  // Lines skipped at load time because one side was blank.
  std::size_t blank_lines = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  ParallelCorpus with_pairs(std::vector<SentencePair> p) const {
    ParallelCorpus out{std::move(p), source_lang, target_lang, 0};
    return out;
  }
};

struct CleanReport {
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  std::size_t exact_dup = 0;
  std::size_t conflict = 0;
  std::size_t over_length = 0;
  std::size_t noise = 0;

  std::size_t removed() const { return exact_dup + conflict + over_length + noise; }

  // Chains a later stage onto this one: input stays, output advances.
  CleanReport& then(const CleanReport& next);

  nlohmann::json to_json() const;
};

struct CleanResult {
  ParallelCorpus corpus;
  CleanReport report;
};

/// Line-aligned two-file corpus. Trailing whitespace and newlines are
/// stripped; pairs with a blank side are skipped and counted in blank_lines.
ParallelCorpus load_parallel(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                             std::string source_lang = "en", std::string target_lang = "ta");

// source<TAB>target per line.
ParallelCorpus load_tsv(const std::filesystem::path& path, std::string source_lang = "en",
                        std::string target_lang = "ta");

void write_parallel(const ParallelCorpus& corpus, const std::filesystem::path& source_path,
                    const std::filesystem::path& target_path);

// Keeps the first occurrence of each NFC-normalized (source, target) pair.
CleanResult dedup_exact(const ParallelCorpus& corpus);

/// Removes ambiguous one-to-many and many-to-one translations.
///
/// Pairs sharing a source form a group (likewise pairs sharing a target).
/// In a group larger than max_reps, every member whose varying side length
/// is within length_window tokens of another member's is removed. Exact
/// duplicates are removed first.
CleanResult drop_conflicting(const ParallelCorpus& corpus, std::size_t max_reps = 2, std::size_t length_window = 5);

// Removes pairs where either side has more than max_len whitespace tokens.
CleanResult filter_length(const ParallelCorpus& corpus, std::size_t max_len = 50);

CleanResult strip_noise(const ParallelCorpus& corpus, const NoiseRuleSet& rules);

struct CleanOptions {
  std::size_t max_len = 50;
  std::size_t max_reps = 2;
  std::size_t length_window = 5;
  NoiseRuleSet rules = NoiseRuleSet::defaults();
};

// noise -> exact duplicates -> conflicts -> length.
CleanResult clean(const ParallelCorpus& corpus, const CleanOptions& options);

struct CorpusSplit {
  ParallelCorpus train;
  ParallelCorpus test;
  ParallelCorpus dev;
};

// Seeded shuffle, then the first n_test pairs are test, the next n_dev dev,
// the rest train.
CorpusSplit split_corpus(const ParallelCorpus& corpus, std::size_t n_test, std::size_t n_dev, std::uint64_t seed);

}  // namespace nmt::corpus
