#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nmt::bpe {

inline constexpr std::string_view kDefaultEndMarker = "</w>";

// Word -> frequency. Ordered so that learning is independent of hash seeds.
using WordCounts = std::map<std::string, std::uint64_t>;

struct Merge {
  std::string left;
  std::string right;

  auto operator<=>(const Merge&) const = default;
  std::string joined() const { return left + right; }
};

/// Ordered merge table. The end marker is glued to the last character of
/// every word, so a one-character word is a single symbol.
class BpeModel {
 public:
  BpeModel() : BpeModel({}, std::string(kDefaultEndMarker), {}) {}
  BpeModel(std::vector<Merge> merges, std::string end_marker, std::vector<std::string> languages,
           std::size_t target_vocab_size = 0);

  const std::vector<Merge>& merges() const { return merges_; }
  const std::string& end_marker() const { return end_marker_; }
  const std::vector<std::string>& languages() const { return languages_; }
  std::size_t target_vocab_size() const { return target_vocab_size_; }

  // Character split with end marker, then merges by ascending rank.
  std::vector<std::string> encode_word(std::string_view word) const;

  std::vector<std::string> encode_tokens(const std::vector<std::string>& words) const;

  // Concatenates subwords; a subword carrying the end marker closes a word.
  std::string join_subwords(const std::vector<std::string>& subwords) const;

  // Header line "#bpe end_marker=... languages=a,b merges=N vocab=V", then
  // one "left right" merge per line. A subword-nmt "#version" header is
  // accepted and implies the default end marker.
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);
  std::string to_text() const;
  // `origin` names the source in error messages.
  static BpeModel from_text(const std::string& text, const std::string& origin = "<text>");

 private:
  static BpeModel read(std::istream& in, const std::string& origin);

  std::vector<Merge> merges_;
  std::string end_marker_;
  std::vector<std::string> languages_;
  std::size_t target_vocab_size_ = 0;
  std::unordered_map<std::string, std::size_t> rank_;
};

// Whitespace-split word frequencies over a set of sentences.
WordCounts count_words(const std::vector<std::string>& sentences);

// The initial symbol sequence of a word: code points, end marker on the last.
std::vector<std::string> split_word(std::string_view word, std::string_view end_marker);

/// Greedy merge learning. Each step merges the most frequent adjacent pair
/// (ties: smallest (left, right)) everywhere; stops after num_merges or when
/// the best pair occurs fewer than twice.
BpeModel learn_bpe(const WordCounts& words, std::size_t num_merges,
                   std::string end_marker = std::string(kDefaultEndMarker), std::vector<std::string> languages = {});

// Sums frequencies across languages, then learns one shared table.
BpeModel learn_multibpe(const std::map<std::string, WordCounts>& corpora, std::size_t num_merges,
                        std::string end_marker = std::string(kDefaultEndMarker));

// Characters seen in training plus every merged symbol.
std::size_t symbol_inventory_size(const WordCounts& words, const BpeModel& model);

}  // namespace nmt::bpe
