#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nmt/bpe/bpe.hpp"

namespace nmt::bpe {

/// Token <-> id map. Ids 0..3 are PAD, UNK, BOS, EOS.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecials = 4;
  static constexpr std::array<std::string_view, 4> kSpecialTokens = {"<pad>", "<unk>", "<s>", "</s>"};

  Vocab() : Vocab(std::vector<std::string>{}) {}
  // Non-special tokens in id order; duplicates and specials are rejected.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  // UNK for unknown tokens.
  int id_of(std::string_view token) const;
  // Throws std::out_of_range for ids outside the vocabulary.
  const std::string& token_of(int id) const;

  std::vector<int> encode(const std::vector<std::string>& tokens, bool framing = false) const;
  // Drops PAD/BOS/EOS; UNK renders as "<unk>".
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  // One non-special token per line; line k holds id k + 4.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  std::string to_text() const;
  static Vocab from_text(const std::string& text, const std::string& origin = "<text>");

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  static Vocab read(std::istream& in, const std::string& origin);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Most frequent subwords first (ties lexicographic), truncated to
// max_size - 4, specials prepended. max_size must exceed 4.
Vocab build_vocab(const std::vector<std::vector<std::string>>& encoded_corpus, std::size_t max_size);

// Word split -> BPE -> ids, with optional BOS/EOS framing.
std::vector<int> encode_sentence(const BpeModel& model, const Vocab& vocab, const std::vector<std::string>& words,
                                 bool framing = false);

// Inverse of encode_sentence for in-vocabulary text.
std::string decode(const Vocab& vocab, const BpeModel& model, const std::vector<int>& ids);

}  // namespace nmt::bpe
