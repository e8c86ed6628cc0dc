#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nmt/bpe/bpe.hpp"
#include "nmt/bpe/vocab.hpp"
#include "nmt/model/decode.hpp"
#include "nmt/model/seq2seq.hpp"

namespace nmt::pipeline {

// Checkpoint text blocks that make a checkpoint self-contained.
inline constexpr const char* kBpeBlock = "bpe_model";
inline constexpr const char* kSourceVocabBlock = "source_vocab";
inline constexpr const char* kTargetVocabBlock = "target_vocab";

std::map<std::string, std::string> translator_blocks(const bpe::BpeModel& bpe, const bpe::Vocab& source_vocab,
                                                     const bpe::Vocab& target_vocab);

// Source text -> words (punctuation isolated) -> subwords.
std::vector<std::string> segment_source(const bpe::BpeModel& bpe, const std::string& line);
// Target text -> words (whitespace) -> subwords.
std::vector<std::string> segment_target(const bpe::BpeModel& bpe, const std::string& line);

struct Translation {
  std::string text;
  std::vector<std::string> source_subwords;
  std::vector<std::string> target_subwords;  // one per generated id, EOS included
  model::Hypothesis hypothesis;
};

class Translator {
 public:
  Translator(model::Seq2Seq model, bpe::BpeModel bpe, bpe::Vocab source_vocab, bpe::Vocab target_vocab);
  // Throws FormatError when the checkpoint lacks the BPE or vocabulary blocks.
  static Translator load(const std::filesystem::path& checkpoint);

  const model::Seq2Seq& model() const { return model_; }
  const bpe::BpeModel& bpe() const { return bpe_; }
  const bpe::Vocab& source_vocab() const { return source_vocab_; }
  const bpe::Vocab& target_vocab() const { return target_vocab_; }

  // Greedy when beam == 1. Blank input gives blank output.
  Translation translate(const std::string& line, std::size_t beam, std::size_t max_len) const;

  // Batched greedy decoding, same output text as translate(line, 1, max_len)
  // up to floating-point summation order.
  std::vector<std::string> translate_greedy(const std::vector<std::string>& lines, std::size_t max_len) const;

 private:
  model::Seq2Seq model_;
  bpe::BpeModel bpe_;
  bpe::Vocab source_vocab_;
  bpe::Vocab target_vocab_;
};

}  // namespace nmt::pipeline
