#include "nmt/pipeline/translator.hpp"

#include "nmt/common/error.hpp"
#include "nmt/corpus/tokenize.hpp"
#include "nmt/model/checkpoint.hpp"

namespace nmt::pipeline {
namespace {

std::string render(const bpe::Vocab& vocab, const bpe::BpeModel& bpe, const std::vector<int>& ids) {
  return bpe::decode(vocab, bpe, ids);
}

}  // namespace

std::map<std::string, std::string> translator_blocks(const bpe::BpeModel& bpe, const bpe::Vocab& source_vocab,
                                                     const bpe::Vocab& target_vocab) {
  return {{kBpeBlock, bpe.to_text()},
          {kSourceVocabBlock, source_vocab.to_text()},
          {kTargetVocabBlock, target_vocab.to_text()}};
}

std::vector<std::string> segment_source(const bpe::BpeModel& bpe, const std::string& line) {
  return bpe.encode_tokens(corpus::tokenize_basic(line, corpus::TokenizeMode::kSource));
}

std::vector<std::string> segment_target(const bpe::BpeModel& bpe, const std::string& line) {
  return bpe.encode_tokens(corpus::tokenize_basic(line, corpus::TokenizeMode::kTarget));
}

Translator::Translator(model::Seq2Seq model, bpe::BpeModel bpe, bpe::Vocab source_vocab, bpe::Vocab target_vocab)
    : model_(std::move(model)),
      bpe_(std::move(bpe)),
      source_vocab_(std::move(source_vocab)),
      target_vocab_(std::move(target_vocab)) {
  if (source_vocab_.size() != model_.config().source_vocab || target_vocab_.size() != model_.config().target_vocab) {
    throw FormatError("vocabulary sizes " + std::to_string(source_vocab_.size()) + "/" +
                      std::to_string(target_vocab_.size()) + " do not match the model's " +
                      std::to_string(model_.config().source_vocab) + "/" +
                      std::to_string(model_.config().target_vocab));
  }
}

Translator Translator::load(const std::filesystem::path& checkpoint) {
  auto loaded = model::load_checkpoint(checkpoint);
  const auto block = [&](const char* name) -> const std::string& {
    const auto it = loaded.text.find(name);
    if (it == loaded.text.end()) {
      throw FormatError(checkpoint.string() + ": checkpoint has no '" + name + "' block");
    }
    return it->second;
  };
  const std::string origin = checkpoint.string();
  auto bpe = bpe::BpeModel::from_text(block(kBpeBlock), origin + ":" + kBpeBlock);
  auto src = bpe::Vocab::from_text(block(kSourceVocabBlock), origin + ":" + kSourceVocabBlock);
  auto tgt = bpe::Vocab::from_text(block(kTargetVocabBlock), origin + ":" + kTargetVocabBlock);
  return Translator(std::move(loaded.model), std::move(bpe), std::move(src), std::move(tgt));
}

Translation Translator::translate(const std::string& line, std::size_t beam, std::size_t max_len) const {
  Translation out;
  out.source_subwords = segment_source(bpe_, line);
  if (out.source_subwords.empty()) return out;
  const auto ids = source_vocab_.encode(out.source_subwords);
  if (beam <= 1) {
    out.hypothesis = model::greedy_decode(model_, ids, max_len);
  } else {
    out.hypothesis = model::beam_decode(model_, ids, beam, max_len).front();
  }
  for (const int id : out.hypothesis.tokens) out.target_subwords.push_back(target_vocab_.token_of(id));
  out.text = render(target_vocab_, bpe_, out.hypothesis.tokens);
  return out;
}

std::vector<std::string> Translator::translate_greedy(const std::vector<std::string>& lines,
                                                      std::size_t max_len) const {
  std::vector<std::string> out(lines.size());
  std::vector<std::vector<int>> sources;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto sub = segment_source(bpe_, lines[i]);
    if (sub.empty()) continue;
    sources.push_back(source_vocab_.encode(sub));
    where.push_back(i);
  }
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < sources.size(); start += kChunk) {
    const std::size_t end = std::min(sources.size(), start + kChunk);
    std::vector<std::vector<int>> chunk(sources.begin() + static_cast<std::ptrdiff_t>(start),
                                        sources.begin() + static_cast<std::ptrdiff_t>(end));
    const auto hyps = model::greedy_decode_batch(model_, chunk, max_len);
    for (std::size_t k = 0; k < hyps.size(); ++k) out[where[start + k]] = render(target_vocab_, bpe_, hyps[k].tokens);
  }
  return out;
}

}  // namespace nmt::pipeline
