#include "nmt/bpe/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nmt/common/error.hpp"

namespace nmt::bpe {

Vocab::Vocab(std::vector<std::string> tokens) {
  tokens_.reserve(tokens.size() + kNumSpecials);
  for (const auto special : kSpecialTokens) tokens_.emplace_back(special);
  for (auto& t : tokens) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.try_emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

int Vocab::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens, bool framing) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  if (framing) ids.push_back(kBos);
  for (const auto& t : tokens) ids.push_back(id_of(t));
  if (framing) ids.push_back(kEos);
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (const int id : ids) {
    const auto& t = token_of(id);
    if (id == kPad || id == kBos || id == kEos) continue;
    tokens.push_back(t);
  }
  return tokens;
}

std::string Vocab::to_text() const {
  std::string out;
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) out += tokens_[i] + '\n';
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
  if (!out) throw IoError("write failed for " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read(in, path.string());
}

Vocab Vocab::from_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return read(in, origin);
}

Vocab Vocab::read(std::istream& in, const std::string& origin) {
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw FormatError(origin + ":" + std::to_string(line_no) + ": empty token");
    tokens.push_back(std::move(line));
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const std::invalid_argument& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& encoded_corpus, std::size_t max_size) {
  if (max_size <= static_cast<std::size_t>(Vocab::kNumSpecials)) {
    throw std::invalid_argument("vocabulary size " + std::to_string(max_size) + " leaves no room beyond the " +
                                std::to_string(Vocab::kNumSpecials) + " special tokens");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& sentence : encoded_corpus) {
    for (const auto& t : sentence) ++counts[t];
  }
  for (const auto special : Vocab::kSpecialTokens) counts.erase(std::string(special));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocab::kNumSpecials);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocab(std::move(tokens));
}

std::vector<int> encode_sentence(const BpeModel& model, const Vocab& vocab, const std::vector<std::string>& words,
                                 bool framing) {
  return vocab.encode(model.encode_tokens(words), framing);
}

std::string decode(const Vocab& vocab, const BpeModel& model, const std::vector<int>& ids) {
  return model.join_subwords(vocab.decode(ids));
}

}  // namespace nmt::bpe
