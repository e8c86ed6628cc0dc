#include "nmt/corpus/tokenize.hpp"

#include "nmt/common/unicode.hpp"

namespace nmt::corpus {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char32_t cp : unicode::decode(text)) {
    if (unicode::is_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += unicode::encode(cp);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (const char32_t cp : unicode::decode(text)) {
    const bool space = unicode::is_space(cp);
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

std::vector<std::string> tokenize_basic(std::string_view text, TokenizeMode mode) {
  if (mode == TokenizeMode::kTarget) return split_whitespace(text);
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (const char32_t cp : unicode::decode(text)) {
    if (unicode::is_space(cp)) {
      flush();
    } else if (unicode::is_punct(cp)) {
      flush();
      tokens.push_back(unicode::encode(cp));
    } else {
      current += unicode::encode(cp);
    }
  }
  flush();
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string trim(std::string_view text) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_ws(text[begin])) ++begin;
  while (end > begin && is_ws(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

}  // namespace nmt::corpus
