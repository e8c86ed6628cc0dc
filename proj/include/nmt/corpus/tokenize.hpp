#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nmt::corpus {

enum class TokenizeMode { kSource, kTarget };

// Source mode splits on whitespace and isolates every punctuation mark.
// Target mode splits on whitespace only; subword segmentation handles
// morphology downstream.
std::vector<std::string> tokenize_basic(std::string_view text, TokenizeMode mode);

// Whitespace split shared by length counting and scoring.
std::vector<std::string> split_whitespace(std::string_view text);

std::size_t count_tokens(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

std::string trim(std::string_view text);

}  // namespace nmt::corpus
