#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::unicode {

// Splits UTF-8 text into code-point substrings. Invalid bytes become
// single-byte pieces so no input is ever dropped.
std::vector<std::string> split_code_points(std::string_view text);

// Decodes UTF-8 into code points; invalid bytes decode to U+FFFD.
std::vector<char32_t> decode(std::string_view text);

// Canonical composition (NFC).
std::string nfc(std::string_view text);

enum class Script { kLatin, kDevanagari, kBengali, kTamil, kTelugu, kMalayalam, kArabic, kOther };

// Script of a letter-like code point; kOther for digits, punctuation, spaces
// and scripts not listed.
Script script_of(char32_t cp);

// Expected script for an ISO 639-1 code ("en", "ta", "ml", ...).
std::optional<Script> script_for_language(std::string_view lang);

bool is_space(char32_t cp);

// ASCII punctuation plus the common Indic and typographic marks.
bool is_punct(char32_t cp);

std::string encode(char32_t cp);

}  // namespace nmt::unicode
