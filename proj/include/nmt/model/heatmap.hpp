#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmt/common/matrix.hpp"

namespace nmt::model {

struct AttentionGrid {
  std::vector<std::string> source_tokens;  // columns
  std::vector<std::string> target_tokens;  // rows
  Matrix weights;                          // target x source
};

/// Writes `path` as TSV: a header row (empty corner cell, then the source
/// tokens) followed by one row per target token. A grayscale PGM render
/// (darker = more weight) goes to `path` + ".pgm".
/// Throws std::invalid_argument on a shape mismatch, IoError on write failure.
void export_attention(const Matrix& attention, const std::vector<std::string>& source_tokens,
                      const std::vector<std::string>& target_tokens, const std::filesystem::path& path);

AttentionGrid read_attention(const std::filesystem::path& path);

}  // namespace nmt::model
