#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "nmt/model/seq2seq.hpp"

namespace nmt::model {

/// Binary checkpoint, little-endian throughout:
///   "NMTCKPT\n" magic, u32 version (1)
///   u32 text block count, then per block: u32 len, name, u32 len, content
///   u32 tensor count, then per tensor: u32 len, name, u32 rank (2),
///   u32 rows, u32 cols, rows*cols float32 values in row-major order
/// The text block "model_config" holds the architecture as key=value lines.
/// The file is written to a sibling temporary and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Seq2Seq& model,
                     const std::map<std::string, std::string>& text = {});

struct LoadedCheckpoint {
  Seq2Seq model;
  std::map<std::string, std::string> text;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace nmt::model
