#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nmt/pipeline/manifest.hpp"

namespace nmt::pipeline {

inline constexpr const char* kWorkspaceEnv = "NMT_WORKSPACE";
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr std::array<const char*, 6> kStageNames = {"clean", "bpe", "train", "translate", "score", "attn-viz"};

// Per-stage seeds are the top-level seed plus these offsets.
inline constexpr std::uint64_t kSplitSeedOffset = 1;
inline constexpr std::uint64_t kInitSeedOffset = 2;
inline constexpr std::uint64_t kTrainSeedOffset = 3;
inline constexpr std::uint64_t kEmbeddingSeedOffset = 4;

/// Flat key=value pipeline configuration. Relative paths resolve against
/// the directory holding the config file.
///
///   workdir            output directory (default: $NMT_WORKSPACE, else "work")
///   seed               top-level seed
///   data.source / data.target / data.source_lang / data.target_lang
///   clean.max_len / clean.max_reps / clean.window / clean.rules
///   clean.test / clean.dev           held-out sizes
///   bpe.merges / bpe.vocab            merge count, per-side vocabulary cap
///   train.<key>        any training key except seed, checkpoint_path
///   train.embeddings   optional pretrained subword vectors
///   translate.beam / translate.max_len
///   score.lowercase
///   attn.index         test sentence to visualize
struct PipelineConfig {
  std::filesystem::path base_dir = ".";
  std::filesystem::path workdir;
  std::uint64_t seed = 1;

  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::string source_lang = "en";
  std::string target_lang = "ta";

  std::size_t max_len = 50;
  std::size_t max_reps = 2;
  std::size_t window = 5;
  std::filesystem::path rules_path;
  std::size_t n_test = 100;
  std::size_t n_dev = 100;

  std::size_t merges = 1000;
  std::size_t vocab = 2000;

  std::map<std::string, std::string> train;
  std::filesystem::path embeddings;

  std::size_t beam = 5;
  std::size_t decode_max_len = 100;
  bool lowercase = false;
  std::size_t attn_index = 0;

  // Throws ConfigError on unknown keys, bad values or missing data paths.
  static PipelineConfig parse(const std::string& text, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
};

enum class StageAction { kRan, kSkipped, kFailed };

struct StageOutcome {
  std::string name;
  StageAction action = StageAction::kRan;
  std::string message;
};

struct RunResult {
  int exit_status = 0;
  Manifest manifest;
  std::filesystem::path manifest_path;
  std::vector<StageOutcome> outcomes;
};

struct RunOptions {
  bool force = false;  // rerun stages even when their inputs are unchanged
  std::ostream* log = nullptr;
};

/// Runs clean -> bpe -> train -> translate -> score -> attn-viz in the
/// workspace. A stage whose parameters and input digests match its
/// manifest record is skipped after its outputs are verified; an output
/// that no longer matches its digest fails that stage. The manifest is
/// rewritten atomically after every stage; a failure is recorded and stops
/// the run with exit status 1.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});
RunResult run_pipeline(const std::filesystem::path& config_path, const RunOptions& options = {});

// Stage table with parameters, corpus counts and BLEU.
std::string describe(const Manifest& manifest);
std::string describe(const std::filesystem::path& manifest_path);

// $NMT_WORKSPACE when set, else the current directory.
std::filesystem::path default_workspace();

}  // namespace nmt::pipeline
