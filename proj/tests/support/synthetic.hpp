#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nmt::synth {

struct ParallelLines {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// English -> agglutinative SOV target in Tamil script. Nouns take number
// and case suffixes, verbs take tense and person suffixes, so the target
// has far more word forms than the source. Stems are drawn Zipf-like.
struct AgglutinativeOptions {
  std::size_t pairs = 1000;
  std::size_t nouns = 40;
  std::size_t verbs = 30;
  std::uint64_t seed = 1;
};

ParallelLines agglutinative_corpus(const AgglutinativeOptions& options);

void write_parallel_lines(const ParallelLines& lines, const std::filesystem::path& source,
                          const std::filesystem::path& target);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace nmt::synth
