#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace nmt::synth {

// Re-counts every adjacent pair from scratch on each iteration. Slow, but
// small enough to check by eye.
std::vector<std::pair<std::string, std::string>> naive_bpe(const std::map<std::string, std::uint64_t>& words,
                                                           std::size_t num_merges, const std::string& end_marker);

// Applies a merge list to one word, one merge at a time, in list order.
std::vector<std::string> replay_merges(const std::string& word,
                                       const std::vector<std::pair<std::string, std::string>>& merges,
                                       const std::string& end_marker);

}  // namespace nmt::synth
