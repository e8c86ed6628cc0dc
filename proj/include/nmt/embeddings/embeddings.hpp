#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmt/bpe/vocab.hpp"
#include "nmt/common/matrix.hpp"

namespace nmt::embeddings {

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }

  // Rejects vectors of the wrong length; a repeated token keeps its first
  // vector and returns false.
  bool insert(std::string token, std::vector<double> vector);
  const std::vector<double>* find(const std::string& token) const;

  // Tokens in file order.
  const std::vector<std::string>& tokens() const { return order_; }

 private:
  std::size_t dim_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Text embedding format: an optional "count dim" header line, then
/// "token v1 ... vd" per line (fastText .vec / BPEmb .txt).
EmbeddingTable load_embedding_table(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim = std::nullopt);

// Writes with a header and 17 significant digits, so reloading is exact.
void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);

// Non-special vocabulary tokens found / missing in the table.
struct Coverage {
  std::size_t hits = 0;
  std::size_t misses = 0;
};

struct Lookup {
  Matrix matrix;
  Coverage coverage;
};

// Row i is the table vector for token i when present, otherwise a seeded
// uniform draw from [-0.1, 0.1]. The PAD row is zero.
Lookup build_lookup(const bpe::Vocab& vocab, const EmbeddingTable* table, std::size_t dim, std::uint64_t seed);

inline constexpr double kInitRange = 0.1;

}  // namespace nmt::embeddings
