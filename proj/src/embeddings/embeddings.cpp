#include "nmt/embeddings/embeddings.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "nmt/common/error.hpp"
#include "nmt/common/random.hpp"

namespace nmt::embeddings {
namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_count(std::string_view s, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

bool EmbeddingTable::insert(std::string token, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw std::invalid_argument("vector for '" + token + "' has " + std::to_string(vector.size()) +
                                " values, table dim is " + std::to_string(dim_));
  }
  const auto [it, inserted] = vectors_.try_emplace(token, std::move(vector));
  if (inserted) order_.push_back(std::move(token));
  return inserted;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  const auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t line_no = 0;
  const auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = fields_of(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0;
      std::size_t dim = 0;
      if (parse_count(fields[0], count) && parse_count(fields[1], dim)) {
        if (dim == 0) throw FormatError(where() + "header declares dimension 0");
        table.emplace(dim);
        continue;
      }
    }
    if (fields.size() < 2) throw FormatError(where() + "row has a token but no values");
    const std::size_t arity = fields.size() - 1;
    if (!table) table.emplace(arity);
    if (arity != table->dim()) {
      throw FormatError(where() + "row has " + std::to_string(arity) + " values, expected " +
                        std::to_string(table->dim()));
    }
    std::vector<double> values(arity);
    for (std::size_t k = 0; k < arity; ++k) {
      if (!parse_double(fields[k + 1], values[k])) {
        throw FormatError(where() + "bad number '" + std::string(fields[k + 1]) + "'");
      }
    }
    table->insert(std::string(fields[0]), std::move(values));
  }
  if (!table || table->size() == 0) throw FormatError(path.string() + ": no embedding rows");
  if (expected_dim && *expected_dim != table->dim()) {
    throw FormatError(path.string() + ": dimension " + std::to_string(table->dim()) + " does not match expected " +
                      std::to_string(*expected_dim));
  }
  return std::move(*table);
}

void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (const auto& token : table.tokens()) {
    out << token;
    for (const double v : *table.find(token)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Lookup build_lookup(const bpe::Vocab& vocab, const EmbeddingTable* table, std::size_t dim, std::uint64_t seed) {
  if (table && table->dim() != dim) {
    throw std::invalid_argument("embedding table dim " + std::to_string(table->dim()) + " does not match " +
                                std::to_string(dim));
  }
  Lookup lookup;
  lookup.matrix.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < lookup.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < lookup.matrix.cols(); ++j) lookup.matrix(i, j) = rng.uniform(-kInitRange, kInitRange);
  }
  lookup.matrix.row(bpe::Vocab::kPad).setZero();
  for (int id = bpe::Vocab::kNumSpecials; id < static_cast<int>(vocab.size()); ++id) {
    const auto* v = table ? table->find(vocab.token_of(id)) : nullptr;
    if (!v) {
      ++lookup.coverage.misses;
      continue;
    }
    ++lookup.coverage.hits;
    for (std::size_t j = 0; j < dim; ++j) lookup.matrix(id, static_cast<Eigen::Index>(j)) = (*v)[j];
  }
  return lookup;
}

}  // namespace nmt::embeddings
