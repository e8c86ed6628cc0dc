#include "nmt/model/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nmt/common/error.hpp"

namespace nmt::model {
namespace {

constexpr int kCell = 16;

std::string clean_cell(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

void write_pgm(const Matrix& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto width = w.cols() * kCell;
  const auto height = w.rows() * kCell;
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::string row(static_cast<std::size_t>(width), '\0');
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      const double v = std::clamp(w(r, c), 0.0, 1.0);
      const auto shade = static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)));
      std::fill_n(row.begin() + c * kCell, kCell, static_cast<char>(shade));
    }
    for (int k = 0; k < kCell; ++k) out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void export_attention(const Matrix& attention, const std::vector<std::string>& source_tokens,
                      const std::vector<std::string>& target_tokens, const std::filesystem::path& path) {
  if (attention.size() == 0) throw std::invalid_argument("export_attention: empty attention matrix");
  if (attention.rows() != static_cast<Eigen::Index>(target_tokens.size()) ||
      attention.cols() != static_cast<Eigen::Index>(source_tokens.size())) {
    throw std::invalid_argument("export_attention: matrix is " + std::to_string(attention.rows()) + "x" +
                                std::to_string(attention.cols()) + " but there are " +
                                std::to_string(target_tokens.size()) + " target and " +
                                std::to_string(source_tokens.size()) + " source tokens");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : source_tokens) out << '\t' << clean_cell(s);
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < attention.rows(); ++r) {
    out << clean_cell(target_tokens[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < attention.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", attention(r, c));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
  out.close();
  write_pgm(attention, std::filesystem::path(path.string() + ".pgm"));
}

AttentionGrid read_attention(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  auto header = split_tabs(line);
  AttentionGrid grid;
  grid.source_tokens.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    grid.target_tokens.push_back(cells[0]);
    std::vector<double> values;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(values));
  }
  grid.weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(grid.source_tokens.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      grid.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return grid;
}

}  // namespace nmt::model
