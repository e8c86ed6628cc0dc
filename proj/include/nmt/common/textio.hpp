#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nmt {

// Lines without their terminators. Throws IoError.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace nmt
