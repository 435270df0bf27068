#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace repalign {

// Minimal delimited-text layer shared by all file formats. Lines starting
// with '#' are collected as comments; fields are comma-separated with no
// quoting (ids are validated against embedded separators instead).
struct CsvContent {
  std::vector<std::string> comments;            // '#' lines, prefix stripped
  std::vector<std::vector<std::string>> rows;   // includes the header row
  std::vector<std::size_t> line_numbers;        // 1-based source line per row
};

CsvContent read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& comments,
               const std::vector<std::vector<std::string>>& rows);

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double value);

// Parses a full field as a double; empty or malformed input yields nullopt.
std::optional<double> parse_double(const std::string& field);

}  // namespace repalign
