#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neurotwin::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ParseError when absent.
  std::size_t column(std::string_view name) const;
};

/// Plain comma-separated text: no quoting, LF or CRLF line endings, first
/// line is the header. Blank lines are skipped.
CsvTable parse_csv(std::string_view text);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

std::string read_text(const std::filesystem::path& path);
/// "-" writes to stdout.
void write_text(const std::filesystem::path& path, std::string_view text);

std::string join(const std::vector<std::string>& fields, char sep = ',');

}  // namespace neurotwin::io
