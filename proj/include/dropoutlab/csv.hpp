#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dropoutlab::csv {

using Row = std::vector<std::string>;

/// A parsed CSV file: header row plus records. Parsing follows RFC 4180
/// (quoted fields, doubled quotes, embedded separators and newlines);
/// both LF and CRLF line endings are accepted.
struct Table {
  Row header;
  std::vector<Row> records;

  /// Column position by header name, or throws Error(MissingColumn)
  /// mentioning `source`.
  std::size_t column(std::string_view name, std::string_view source) const;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

/// Shortest round-trippable decimal representation.
std::string format_number(double value);
/// Strict full-string parse; returns false on trailing garbage.
bool parse_number(std::string_view text, double& out);

}  // namespace dropoutlab::csv
