#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace skvp {

/// Shortest round-trip text for a double with 17 significant digits.
std::string format_double(double v);

/// Comma-separated table: `#`-prefixed metadata lines, one header row, then
/// data rows. Fields are written verbatim.
struct CsvTable {
  std::vector<std::string> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(std::ostream& os) const;
  /// Header and rows only, the part that must be reproducible.
  std::string body() const;
};

/// Parsed CSV: metadata lines of the form `# key=value` are collected into
/// `meta`; the first non-comment line is the header.
struct ParsedCsv {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

ParsedCsv read_csv(std::istream& is);

/// Drops `#` lines, keeping the header and rows verbatim.
std::string strip_csv_comments(const std::string& text);

}  // namespace skvp
