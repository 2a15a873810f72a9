#include "skvp/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace skvp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (!header.empty() && row.size() != header.size())
    throw std::invalid_argument("CsvTable: row width does not match header");
  rows.push_back(std::move(row));
}

namespace {

void write_line(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void CsvTable::write(std::ostream& os) const {
  for (const auto& m : metadata) os << "# " << m << '\n';
  os << body();
}

std::string CsvTable::body() const {
  std::ostringstream os;
  write_line(os, header);
  for (const auto& r : rows) write_line(os, r);
  return os.str();
}

ParsedCsv read_csv(std::istream& is) {
  ParsedCsv out;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.find_first_not_of("# ");
      if (body == std::string::npos) continue;
      const auto eq = line.find('=', body);
      if (eq != std::string::npos) out.meta[line.substr(body, eq - body)] = line.substr(eq + 1);
      continue;
    }
    if (!have_header) {
      out.header = split(line);
      have_header = true;
    } else {
      out.rows.push_back(split(line));
    }
  }
  return out;
}

std::string strip_csv_comments(const std::string& text) {
  std::istringstream is(text);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line))
    if (line.empty() || line[0] != '#') os << line << '\n';
  return os.str();
}

}  // namespace skvp
