#include "aspus/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "aspus/errors.hpp"

namespace aspus::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");

  Table table;
  table.path = path;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::ifstream::traits_type::eof()) break;
      throw ValidationError(path + " line " + std::to_string(line_no) +
                            ": empty line");
    }
    auto fields = split_line(line);
    if (line_no == 1) {
      table.header = std::move(fields);
      continue;
    }
    if (static_cast<Index>(fields.size()) != table.cols()) {
      throw ValidationError(path + " line " + std::to_string(line_no) + ": has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw ValidationError(path + ": missing header line");
  return table;
}

Real parse_real(const std::string& text, const std::string& where) {
  if (text.empty()) throw ValidationError(where + ": empty value");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ValidationError(where + ": not a finite number: '" + text + "'");
  }
  return v;
}

int parse_status(const std::string& text, const std::string& where) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw ValidationError(where + ": status must be 0 or 1, got '" + text + "'");
}

std::string format_real(Real x) {
  char buf[40];
  // Try increasing precision until the round trip is exact; 17 significant
  // digits always suffice for IEEE doubles.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  return buf;
}

}  // namespace aspus::csv
