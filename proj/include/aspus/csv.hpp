#pragma once

#include <string>
#include <vector>

#include "aspus/types.hpp"

namespace aspus::csv {

struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index cols() const { return static_cast<Index>(header.size()); }
  Index size() const { return static_cast<Index>(rows.size()); }
};

/// Strict comma-separated reader: one header line, every row with the same
/// column count, trailing '\r' stripped. No quoting; identifiers and numbers
/// only. Errors carry the path and 1-based line number of the first problem.
Table read(const std::string& path);

/// Parses a finite real; `where` names the cell for the error message.
Real parse_real(const std::string& text, const std::string& where);

/// Parses a 0/1 event indicator.
int parse_status(const std::string& text, const std::string& where);

/// Shortest decimal string that reloads to the same double bit pattern.
std::string format_real(Real x);

}  // namespace aspus::csv
