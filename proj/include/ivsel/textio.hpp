#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ivsel {

/// Splits one CSV record; double-quoted cells may contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

/// Strict numeric parse; throws DataError naming the row and column.
double parse_double(std::string_view cell, std::size_t row, const std::string& column);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// FNV-1a of the bytes as 16 lowercase hex digits.
std::string hex_digest(std::string_view bytes);

}  // namespace ivsel
