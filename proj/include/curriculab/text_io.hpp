#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curriculab {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Fixed-point text with `decimals` digits, as used in report tables.
std::string format_fixed(double value, int decimals);

/// Scientific notation with two mantissa decimals, e.g. "5.32e-16".
std::string format_sci(double value);

/// Strict parse of a finite double; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view text);

/// A data line of a CSV stream together with its 1-based line number.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads non-blank lines, stripping a trailing '\r'. Lines starting with '#'
/// are skipped.
std::vector<CsvRow> read_csv_rows(std::istream& in);

}  // namespace curriculab
