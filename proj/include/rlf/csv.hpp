#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rlf {

/// Shortest decimal text that parses back to exactly `v` ('.' decimal point).
/// Infinities are written as `inf` / `-inf`.
std::string format_double(double v);

/// Inverse of format_double; throws ConfigError on malformed text.
double parse_double(std::string_view text);

/// Splits one RFC-4180 line (no embedded newlines) into fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote, or whitespace at the ends.
std::string csv_escape(std::string_view field);

/// Writes `a,b,c\n` with escaping.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rlf
