#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgesem::csv {

/// Splits one CSV line on commas. Double-quoted fields may contain commas
/// and "" escapes. A trailing '\r' is ignored.
std::vector<std::string> split_line(std::string_view line);

std::string_view trim(std::string_view s);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Whole-field decimal parse after trimming; a leading '+' is allowed.
std::optional<double> parse_double(std::string_view text);

/// Shortest round-trip representation.
std::string format_real(double v);

}  // namespace edgesem::csv
