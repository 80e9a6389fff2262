#pragma once

// Minimal RFC 4180 CSV: fields containing a comma, quote or newline are
// quoted, quotes doubled.

#include <string>
#include <string_view>
#include <vector>

namespace probekit::csv {

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Parses a whole document into rows; a trailing newline ends the last row.
std::vector<std::vector<std::string>> parse(std::string_view text);

// Fixed-precision formatting shared by every CSV writer.
std::string format_double(double v);

}  // namespace probekit::csv
