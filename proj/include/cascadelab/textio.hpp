#pragma once

// Small text helpers shared by the file-format readers and writers.

#include <string>
#include <string_view>
#include <vector>

namespace cascadelab {

// Splits a record on tabs (or on runs of spaces when the line has no tab).
// Returns nothing for blank lines and `#` comments.
std::vector<std::string_view> split_fields(std::string_view line);

// Comma-separated fields, no quoting; surrounding whitespace trimmed.
std::vector<std::string_view> split_csv(std::string_view line);

std::string_view trim(std::string_view s);

bool parse_double(std::string_view s, double& out);
bool parse_size(std::string_view s, std::size_t& out);
bool parse_int64(std::string_view s, long long& out);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

} // namespace cascadelab
