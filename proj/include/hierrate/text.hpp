#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hierrate::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of the whole field; throws DataError naming `what`.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);
/// Comma-separated list with surrounding blanks removed; "" gives {}.
std::vector<std::string> split_list(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace hierrate::text
