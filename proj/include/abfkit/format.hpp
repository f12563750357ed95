#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace abfkit {

/// 17 significant digits: parses back to the identical double.
std::string format_double(double value);

std::string join_doubles(std::span<const double> values, std::string_view sep);

/// Strict parse of a whole token; throws kInvalidArgument on trailing junk.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace abfkit
