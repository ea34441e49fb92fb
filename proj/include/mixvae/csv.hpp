#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mixvae::csv {

/// Splits one unquoted CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_line(std::string_view line);

/// Reads a whole file as lines, dropping a trailing carriage return on each.
std::vector<std::string> read_lines(const std::string& path);

/// Fixed-notation decimal with `digits` fractional digits ("-0.000000" is printed as "0.000000").
std::string fixed(double value, int digits);
/// Shortest representation that parses back to the same double.
std::string exact(double value);

}  // namespace mixvae::csv
