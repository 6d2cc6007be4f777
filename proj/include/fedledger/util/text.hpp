#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedledger {

// Decimal rendering left-padded with zeros to at least width characters.
std::string zfill(std::int64_t value, int width);

std::vector<std::string> split(const std::string& text, char delim);

std::string join(const std::vector<std::string>& parts, char delim);

// Strict decimal parse of the full string; throws Error otherwise.
std::int64_t parse_int(const std::string& text);

// Shortest-readable exact rendering (%.17g): parsing the result recovers
// the identical double.
std::string format_double(double value);

}  // namespace fedledger
