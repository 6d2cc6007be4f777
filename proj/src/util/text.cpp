#include "fedledger/util/text.hpp"

#include <cstdio>
#include <sstream>

#include "fedledger/error.hpp"

namespace fedledger {

std::string zfill(std::int64_t value, int width) {
  if (value < 0) throw PreconditionError("zfill: negative value");
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return digits;
}

std::vector<std::string> split(const std::string& text, char delim) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = text.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, char delim) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out.push_back(delim);
    out += parts[i];
  }
  return out;
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::int64_t parse_int(const std::string& text) {
  if (text.empty()) throw Error("parse_int: empty string");
  std::size_t i = text[0] == '-' ? 1 : 0;
  if (i == text.size()) throw Error("parse_int: no digits");
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') {
      throw Error("parse_int: non-digit in \"" + text + "\"");
    }
  }
  try {
    return std::stoll(text);
  } catch (const std::exception&) {
    throw Error("parse_int: out of range: \"" + text + "\"");
  }
}

}  // namespace fedledger
