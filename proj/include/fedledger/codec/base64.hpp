#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedledger::codec {

// Standard base64 (RFC 4648 alphabet, '=' padding).
std::string base64_encode(const std::vector<std::uint8_t>& bytes);

// Strict decode: rejects characters outside the alphabet, bad padding, and
// input whose length is not a multiple of 4. Throws fedledger::Error.
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Lowercase hex.
std::string hex_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> hex_decode(const std::string& text);

}  // namespace fedledger::codec
