#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedledger::codec {

// 64-character lowercase hex SHA-256 digest.
struct HashDigest {
  std::string hex;

  bool operator==(const HashDigest&) const = default;
};

HashDigest sha256_hex(const std::vector<std::uint8_t>& bytes);
HashDigest sha256_hex(const std::string& text);

}  // namespace fedledger::codec
