#include "fedledger/codec/sha256.hpp"

#include <openssl/evp.h>

#include <memory>

#include "fedledger/codec/base64.hpp"
#include "fedledger/error.hpp"

namespace fedledger::codec {

namespace {

HashDigest sha256_impl(const std::uint8_t* data, std::size_t len) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(
      EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data, len) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &md_len) != 1) {
    throw Error("sha256: digest computation failed");
  }
  return HashDigest{hex_encode(std::vector<std::uint8_t>(md, md + md_len))};
}

}  // namespace

HashDigest sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_impl(bytes.data(), bytes.size());
}

HashDigest sha256_hex(const std::string& text) {
  return sha256_impl(reinterpret_cast<const std::uint8_t*>(text.data()),
                     text.size());
}

}  // namespace fedledger::codec
