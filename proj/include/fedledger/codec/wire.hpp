#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fedledger/codec/sha256.hpp"

namespace fedledger::codec {

// Wire formats between agents, the private chain, the public contract and
// the log store. Byte-exact definitions live in FORMATS.md; the digests in
// HashCommitment are taken over the canonical bytes produced here, so any
// change to this file is a ledger-format change.

enum class PayloadKind { kSignBits, kFloat32 };

const char* to_string(PayloadKind kind);
PayloadKind payload_kind_from_string(const std::string& s);

// One chunk of a worker's upload. payload is text: base64 for sign bits,
// lowercase hex for float32. batch_index is dense from 0.
struct WireBatch {
  std::string worker_id;
  int epoch_index = 0;
  int batch_index = 0;
  std::string payload;
  PayloadKind kind = PayloadKind::kFloat32;
};

// Sign bits, MSB-first within each byte; bit i of the stream lives at
// bytes[i/8] position (7 - i%8). Trailing bits of the last byte are zero.
struct SignBits {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;

  bool bit(std::size_t i) const {
    return (bytes[i / 8] >> (7 - i % 8)) & 1;
  }
};

// bit i = 1 iff delta[i] >= 0. Zero maps to 1: the wire alphabet has no
// third symbol, so the tie resolves positive (same rule the aggregators use).
SignBits pack_signs(const Eigen::Ref<const Eigen::VectorXf>& delta);

// Signs back to a +/-1 float vector.
Eigen::VectorXf unpack_signs(const SignBits& bits);

std::string encode_base64(const SignBits& bits);
SignBits decode_base64_signs(const std::string& text, std::size_t bit_count);

// Little-endian IEEE-754 float32, 4 bytes per parameter, flat index order.
// Throws Error on non-finite values.
std::vector<std::uint8_t> serialize_float32(
    const Eigen::Ref<const Eigen::VectorXf>& delta);
Eigen::VectorXf deserialize_float32(const std::vector<std::uint8_t>& bytes);

// The bytes the hash commitment is taken over: packed sign bytes for
// kSignBits, float32 bytes for kFloat32. Independent of chunking.
std::vector<std::uint8_t> canonical_wire_bytes(
    const Eigen::Ref<const Eigen::VectorXf>& delta, PayloadKind kind);

// Text payload as carried on the ledger (base64 or hex of the canonical
// bytes) and its inverse.
std::string payload_text(const Eigen::Ref<const Eigen::VectorXf>& delta,
                         PayloadKind kind);
Eigen::VectorXf decode_payload_text(const std::string& text, PayloadKind kind,
                                    Eigen::Index dim);

// Canonical bytes recovered from ledger payload text; validates the byte
// count against the declared dim. Hashing these bytes reproduces the
// worker's off-chain commitment regardless of how the text was chunked.
std::vector<std::uint8_t> payload_bytes_from_text(const std::string& text,
                                                  PayloadKind kind,
                                                  Eigen::Index dim);

// Split payload text into <= max_chars chunks, batch_index dense from 0.
// Empty payload yields zero chunks.
std::vector<WireBatch> chunk(const std::string& payload, int max_chars,
                             const std::string& worker_id, int epoch_index,
                             PayloadKind kind);

// Concatenate chunks back; validates the batch index sequence is dense.
std::string reassemble(const std::vector<WireBatch>& batches);

// SHA-256 over the canonical wire bytes.
HashDigest hash_params(const Eigen::Ref<const Eigen::VectorXf>& delta,
                       PayloadKind kind);

// Per-call chunk budget: 13,300 base64 characters.
inline constexpr int kDefaultChunkChars = 13300;

}  // namespace fedledger::codec
