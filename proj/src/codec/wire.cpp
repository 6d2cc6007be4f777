#include "fedledger/codec/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fedledger/codec/base64.hpp"
#include "fedledger/error.hpp"

namespace fedledger::codec {

const char* to_string(PayloadKind kind) {
  return kind == PayloadKind::kSignBits ? "sign-bits" : "float32";
}

PayloadKind payload_kind_from_string(const std::string& s) {
  if (s == "sign-bits") return PayloadKind::kSignBits;
  if (s == "float32") return PayloadKind::kFloat32;
  throw Error("unknown payload kind: " + s);
}

SignBits pack_signs(const Eigen::Ref<const Eigen::VectorXf>& delta) {
  SignBits out;
  out.bit_count = static_cast<std::size_t>(delta.size());
  out.bytes.assign((out.bit_count + 7) / 8, 0);
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    if (delta[i] >= 0.0f) {
      out.bytes[i / 8] |= static_cast<std::uint8_t>(1u << (7 - i % 8));
    }
  }
  return out;
}

Eigen::VectorXf unpack_signs(const SignBits& bits) {
  Eigen::VectorXf out(static_cast<Eigen::Index>(bits.bit_count));
  for (std::size_t i = 0; i < bits.bit_count; ++i) {
    out[static_cast<Eigen::Index>(i)] = bits.bit(i) ? 1.0f : -1.0f;
  }
  return out;
}

std::string encode_base64(const SignBits& bits) {
  return base64_encode(bits.bytes);
}

SignBits decode_base64_signs(const std::string& text, std::size_t bit_count) {
  SignBits out;
  out.bytes = base64_decode(text);
  if (out.bytes.size() != (bit_count + 7) / 8) {
    throw Error("sign payload: byte count does not match declared dim");
  }
  out.bit_count = bit_count;
  return out;
}

std::vector<std::uint8_t> serialize_float32(
    const Eigen::Ref<const Eigen::VectorXf>& delta) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(delta.size()) * 4);
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    const float v = delta[i];
    if (!std::isfinite(v)) {
      throw Error("serialize_float32: non-finite value at index " +
                  std::to_string(i));
    }
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    const std::size_t o = static_cast<std::size_t>(i) * 4;
    out[o + 0] = static_cast<std::uint8_t>(u & 0xff);
    out[o + 1] = static_cast<std::uint8_t>((u >> 8) & 0xff);
    out[o + 2] = static_cast<std::uint8_t>((u >> 16) & 0xff);
    out[o + 3] = static_cast<std::uint8_t>((u >> 24) & 0xff);
  }
  return out;
}

Eigen::VectorXf deserialize_float32(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) {
    throw Error("deserialize_float32: byte count not a multiple of 4");
  }
  Eigen::VectorXf out(static_cast<Eigen::Index>(bytes.size() / 4));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const std::size_t o = static_cast<std::size_t>(i) * 4;
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[o]) |
                            (static_cast<std::uint32_t>(bytes[o + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[o + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[o + 3]) << 24);
    float v;
    std::memcpy(&v, &u, 4);
    out[i] = v;
  }
  return out;
}

std::vector<std::uint8_t> canonical_wire_bytes(
    const Eigen::Ref<const Eigen::VectorXf>& delta, PayloadKind kind) {
  if (kind == PayloadKind::kSignBits) {
    return pack_signs(delta).bytes;
  }
  return serialize_float32(delta);
}

std::string payload_text(const Eigen::Ref<const Eigen::VectorXf>& delta,
                         PayloadKind kind) {
  if (kind == PayloadKind::kSignBits) {
    return encode_base64(pack_signs(delta));
  }
  return hex_encode(serialize_float32(delta));
}

Eigen::VectorXf decode_payload_text(const std::string& text, PayloadKind kind,
                                    Eigen::Index dim) {
  if (kind == PayloadKind::kSignBits) {
    return unpack_signs(
        decode_base64_signs(text, static_cast<std::size_t>(dim)));
  }
  Eigen::VectorXf out = deserialize_float32(hex_decode(text));
  if (out.size() != dim) {
    throw Error("float32 payload: dim mismatch");
  }
  return out;
}

std::vector<std::uint8_t> payload_bytes_from_text(const std::string& text,
                                                  PayloadKind kind,
                                                  Eigen::Index dim) {
  std::vector<std::uint8_t> bytes;
  std::size_t expected;
  if (kind == PayloadKind::kSignBits) {
    bytes = base64_decode(text);
    expected = (static_cast<std::size_t>(dim) + 7) / 8;
  } else {
    bytes = hex_decode(text);
    expected = static_cast<std::size_t>(dim) * 4;
  }
  if (bytes.size() != expected) {
    throw Error("payload byte count does not match declared dim");
  }
  return bytes;
}

std::vector<WireBatch> chunk(const std::string& payload, int max_chars,
                             const std::string& worker_id, int epoch_index,
                             PayloadKind kind) {
  if (max_chars < 1) throw PreconditionError("chunk: max_chars must be >= 1");
  std::vector<WireBatch> out;
  const std::size_t step = static_cast<std::size_t>(max_chars);
  for (std::size_t off = 0; off < payload.size(); off += step) {
    WireBatch b;
    b.worker_id = worker_id;
    b.epoch_index = epoch_index;
    b.batch_index = static_cast<int>(out.size());
    b.payload = payload.substr(off, step);
    b.kind = kind;
    out.push_back(std::move(b));
  }
  return out;
}

std::string reassemble(const std::vector<WireBatch>& batches) {
  std::vector<const WireBatch*> ordered;
  ordered.reserve(batches.size());
  for (const auto& b : batches) ordered.push_back(&b);
  std::sort(ordered.begin(), ordered.end(),
            [](const WireBatch* a, const WireBatch* b) {
              return a->batch_index < b->batch_index;
            });
  std::string out;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (ordered[i]->batch_index != static_cast<int>(i)) {
      throw IntegrityError("reassemble: batch indices not dense from 0");
    }
    out += ordered[i]->payload;
  }
  return out;
}

HashDigest hash_params(const Eigen::Ref<const Eigen::VectorXf>& delta,
                       PayloadKind kind) {
  return sha256_hex(canonical_wire_bytes(delta, kind));
}

}  // namespace fedledger::codec
