#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/hash.hpp"
#include "credmatch/matching.hpp"
#include "credmatch/paillier.hpp"

namespace credmatch {

inline constexpr uint8_t kProtocolVersion = 0x01;
inline constexpr uint32_t kMaxFrameBody = 1u << 24;

enum class MsgType : uint8_t {
  hello = 0x01,
  hello_ack = 0x02,
  coeffs = 0x03,
  response = 0x04,
  close = 0x05,
  abort = 0xff,
};

enum class AbortReason : uint8_t {
  version_mismatch = 0x01,
  digest_mismatch = 0x02,
  malformed_frame = 0x03,
  unexpected_message = 0x04,
  param_rejected = 0x05,
  key_mismatch = 0x06,
  count_mismatch = 0x07,
  invalid_ciphertext = 0x08,
  timeout = 0x09,
  oversize = 0x0a,
  internal = 0x0b,
};

inline const char* abort_reason_name(AbortReason reason) {
  switch (reason) {
    case AbortReason::version_mismatch: return "version mismatch";
    case AbortReason::digest_mismatch: return "domain digest mismatch";
    case AbortReason::malformed_frame: return "malformed frame";
    case AbortReason::unexpected_message: return "unexpected message";
    case AbortReason::param_rejected: return "parameters rejected";
    case AbortReason::key_mismatch: return "key mismatch";
    case AbortReason::count_mismatch: return "count mismatch";
    case AbortReason::invalid_ciphertext: return "invalid ciphertext";
    case AbortReason::timeout: return "timeout";
    case AbortReason::oversize: return "oversize frame";
    case AbortReason::internal: return "internal error";
  }
  return "unknown";
}

class ProtocolError : public Error {
public:
  ProtocolError(AbortReason reason, const std::string& msg)
      : Error(msg), reason_(reason) {}
  AbortReason reason() const { return reason_; }

private:
  AbortReason reason_;
};

// type is kept as the raw byte so unknown values survive until the session
// layer decides how to answer them.
struct Frame {
  uint8_t version;
  uint8_t type;
  std::vector<uint8_t> body;
};

namespace detail {

class ByteWriter {
public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<uint8_t>(v >> shift));
    }
  }
  void u64(uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<uint8_t>(v >> shift));
    }
  }
  void bytes(const uint8_t* data, size_t len) {
    out_.insert(out_.end(), data, data + len);
  }
  void bytes(const std::vector<uint8_t>& data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }
  std::vector<uint8_t> take() { return std::move(out_); }

private:
  std::vector<uint8_t> out_;
};

class ByteReader {
public:
  explicit ByteReader(const std::vector<uint8_t>& data) : data_(data) {}

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() {
    const uint8_t* p = take(2);
    return static_cast<uint16_t>((p[0] << 8) | p[1]);
  }
  uint32_t u32() {
    const uint8_t* p = take(4);
    return (static_cast<uint32_t>(p[0]) << 24) |
           (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
  }
  uint64_t u64() {
    uint64_t hi = u32();
    return (hi << 32) | u32();
  }
  std::vector<uint8_t> bytes(size_t len) {
    const uint8_t* p = take(len);
    return std::vector<uint8_t>(p, p + len);
  }
  size_t remaining() const { return data_.size() - pos_; }
  void expect_done() const {
    if (pos_ != data_.size()) {
      throw ProtocolError(AbortReason::malformed_frame,
                          "trailing bytes in message body");
    }
  }

private:
  const uint8_t* take(size_t len) {
    if (len > data_.size() - pos_) {
      throw ProtocolError(AbortReason::malformed_frame,
                          "message body truncated");
    }
    const uint8_t* p = data_.data() + pos_;
    pos_ += len;
    return p;
  }

  const std::vector<uint8_t>& data_;
  size_t pos_ = 0;
};

}  // namespace detail

// ---- handshake ----

struct HelloMessage {
  mpz_class n;
  Sha256Digest client_domain_digest;
  Sha256Digest server_domain_digest;
  uint32_t option_count;
  ProtocolParams params;
};

inline std::vector<uint8_t> encode_hello(const HelloMessage& msg) {
  detail::ByteWriter w;
  std::vector<uint8_t> n_bytes = to_bytes_be(msg.n);
  w.u32(static_cast<uint32_t>(n_bytes.size()));
  w.bytes(n_bytes);
  w.bytes(msg.client_domain_digest.data(), msg.client_domain_digest.size());
  w.bytes(msg.server_domain_digest.data(), msg.server_domain_digest.size());
  w.u32(msg.option_count);
  w.u16(static_cast<uint16_t>(msg.params.guard_bits));
  w.u16(static_cast<uint16_t>(msg.params.hash_width));
  w.u8(msg.params.payload ? 1 : 0);
  w.u8(msg.params.bucketing ? 1 : 0);
  if (msg.params.bucketing) {
    w.u32(msg.params.bucket_count);
    w.u32(msg.params.bucket_load);
    w.u64(msg.params.bucket_seed);
  }
  return w.take();
}

inline HelloMessage decode_hello(const std::vector<uint8_t>& body) {
  detail::ByteReader r(body);
  HelloMessage msg;
  uint32_t n_len = r.u32();
  if (n_len == 0) {
    throw ProtocolError(AbortReason::malformed_frame, "empty modulus");
  }
  std::vector<uint8_t> n_bytes = r.bytes(n_len);
  msg.n = from_bytes_be(n_bytes);
  std::vector<uint8_t> cd = r.bytes(32);
  std::vector<uint8_t> sd = r.bytes(32);
  std::memcpy(msg.client_domain_digest.data(), cd.data(), 32);
  std::memcpy(msg.server_domain_digest.data(), sd.data(), 32);
  msg.option_count = r.u32();
  msg.params.guard_bits = r.u16();
  msg.params.hash_width = r.u16();
  uint8_t payload = r.u8();
  uint8_t bucketing = r.u8();
  if (payload > 1 || bucketing > 1) {
    throw ProtocolError(AbortReason::malformed_frame,
                        "flag byte is not 0 or 1");
  }
  msg.params.payload = payload == 1;
  msg.params.bucketing = bucketing == 1;
  if (msg.params.bucketing) {
    msg.params.bucket_count = r.u32();
    msg.params.bucket_load = r.u32();
    msg.params.bucket_seed = r.u64();
  }
  r.expect_done();
  return msg;
}

struct HelloAckMessage {
  uint32_t word_count;
};

inline std::vector<uint8_t> encode_hello_ack(const HelloAckMessage& msg) {
  detail::ByteWriter w;
  w.u32(msg.word_count);
  return w.take();
}

inline HelloAckMessage decode_hello_ack(const std::vector<uint8_t>& body) {
  detail::ByteReader r(body);
  HelloAckMessage msg;
  msg.word_count = r.u32();
  r.expect_done();
  return msg;
}

// ---- ciphertext payloads ----
// Every ciphertext is written as exactly ciphertext_width bytes, so frame
// sizes depend on counts and the key size, never on the encrypted values.

inline std::vector<uint8_t> encode_coeffs(const ClientRound1& round1,
                                          size_t ciphertext_width) {
  detail::ByteWriter w;
  w.u32(static_cast<uint32_t>(round1.polynomials.size()));
  for (const EncryptedPolynomial& poly : round1.polynomials) {
    w.u32(static_cast<uint32_t>(poly.coefficients.size()));
    for (const Ciphertext& c : poly.coefficients) {
      w.bytes(to_bytes_be(c.value, ciphertext_width));
    }
  }
  return w.take();
}

inline ClientRound1 decode_coeffs(const std::vector<uint8_t>& body,
                                  size_t ciphertext_width) {
  detail::ByteReader r(body);
  uint32_t poly_count = r.u32();
  ClientRound1 round1;
  for (uint32_t i = 0; i < poly_count; ++i) {
    uint32_t coeff_count = r.u32();
    if (static_cast<uint64_t>(coeff_count) * ciphertext_width >
        r.remaining()) {
      throw ProtocolError(AbortReason::malformed_frame,
                          "coefficient count exceeds the body");
    }
    EncryptedPolynomial poly;
    poly.coefficients.reserve(coeff_count);
    for (uint32_t j = 0; j < coeff_count; ++j) {
      poly.coefficients.push_back(
          Ciphertext{from_bytes_be(r.bytes(ciphertext_width))});
    }
    round1.polynomials.push_back(std::move(poly));
  }
  r.expect_done();
  return round1;
}

inline std::vector<uint8_t> encode_response(const ServerResponse& response,
                                            size_t ciphertext_width) {
  detail::ByteWriter w;
  w.u32(static_cast<uint32_t>(response.words.size()));
  for (const Ciphertext& c : response.words) {
    w.bytes(to_bytes_be(c.value, ciphertext_width));
  }
  return w.take();
}

inline ServerResponse decode_response(const std::vector<uint8_t>& body,
                                      size_t ciphertext_width) {
  detail::ByteReader r(body);
  uint32_t count = r.u32();
  if (static_cast<uint64_t>(count) * ciphertext_width != r.remaining()) {
    throw ProtocolError(AbortReason::malformed_frame,
                        "word count does not match the body size");
  }
  ServerResponse response;
  response.words.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    response.words.push_back(Ciphertext{from_bytes_be(r.bytes(ciphertext_width))});
  }
  return response;
}

// ---- close / abort ----

inline std::vector<uint8_t> encode_close(uint8_t reason = 0) {
  return {reason};
}

inline uint8_t decode_close(const std::vector<uint8_t>& body) {
  detail::ByteReader r(body);
  uint8_t reason = r.u8();
  r.expect_done();
  return reason;
}

inline std::vector<uint8_t> encode_abort(AbortReason reason) {
  return {static_cast<uint8_t>(reason)};
}

inline AbortReason decode_abort(const std::vector<uint8_t>& body) {
  detail::ByteReader r(body);
  uint8_t reason = r.u8();
  r.expect_done();
  return static_cast<AbortReason>(reason);
}

}  // namespace credmatch
