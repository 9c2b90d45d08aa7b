#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"

namespace credmatch {

using Sha256Digest = std::array<uint8_t, 32>;

inline Sha256Digest sha256(std::span<const uint8_t> data) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw Error("sha256: digest computation failed");
  }
  return out;
}

inline Sha256Digest sha256(const std::string& data) {
  return sha256(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(data.data()), data.size()));
}

inline std::string digest_hex(const Sha256Digest& d) {
  static const char* alphabet = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (uint8_t b : d) {
    out.push_back(alphabet[b >> 4]);
    out.push_back(alphabet[b & 0xf]);
  }
  return out;
}

// Leading width bits of SHA-256(input), as an integer < 2^width.
inline mpz_class truncated_sha256(std::span<const uint8_t> input,
                                  unsigned width) {
  if (width == 0 || width > 256) {
    throw Error("truncated_sha256: width must be in [1, 256]");
  }
  Sha256Digest d = sha256(input);
  mpz_class v = from_bytes_be(std::span<const uint8_t>(d.data(), (width + 7) / 8));
  size_t excess = ((width + 7) / 8) * 8 - width;
  if (excess > 0) v >>= excess;
  return v;
}

}  // namespace credmatch
