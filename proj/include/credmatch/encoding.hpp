#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/hash.hpp"
#include "credmatch/paillier.hpp"

namespace credmatch {

enum class Side : uint8_t { client, server };

inline const char* side_name(Side s) {
  return s == Side::client ? "client" : "server";
}

inline constexpr size_t kMaxDomainNames = 255;
inline constexpr unsigned kMinGuardBits = 40;

// An ordered list of credential names. The position of a name is the bit it
// occupies in option codes, so both parties must load byte-identical domain
// files; the digest over the raw file bytes is exchanged in the handshake.
class CredentialDomain {
public:
  static CredentialDomain from_json_text(Side side, const std::string& text,
                                         const std::string& origin = "<text>") {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
      throw ConfigError("domain file is not a JSON list of names: " + origin);
    }
    std::vector<std::string> names;
    for (const auto& entry : j) {
      if (!entry.is_string()) {
        throw ConfigError("domain file has a non-string entry: " + origin);
      }
      names.push_back(entry.get<std::string>());
    }
    return CredentialDomain(side, std::move(names), sha256(text), origin);
  }

  static CredentialDomain load_file(Side side, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open domain file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(side, ss.str(), path);
  }

  // For domains assembled in code; the digest covers the canonical dump.
  static CredentialDomain from_names(Side side,
                                     std::vector<std::string> names) {
    std::string canonical = nlohmann::json(names).dump();
    return CredentialDomain(side, std::move(names), sha256(canonical),
                            "<names>");
  }

  Side side() const { return side_; }
  const std::vector<std::string>& names() const { return names_; }
  unsigned bit_width() const { return static_cast<unsigned>(names_.size()); }
  const Sha256Digest& digest() const { return digest_; }

  std::optional<size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

private:
  CredentialDomain(Side side, std::vector<std::string> names,
                   Sha256Digest digest, const std::string& origin)
      : side_(side), names_(std::move(names)), digest_(digest) {
    if (names_.empty()) {
      throw ConfigError("domain has no credential names: " + origin);
    }
    if (names_.size() > kMaxDomainNames) {
      throw ConfigError("domain exceeds " + std::to_string(kMaxDomainNames) +
                        " credential names: " + origin);
    }
    for (size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) {
        throw ConfigError("domain has an empty credential name: " + origin);
      }
      if (!index_.emplace(names_[i], i).second) {
        throw ConfigError("duplicate credential name '" + names_[i] +
                          "': " + origin);
      }
    }
  }

  Side side_;
  std::vector<std::string> names_;
  Sha256Digest digest_;
  std::map<std::string, size_t> index_;
};

// One combination of credentials, encoded as sum of 2^i over the canonical
// indices of its members.
struct OptionCode {
  mpz_class value;

  bool operator==(const OptionCode& o) const { return value == o.value; }
  bool operator!=(const OptionCode& o) const { return value != o.value; }
  bool operator<(const OptionCode& o) const { return value < o.value; }
};

struct PayloadLayout {
  unsigned width_b;
  unsigned width_c;
  unsigned guard_bits;

  unsigned payload_bits() const { return width_b + width_c; }
};

inline OptionCode encode_option(const CredentialDomain& domain,
                                const std::vector<std::string>& subset) {
  if (subset.empty()) {
    throw ConfigError("option with zero credentials is not allowed");
  }
  mpz_class value;
  std::vector<std::string> unknown;
  for (const std::string& name : subset) {
    auto idx = domain.index_of(name);
    if (!idx) {
      unknown.push_back(name);
      continue;
    }
    if (mpz_tstbit(value.get_mpz_t(), *idx)) {
      throw ConfigError("credential '" + name + "' listed twice in one option");
    }
    mpz_setbit(value.get_mpz_t(), *idx);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown credential name(s) in " +
                      std::string(side_name(domain.side())) + " domain:";
    for (const std::string& n : unknown) msg += " '" + n + "'";
    throw ConfigError(msg);
  }
  return OptionCode{std::move(value)};
}

inline std::vector<std::string> decode_option(const CredentialDomain& domain,
                                              const OptionCode& code) {
  if (code.value < 0 || bit_length(code.value) > domain.bit_width()) {
    throw Error("option code out of range for a " +
                std::to_string(domain.bit_width()) + "-credential domain");
  }
  std::vector<std::string> out;
  for (size_t i = 0; i < domain.names().size(); ++i) {
    if (mpz_tstbit(code.value.get_mpz_t(), i)) out.push_back(domain.names()[i]);
  }
  return out;
}

// Packed payload word: c in the high field, b in the low field, guard band
// of zeros above both.
inline mpz_class pack_payload(const PayloadLayout& layout, const OptionCode& b,
                              const OptionCode& c) {
  if (b.value < 0 || bit_length(b.value) > layout.width_b) {
    throw Error("field b overflows its " + std::to_string(layout.width_b) +
                "-bit layout slot");
  }
  if (c.value < 0 || bit_length(c.value) > layout.width_c) {
    throw Error("field c overflows its " + std::to_string(layout.width_c) +
                "-bit layout slot");
  }
  return (c.value << layout.width_b) | b.value;
}

// Mask-then-shift inverse of pack_payload. A nonzero guard band means the
// word is masked garbage from a non-matching rule; reject is the normal
// outcome, not an error.
inline std::optional<std::pair<OptionCode, OptionCode>> unpack_payload(
    const PayloadLayout& layout, const mpz_class& m) {
  if (m < 0 || bit_length(m) > layout.payload_bits()) return std::nullopt;
  mpz_class b = m & (pow2(layout.width_b) - 1);
  mpz_class c = m >> layout.width_b;
  return std::make_pair(OptionCode{std::move(b)}, OptionCode{std::move(c)});
}

// Deterministic mapping of a code into hash_width bits, for domains whose
// bitmask width would not fit the modulus. Truncated SHA-256; collisions
// are accepted at the configured width.
inline OptionCode hash_map_element(const OptionCode& code,
                                   unsigned hash_width) {
  if (hash_width == 0 || hash_width > 256) {
    throw Error("hash width must be in [1, 256]");
  }
  std::vector<uint8_t> input;
  input.push_back(0x01);  // domain separation from the bucket hash
  std::vector<uint8_t> bytes = to_bytes_be(code.value);
  input.insert(input.end(), bytes.begin(), bytes.end());
  return OptionCode{truncated_sha256(input, hash_width)};
}

inline PayloadLayout validate_layout(const PaillierPublicKey& pk,
                                     const CredentialDomain& client_domain,
                                     const CredentialDomain& server_domain,
                                     unsigned guard_bits,
                                     unsigned hash_width = 0) {
  if (client_domain.side() != Side::client ||
      server_domain.side() != Side::server) {
    throw ConfigError("layout domains passed in the wrong order");
  }
  if (guard_bits < kMinGuardBits) {
    throw ConfigError("guard band below the " + std::to_string(kMinGuardBits) +
                      "-bit minimum");
  }
  if (hash_width > 256) {
    throw ConfigError("hash width must be in [0, 256]");
  }
  PayloadLayout layout;
  layout.width_b = hash_width > 0 ? hash_width : client_domain.bit_width();
  layout.width_c = server_domain.bit_width();
  layout.guard_bits = guard_bits;
  unsigned needed = layout.width_b + layout.width_c + layout.guard_bits;
  unsigned afforded = pk.bits() - 1;
  if (needed > afforded) {
    throw OverflowError(
        "payload layout needs " + std::to_string(needed) + " bits but a " +
        std::to_string(pk.bits()) + "-bit modulus affords " +
        std::to_string(afforded) + "; " + std::to_string(needed - afforded) +
        " bit(s) short");
  }
  return layout;
}

}  // namespace credmatch
