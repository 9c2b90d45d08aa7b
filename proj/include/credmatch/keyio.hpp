#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/paillier.hpp"

namespace credmatch {

// Key files are JSON objects with lowercase big-endian hex fields:
//   private: {"n", "p", "q", "lambda", "mu"}
//   public:  {"n"}

inline std::string private_key_json(const PaillierKeypair& kp) {
  nlohmann::ordered_json j;
  j["n"] = to_hex(kp.pub.n);
  j["p"] = to_hex(kp.priv.p);
  j["q"] = to_hex(kp.priv.q);
  j["lambda"] = to_hex(kp.priv.lambda);
  j["mu"] = to_hex(kp.priv.mu);
  return j.dump(2) + "\n";
}

inline std::string public_key_json(const PaillierPublicKey& pk) {
  nlohmann::ordered_json j;
  j["n"] = to_hex(pk.n);
  return j.dump(2) + "\n";
}

namespace detail {

inline nlohmann::json parse_key_json(const std::string& text,
                                     const std::string& origin) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("key file is not a JSON object: " + origin);
  }
  return j;
}

inline mpz_class hex_field(const nlohmann::json& j, const char* field,
                           const std::string& origin) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw ConfigError("key file missing hex field '" + std::string(field) +
                      "': " + origin);
  }
  return from_hex(j[field].get<std::string>());
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Rebuilds the keypair from the stored primes and cross-checks the stored
// lambda/mu against the recomputation, so a corrupted file fails loudly.
inline PaillierKeypair parse_private_key(const std::string& text,
                                         const std::string& origin = "<text>") {
  nlohmann::json j = detail::parse_key_json(text, origin);
  mpz_class p = detail::hex_field(j, "p", origin);
  mpz_class q = detail::hex_field(j, "q", origin);
  PaillierKeypair kp = keypair_from_primes(p, q);
  if (detail::hex_field(j, "n", origin) != kp.pub.n ||
      detail::hex_field(j, "lambda", origin) != kp.priv.lambda ||
      detail::hex_field(j, "mu", origin) != kp.priv.mu) {
    throw ConfigError("key file fields are inconsistent: " + origin);
  }
  return kp;
}

// Accepts a public-only file or a full private file.
inline PaillierPublicKey parse_public_key(const std::string& text,
                                          const std::string& origin = "<text>") {
  nlohmann::json j = detail::parse_key_json(text, origin);
  return PaillierPublicKey::from_modulus(detail::hex_field(j, "n", origin));
}

inline PaillierKeypair load_private_key(const std::string& path) {
  return parse_private_key(detail::slurp(path), path);
}

inline PaillierPublicKey load_public_key(const std::string& path) {
  return parse_public_key(detail::slurp(path), path);
}

}  // namespace credmatch
