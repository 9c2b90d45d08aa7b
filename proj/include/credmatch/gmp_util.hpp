#pragma once

#include <gmp.h>
#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "credmatch/error.hpp"

namespace credmatch {

inline size_t bit_length(const mpz_class& v) {
  if (v == 0) return 0;
  return mpz_sizeinbase(v.get_mpz_t(), 2);
}

inline mpz_class powm(const mpz_class& base, const mpz_class& exp,
                      const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

// Exponentiation with a resilient memory-access pattern (mpz_powm_sec),
// used wherever base or exponent is secret. Requires exp > 0 and mod odd;
// callers fall back to powm for the excluded cases.
inline mpz_class powm_sec(const mpz_class& base, const mpz_class& exp,
                          const mpz_class& mod) {
  if (exp <= 0 || mpz_even_p(mod.get_mpz_t())) return powm(base, exp, mod);
  mpz_class out;
  mpz_powm_sec(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(),
               mod.get_mpz_t());
  return out;
}

inline mpz_class gcd(const mpz_class& a, const mpz_class& b) {
  mpz_class out;
  mpz_gcd(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

inline mpz_class lcm(const mpz_class& a, const mpz_class& b) {
  mpz_class out;
  mpz_lcm(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

inline mpz_class invmod(const mpz_class& v, const mpz_class& mod) {
  mpz_class out;
  if (mpz_invert(out.get_mpz_t(), v.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw Error("invmod: value is not invertible modulo the given modulus");
  }
  return out;
}

// Non-negative remainder, unlike operator% which follows the dividend sign.
inline mpz_class mod(const mpz_class& v, const mpz_class& m) {
  mpz_class out;
  mpz_mod(out.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t());
  return out;
}

// Composite error below 4^-reps; reps = 40 keeps it under 2^-80.
inline bool is_probable_prime(const mpz_class& v, int reps = 40) {
  return mpz_probab_prime_p(v.get_mpz_t(), reps) != 0;
}

inline std::string to_hex(const mpz_class& v) {
  if (v < 0) throw Error("to_hex: negative value");
  char* s = mpz_get_str(nullptr, 16, v.get_mpz_t());
  std::string out(s);
  void (*freefunc)(void*, size_t);
  mp_get_memory_functions(nullptr, nullptr, &freefunc);
  freefunc(s, out.size() + 1);
  return out;
}

inline mpz_class from_hex(const std::string& s) {
  if (s.empty()) throw Error("from_hex: empty string");
  mpz_class out;
  if (mpz_set_str(out.get_mpz_t(), s.c_str(), 16) != 0 || out < 0) {
    throw Error("from_hex: invalid hexadecimal string '" + s + "'");
  }
  return out;
}

// Big-endian byte export, left-padded with zeros to pad_to when given.
inline std::vector<uint8_t> to_bytes_be(const mpz_class& v, size_t pad_to = 0) {
  if (v < 0) throw Error("to_bytes_be: negative value");
  size_t count = (bit_length(v) + 7) / 8;
  if (pad_to != 0 && count > pad_to) {
    throw Error("to_bytes_be: value wider than the requested padding");
  }
  size_t total = pad_to != 0 ? pad_to : count;
  std::vector<uint8_t> out(total, 0);
  if (v != 0) {
    size_t written = 0;
    mpz_export(out.data() + (total - count), &written, 1, 1, 1, 0,
               v.get_mpz_t());
  }
  return out;
}

inline mpz_class from_bytes_be(std::span<const uint8_t> bytes) {
  mpz_class out;
  if (!bytes.empty()) {
    mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return out;
}

inline mpz_class from_u64(uint64_t v) {
  mpz_class out(static_cast<unsigned long>(v >> 32));
  out <<= 32;
  out |= mpz_class(static_cast<unsigned long>(v & 0xffffffffull));
  return out;
}

// 2^k as an mpz.
inline mpz_class pow2(size_t k) {
  mpz_class out;
  mpz_setbit(out.get_mpz_t(), k);
  return out;
}

}  // namespace credmatch
