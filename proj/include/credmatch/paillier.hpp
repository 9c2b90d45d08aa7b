#pragma once

#include <atomic>
#include <cstdint>
#include <utility>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/rng.hpp"

namespace credmatch {

// Counts the modular exponentiations a party performs. Sessions own one
// accumulator each; increments are atomic so parallel rule evaluation can
// share it. encrypt counts its r^n power, scalar_mul counts its c^k power;
// g^m never costs an exponentiation because g = n + 1.
struct OpCounter {
  std::atomic<uint64_t> encryptions{0};
  std::atomic<uint64_t> scalar_muls{0};

  uint64_t total() const {
    return encryptions.load(std::memory_order_relaxed) +
           scalar_muls.load(std::memory_order_relaxed);
  }
};

inline constexpr unsigned kMinKeyBits = 64;
inline constexpr unsigned kDefaultKeyBits = 2048;

struct PaillierPublicKey {
  mpz_class n;          // p * q, the plaintext modulus
  mpz_class n_squared;  // ciphertext modulus
  mpz_class g;          // fixed to n + 1

  static PaillierPublicKey from_modulus(mpz_class modulus) {
    if (modulus <= 1) throw Error("paillier: modulus must exceed 1");
    PaillierPublicKey pk;
    pk.n = std::move(modulus);
    pk.n_squared = pk.n * pk.n;
    pk.g = pk.n + 1;
    return pk;
  }

  unsigned bits() const { return static_cast<unsigned>(bit_length(n)); }

  // Serialized width of one ciphertext value under this key.
  size_t ciphertext_bytes() const { return (bit_length(n_squared) + 7) / 8; }
};

struct PaillierPrivateKey {
  mpz_class p;
  mpz_class q;
  mpz_class lambda;  // lcm(p-1, q-1)
  mpz_class mu;      // L(g^lambda mod n^2)^-1 mod n
};

struct PaillierKeypair {
  PaillierPublicKey pub;
  PaillierPrivateKey priv;
};

struct Ciphertext {
  mpz_class value;  // element of Z*_{n^2}
};

namespace detail {

// L(u) = (u - 1) / n; defined on u = 1 mod n.
inline mpz_class ell(const mpz_class& u, const mpz_class& n) {
  mpz_class t = u - 1;
  return t / n;
}

inline void check_ciphertext(const PaillierPublicKey& pk, const Ciphertext& c) {
  if (c.value <= 0 || c.value >= pk.n_squared) {
    throw Error("paillier: ciphertext out of range");
  }
}

// Builds the full keypair from a candidate prime pair, enforcing the type
// invariants. Callers own the size policy.
inline PaillierKeypair keypair_from_prime_pair(const mpz_class& p,
                                               const mpz_class& q) {
  if (p == q) throw Error("paillier: p and q must be distinct");
  if (!is_probable_prime(p) || !is_probable_prime(q)) {
    throw Error("paillier: p and q must both be prime");
  }
  mpz_class n = p * q;
  if (gcd(n, (p - 1) * (q - 1)) != 1) {
    throw Error("paillier: gcd(pq, (p-1)(q-1)) must be 1");
  }
  PaillierKeypair kp;
  kp.pub = PaillierPublicKey::from_modulus(n);
  kp.priv.p = p;
  kp.priv.q = q;
  kp.priv.lambda = lcm(p - 1, q - 1);
  // mu = L(g^lambda mod n^2)^-1 mod n
  mpz_class glam = powm(kp.pub.g, kp.priv.lambda, kp.pub.n_squared);
  kp.priv.mu = invmod(ell(glam, kp.pub.n), kp.pub.n);
  return kp;
}

// Random prime with the top two bits set, so products of two equal-width
// primes land in the intended bit range.
inline mpz_class random_prime(size_t prime_bits, Rng& rng) {
  if (prime_bits < 3) throw Error("paillier: prime width too small");
  for (;;) {
    mpz_class cand = rng.bits(prime_bits);
    mpz_setbit(cand.get_mpz_t(), prime_bits - 1);
    mpz_setbit(cand.get_mpz_t(), prime_bits - 2);
    mpz_setbit(cand.get_mpz_t(), 0);
    if (is_probable_prime(cand)) return cand;
  }
}

}  // namespace detail

// Uniform r in [1, n) with gcd(r, n) = 1; the retry loop fires with
// probability ~ (p + q) / n.
inline mpz_class sample_unit(const PaillierPublicKey& pk, Rng& rng) {
  for (;;) {
    mpz_class r = rng.below(pk.n);
    if (r != 0 && gcd(r, pk.n) == 1) return r;
  }
}

inline PaillierKeypair keygen(unsigned key_size_bits, Rng& rng) {
  if (key_size_bits < kMinKeyBits) {
    throw Error("paillier: key size below the 64-bit minimum");
  }
  size_t prime_bits = (key_size_bits + 1) / 2;
  for (;;) {
    mpz_class p = detail::random_prime(prime_bits, rng);
    mpz_class q = detail::random_prime(prime_bits, rng);
    if (p == q) continue;
    mpz_class n = p * q;
    size_t nbits = bit_length(n);
    if (nbits < key_size_bits || nbits > key_size_bits + 1) continue;
    if (gcd(n, (p - 1) * (q - 1)) != 1) continue;
    return detail::keypair_from_prime_pair(p, q);
  }
}

// Reconstructs a keypair from stored primes (key files). Enforces the
// generation-time minimum size on top of the keypair invariants.
inline PaillierKeypair keypair_from_primes(const mpz_class& p,
                                           const mpz_class& q) {
  PaillierKeypair kp = detail::keypair_from_prime_pair(p, q);
  if (kp.pub.bits() < kMinKeyBits) {
    throw Error("paillier: stored key is below the 64-bit minimum");
  }
  return kp;
}

namespace detail {

inline Ciphertext encrypt_with_unit(const PaillierPublicKey& pk,
                                    const mpz_class& m, const mpz_class& r,
                                    OpCounter* counter) {
  // c = g^m * r^n mod n^2, with g^m = 1 + m*n since g = n + 1.
  mpz_class gm = mod(1 + m * pk.n, pk.n_squared);
  mpz_class rn = powm_sec(r, pk.n, pk.n_squared);
  if (counter != nullptr) {
    counter->encryptions.fetch_add(1, std::memory_order_relaxed);
  }
  return Ciphertext{mod(gm * rn, pk.n_squared)};
}

}  // namespace detail

inline Ciphertext encrypt(const PaillierPublicKey& pk, const mpz_class& m,
                          Rng& rng, OpCounter* counter = nullptr) {
  if (m < 0 || m >= pk.n) throw Error("paillier: plaintext out of range");
  return detail::encrypt_with_unit(pk, m, sample_unit(pk, rng), counter);
}

inline mpz_class decrypt(const PaillierPrivateKey& sk,
                         const PaillierPublicKey& pk, const Ciphertext& c) {
  detail::check_ciphertext(pk, c);
  if (gcd(c.value, pk.n) != 1) {
    throw Error("paillier: malformed ciphertext shares a factor with n");
  }
  // m = L(c^lambda mod n^2) * mu mod n
  mpz_class u = powm_sec(c.value, sk.lambda, pk.n_squared);
  return mod(detail::ell(u, pk.n) * sk.mu, pk.n);
}

// Dec(result) = Dec(c1) + Dec(c2) mod n.
inline Ciphertext add_ciphertexts(const PaillierPublicKey& pk,
                                  const Ciphertext& c1, const Ciphertext& c2) {
  detail::check_ciphertext(pk, c1);
  detail::check_ciphertext(pk, c2);
  return Ciphertext{mod(c1.value * c2.value, pk.n_squared)};
}

// Dec(result) = k * Dec(c) mod n.
inline Ciphertext scalar_mul(const PaillierPublicKey& pk, const Ciphertext& c,
                             const mpz_class& k, OpCounter* counter = nullptr) {
  detail::check_ciphertext(pk, c);
  if (k < 0 || k >= pk.n) throw Error("paillier: scalar out of range");
  if (counter != nullptr) {
    counter->scalar_muls.fetch_add(1, std::memory_order_relaxed);
  }
  if (k == 0) return Ciphertext{1};
  return Ciphertext{powm_sec(c.value, k, pk.n_squared)};
}

// Fresh encryption of the same plaintext: c * r^n mod n^2.
inline Ciphertext rerandomize(const PaillierPublicKey& pk, const Ciphertext& c,
                              Rng& rng) {
  detail::check_ciphertext(pk, c);
  mpz_class rn = powm_sec(sample_unit(pk, rng), pk.n, pk.n_squared);
  return Ciphertext{mod(c.value * rn, pk.n_squared)};
}

#ifdef CREDMATCH_ENABLE_TEST_HOOKS
// Deterministic-vector hooks. Compiled only into test targets; release
// builds have no way to inject primes below the size floor or fixed nonces.

inline PaillierKeypair keypair_from_primes_unchecked(const mpz_class& p,
                                                     const mpz_class& q) {
  return detail::keypair_from_prime_pair(p, q);
}

inline Ciphertext encrypt_with_nonce(const PaillierPublicKey& pk,
                                     const mpz_class& m, const mpz_class& r,
                                     OpCounter* counter = nullptr) {
  if (m < 0 || m >= pk.n) throw Error("paillier: plaintext out of range");
  if (r <= 0 || r >= pk.n || gcd(r, pk.n) != 1) {
    throw Error("paillier: nonce must be a unit in [1, n)");
  }
  return detail::encrypt_with_unit(pk, m, r, counter);
}

inline Ciphertext rerandomize_with_nonce(const PaillierPublicKey& pk,
                                         const Ciphertext& c,
                                         const mpz_class& r) {
  detail::check_ciphertext(pk, c);
  if (r <= 0 || r >= pk.n || gcd(r, pk.n) != 1) {
    throw Error("paillier: nonce must be a unit in [1, n)");
  }
  mpz_class rn = powm_sec(r, pk.n, pk.n_squared);
  return Ciphertext{mod(c.value * rn, pk.n_squared)};
}
#endif  // CREDMATCH_ENABLE_TEST_HOOKS

}  // namespace credmatch
