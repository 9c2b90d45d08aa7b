#pragma once

#include <gmp.h>
#include <gmpxx.h>
#include <sys/random.h>

#include <cstdint>
#include <utility>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"

namespace credmatch {

// Randomness source backing key generation, encryption nonces, masks and
// shuffles. One GMP generator state per instance; the default constructor
// seeds it with 256 bits from the operating system, the explicit-seed
// constructors give reproducible streams for tests and replays.
class Rng {
public:
  Rng() {
    uint8_t seed_bytes[32];
    size_t got = 0;
    while (got < sizeof(seed_bytes)) {
      ssize_t r = ::getrandom(seed_bytes + got, sizeof(seed_bytes) - got, 0);
      if (r < 0) throw Error("rng: getrandom failed");
      got += static_cast<size_t>(r);
    }
    init(from_bytes_be(seed_bytes));
  }

  explicit Rng(const mpz_class& seed) { init(seed); }
  explicit Rng(uint64_t seed) { init(from_u64(seed)); }

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;

  Rng(Rng&& other) noexcept : valid_(other.valid_) {
    if (valid_) {
      state_[0] = other.state_[0];
      other.valid_ = false;
    }
  }

  Rng& operator=(Rng&& other) noexcept {
    if (this != &other) {
      clear();
      valid_ = other.valid_;
      if (valid_) {
        state_[0] = other.state_[0];
        other.valid_ = false;
      }
    }
    return *this;
  }

  ~Rng() { clear(); }

  // Uniform in [0, 2^bit_count).
  mpz_class bits(size_t bit_count) {
    mpz_class out;
    if (bit_count > 0) {
      mpz_urandomb(out.get_mpz_t(), state_, bit_count);
    }
    return out;
  }

  // Uniform in [0, bound), bound > 0.
  mpz_class below(const mpz_class& bound) {
    if (bound <= 0) throw Error("rng: bound must be positive");
    mpz_class out;
    mpz_urandomm(out.get_mpz_t(), state_, bound.get_mpz_t());
    return out;
  }

  uint64_t below_u64(uint64_t bound) {
    mpz_class v = below(from_u64(bound));
    return mpz_get_ui(v.get_mpz_t());
  }

  // Independent child stream, derived deterministically from this one.
  Rng fork() { return Rng(bits(256)); }

private:
  void init(const mpz_class& seed) {
    gmp_randinit_mt(state_);
    gmp_randseed(state_, seed.get_mpz_t());
    valid_ = true;
  }

  void clear() {
    if (valid_) {
      gmp_randclear(state_);
      valid_ = false;
    }
  }

  gmp_randstate_t state_;
  bool valid_ = false;
};

}  // namespace credmatch
