#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/paillier.hpp"
#include "credmatch/rng.hpp"

namespace credmatch {

// Coefficients of prod_i (x - roots[i]) over Z_n, ascending by degree. The
// leading coefficient is always 1, so the vector has degree() + 1 entries.
struct RootPolynomial {
  std::vector<mpz_class> coefficients;
  std::vector<mpz_class> roots;
  mpz_class modulus;

  size_t degree() const { return roots.size(); }
};

namespace detail {

inline RootPolynomial expand_root_poly(std::vector<mpz_class> roots,
                                       const mpz_class& n) {
  if (roots.empty()) throw Error("root polynomial needs at least one root");
  if (n < 2) throw Error("root polynomial modulus must be at least 2");
  for (const mpz_class& a : roots) {
    if (a < 0 || a >= n) throw Error("root out of range [0, n)");
  }
  std::vector<mpz_class> c(roots.size() + 1, mpz_class(0));
  c[0] = 1;
  size_t deg = 0;
  for (const mpz_class& a : roots) {
    ++deg;
    for (size_t i = deg; i > 0; --i) {
      c[i] = mod(c[i - 1] - a * c[i], n);
    }
    c[0] = mod(-a * c[0], n);
  }
  RootPolynomial poly;
  poly.coefficients = std::move(c);
  poly.roots = std::move(roots);
  poly.modulus = n;
  return poly;
}

}  // namespace detail

inline RootPolynomial build_root_poly(std::vector<mpz_class> roots,
                                      const mpz_class& n) {
  std::set<mpz_class> distinct(roots.begin(), roots.end());
  if (distinct.size() != roots.size()) {
    throw Error("root polynomial roots must be distinct");
  }
  return detail::expand_root_poly(std::move(roots), n);
}

// Same expansion without the distinctness requirement. Bucket padding
// repeats a reserved dummy root, which is fine: the polynomial still
// vanishes exactly on the multiset's elements.
inline RootPolynomial build_root_poly_multiset(std::vector<mpz_class> roots,
                                               const mpz_class& n) {
  return detail::expand_root_poly(std::move(roots), n);
}

inline mpz_class eval_plain(const RootPolynomial& poly, const mpz_class& x) {
  mpz_class xr = mod(x, poly.modulus);
  mpz_class acc = poly.coefficients.back();
  for (size_t i = poly.coefficients.size() - 1; i > 0; --i) {
    acc = mod(acc * xr + poly.coefficients[i - 1], poly.modulus);
  }
  return acc;
}

struct EncryptedPolynomial {
  std::vector<Ciphertext> coefficients;  // ascending by degree

  size_t degree() const { return coefficients.size() - 1; }
};

// Encrypts every coefficient under fresh randomness. Costs degree() + 1
// encryptions on the counter.
inline EncryptedPolynomial encrypt_polynomial(const PaillierPublicKey& pk,
                                              const RootPolynomial& poly,
                                              Rng& rng,
                                              OpCounter* counter = nullptr) {
  EncryptedPolynomial out;
  out.coefficients.reserve(poly.coefficients.size());
  for (const mpz_class& coeff : poly.coefficients) {
    out.coefficients.push_back(encrypt(pk, coeff, rng, counter));
  }
  return out;
}

// Homomorphic Horner evaluation: Enc(p(x)) from encrypted coefficients and a
// plaintext point. Exactly degree() scalar multiplications, independent of x.
inline Ciphertext eval_encrypted_horner(const PaillierPublicKey& pk,
                                        const EncryptedPolynomial& poly,
                                        const mpz_class& x,
                                        OpCounter* counter = nullptr) {
  if (poly.coefficients.empty()) {
    throw Error("encrypted polynomial has no coefficients");
  }
  mpz_class xr = mod(x, pk.n);
  Ciphertext acc = poly.coefficients.back();
  for (size_t i = poly.coefficients.size() - 1; i > 0; --i) {
    acc = add_ciphertexts(pk, scalar_mul(pk, acc, xr, counter),
                          poly.coefficients[i - 1]);
  }
  return acc;
}

}  // namespace credmatch
