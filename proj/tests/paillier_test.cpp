#include "credmatch/paillier.hpp"

#include <gtest/gtest.h>

#include <thread>
#include <vector>

#include "credmatch/keyio.hpp"

using namespace credmatch;

namespace {

// n = 35 toy keypair used by the deterministic vectors.
PaillierKeypair tiny_keypair() { return keypair_from_primes_unchecked(5, 7); }

TEST(PaillierKeygen, TinyPrimeVector) {
  PaillierKeypair kp = tiny_keypair();
  EXPECT_EQ(kp.pub.n, 35);
  EXPECT_EQ(kp.pub.n_squared, 1225);
  EXPECT_EQ(kp.pub.g, 36);

  // Independent oracle: direct modular arithmetic on the definitions.
  mpz_class lambda = lcm(5 - 1, 7 - 1);
  mpz_class mu = invmod(detail::ell(powm(36, lambda, 1225), 35), 35);
  EXPECT_EQ(lambda, 12);
  EXPECT_EQ(mu, 3);
  EXPECT_EQ(kp.priv.lambda, lambda);
  EXPECT_EQ(kp.priv.mu, mu);
}

TEST(PaillierKeygen, GeneratedKeySatisfiesInvariants) {
  Rng rng(42);
  PaillierKeypair kp = keygen(128, rng);
  EXPECT_TRUE(is_probable_prime(kp.priv.p));
  EXPECT_TRUE(is_probable_prime(kp.priv.q));
  EXPECT_NE(kp.priv.p, kp.priv.q);
  EXPECT_EQ(kp.pub.n, kp.priv.p * kp.priv.q);
  EXPECT_EQ(kp.pub.n_squared, kp.pub.n * kp.pub.n);
  EXPECT_EQ(kp.pub.g, kp.pub.n + 1);
  EXPECT_EQ(gcd(kp.pub.n, (kp.priv.p - 1) * (kp.priv.q - 1)), 1);
  EXPECT_EQ(kp.priv.lambda, lcm(kp.priv.p - 1, kp.priv.q - 1));
  // mu * L(g^lambda mod n^2) = 1 mod n
  mpz_class l = detail::ell(powm(kp.pub.g, kp.priv.lambda, kp.pub.n_squared),
                            kp.pub.n);
  EXPECT_EQ(mod(kp.priv.mu * l, kp.pub.n), 1);
  size_t nbits = bit_length(kp.pub.n);
  EXPECT_GE(nbits, 128u);
  EXPECT_LE(nbits, 129u);
}

TEST(PaillierKeygen, RequestedSizesLand) {
  Rng rng(7);
  for (unsigned bits : {64u, 65u, 127u, 512u}) {
    PaillierKeypair kp = keygen(bits, rng);
    size_t nbits = bit_length(kp.pub.n);
    EXPECT_GE(nbits, bits);
    EXPECT_LE(nbits, bits + 1);
  }
}

TEST(PaillierKeygen, ProductionSize) {
  Rng rng(1);
  PaillierKeypair kp = keygen(2048, rng);
  size_t nbits = bit_length(kp.pub.n);
  EXPECT_GE(nbits, 2048u);
  EXPECT_LE(nbits, 2049u);
}

TEST(PaillierKeygen, RejectsTinyRequests) {
  Rng rng(3);
  EXPECT_THROW(keygen(32, rng), Error);
  EXPECT_THROW(keygen(63, rng), Error);
}

TEST(PaillierKeygen, ReentrantAcrossThreads) {
  PaillierKeypair a, b;
  std::thread ta([&] {
    Rng rng(100);
    a = keygen(128, rng);
  });
  std::thread tb([&] {
    Rng rng(200);
    b = keygen(128, rng);
  });
  ta.join();
  tb.join();
  EXPECT_NE(a.pub.n, b.pub.n);
  Rng rng(5);
  EXPECT_EQ(decrypt(a.priv, a.pub, encrypt(a.pub, 17, rng)), 17);
  EXPECT_EQ(decrypt(b.priv, b.pub, encrypt(b.pub, 17, rng)), 17);
}

TEST(PaillierEncrypt, FixedNonceVector) {
  PaillierKeypair kp = tiny_keypair();
  // Oracle: 36^7 * 3^35 mod 1225 by direct modular exponentiation.
  mpz_class expected = mod(powm(36, 7, 1225) * powm(3, 35, 1225), 1225);
  EXPECT_EQ(expected, 1097);
  Ciphertext c = encrypt_with_nonce(kp.pub, 7, 3);
  EXPECT_EQ(c.value, 1097);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, c), 7);
}

TEST(PaillierEncrypt, ZeroRoundtrips) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(9);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, encrypt(kp.pub, 0, rng)), 0);
}

TEST(PaillierEncrypt, RejectsOutOfRangePlaintext) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(9);
  EXPECT_THROW(encrypt(kp.pub, kp.pub.n, rng), Error);
  EXPECT_THROW(encrypt(kp.pub, -1, rng), Error);
}

TEST(PaillierDecrypt, EdgePlaintextsRoundtrip) {
  Rng rng(11);
  PaillierKeypair kp = keygen(128, rng);
  for (const mpz_class& m :
       {mpz_class(0), mpz_class(1), mpz_class(kp.pub.n - 1)}) {
    EXPECT_EQ(decrypt(kp.priv, kp.pub, encrypt(kp.pub, m, rng)), m);
  }
}

TEST(PaillierDecrypt, RejectsCiphertextSharingFactorWithN) {
  PaillierKeypair kp = tiny_keypair();
  EXPECT_THROW(decrypt(kp.priv, kp.pub, Ciphertext{5}), Error);
  EXPECT_THROW(decrypt(kp.priv, kp.pub, Ciphertext{35}), Error);
}

TEST(PaillierDecrypt, RejectsOutOfRangeValues) {
  PaillierKeypair kp = tiny_keypair();
  EXPECT_THROW(decrypt(kp.priv, kp.pub, Ciphertext{0}), Error);
  EXPECT_THROW(decrypt(kp.priv, kp.pub, Ciphertext{1225}), Error);
  EXPECT_THROW(decrypt(kp.priv, kp.pub, Ciphertext{-3}), Error);
}

TEST(PaillierHomomorphism, AddSmallVectors) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(13);
  Ciphertext c3 = encrypt(kp.pub, 3, rng);
  Ciphertext c4 = encrypt(kp.pub, 4, rng);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, add_ciphertexts(kp.pub, c3, c4)), 7);

  Ciphertext zero = encrypt(kp.pub, 0, rng);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, add_ciphertexts(kp.pub, c3, zero)), 3);

  Ciphertext top = encrypt(kp.pub, kp.pub.n - 1, rng);
  Ciphertext one = encrypt(kp.pub, 1, rng);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, add_ciphertexts(kp.pub, top, one)), 0);
}

TEST(PaillierHomomorphism, ScalarSmallVectors) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(17);
  Ciphertext c5 = encrypt(kp.pub, 5, rng);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, scalar_mul(kp.pub, c5, 3)), 15);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, scalar_mul(kp.pub, c5, 0)), 0);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, scalar_mul(kp.pub, c5, 1)), 5);
  EXPECT_THROW(scalar_mul(kp.pub, c5, kp.pub.n), Error);
}

TEST(PaillierHomomorphism, RandomizedLaws) {
  Rng rng(19);
  PaillierKeypair kp = keygen(256, rng);
  for (int i = 0; i < 200; ++i) {
    mpz_class m1 = rng.below(kp.pub.n);
    mpz_class m2 = rng.below(kp.pub.n);
    mpz_class k = rng.below(kp.pub.n);
    Ciphertext c1 = encrypt(kp.pub, m1, rng);
    EXPECT_EQ(decrypt(kp.priv, kp.pub, c1), m1);
    Ciphertext sum =
        add_ciphertexts(kp.pub, c1, encrypt(kp.pub, m2, rng));
    EXPECT_EQ(decrypt(kp.priv, kp.pub, sum), mod(m1 + m2, kp.pub.n));
    EXPECT_EQ(decrypt(kp.priv, kp.pub, scalar_mul(kp.pub, c1, k)),
              mod(k * m1, kp.pub.n));
  }
}

TEST(PaillierRerandomize, PreservesPlaintextChangesValue) {
  Rng rng(23);
  PaillierKeypair kp = keygen(128, rng);
  Ciphertext c = encrypt(kp.pub, 9, rng);
  Ciphertext r1 = rerandomize(kp.pub, c, rng);
  Ciphertext r2 = rerandomize(kp.pub, c, rng);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, r1), 9);
  EXPECT_EQ(decrypt(kp.priv, kp.pub, r2), 9);
  EXPECT_NE(r1.value, c.value);
  EXPECT_NE(r1.value, r2.value);
}

TEST(PaillierRerandomize, IdentityNonceLeavesValue) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(29);
  Ciphertext c = encrypt(kp.pub, 9, rng);
  EXPECT_EQ(rerandomize_with_nonce(kp.pub, c, 1).value, c.value);
}

TEST(PaillierCounter, CountsEncryptAndScalarMulOnly) {
  PaillierKeypair kp = tiny_keypair();
  Rng rng(31);
  OpCounter counter;
  Ciphertext c = encrypt(kp.pub, 5, rng, &counter);
  EXPECT_EQ(counter.encryptions.load(), 1u);
  EXPECT_EQ(counter.scalar_muls.load(), 0u);

  scalar_mul(kp.pub, c, 3, &counter);
  scalar_mul(kp.pub, c, 0, &counter);
  EXPECT_EQ(counter.scalar_muls.load(), 2u);
  EXPECT_EQ(counter.encryptions.load(), 1u);

  // add, decrypt and rerandomize are not exponentiation-counted ops.
  add_ciphertexts(kp.pub, c, c);
  decrypt(kp.priv, kp.pub, c);
  rerandomize(kp.pub, c, rng);
  EXPECT_EQ(counter.total(), 3u);

  encrypt(kp.pub, 6, rng, &counter);
  EXPECT_EQ(counter.total(), 4u);
}

TEST(PaillierConcurrency, SharedKeyAndCounterAcrossThreads) {
  Rng seed_rng(37);
  PaillierKeypair kp = keygen(128, seed_rng);
  OpCounter counter;
  constexpr int kThreads = 4;
  constexpr int kPerThread = 25;
  std::vector<std::thread> workers;
  std::atomic<int> failures{0};
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      Rng rng(1000 + t);
      for (int i = 0; i < kPerThread; ++i) {
        mpz_class m = rng.below(kp.pub.n);
        Ciphertext c = encrypt(kp.pub, m, rng, &counter);
        if (decrypt(kp.priv, kp.pub, c) != m) failures.fetch_add(1);
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(counter.encryptions.load(), kThreads * kPerThread);
}

TEST(KeyIo, PrivateRoundtrip) {
  Rng rng(41);
  PaillierKeypair kp = keygen(128, rng);
  std::string text = private_key_json(kp);
  PaillierKeypair back = parse_private_key(text);
  EXPECT_EQ(back.pub.n, kp.pub.n);
  EXPECT_EQ(back.priv.p, kp.priv.p);
  EXPECT_EQ(back.priv.q, kp.priv.q);
  EXPECT_EQ(back.priv.lambda, kp.priv.lambda);
  EXPECT_EQ(back.priv.mu, kp.priv.mu);
}

TEST(KeyIo, PublicExportOmitsTrapdoor) {
  Rng rng(43);
  PaillierKeypair kp = keygen(128, rng);
  std::string text = public_key_json(kp.pub);
  auto j = nlohmann::json::parse(text);
  EXPECT_TRUE(j.contains("n"));
  EXPECT_FALSE(j.contains("p"));
  EXPECT_FALSE(j.contains("q"));
  EXPECT_FALSE(j.contains("lambda"));
  EXPECT_FALSE(j.contains("mu"));
  EXPECT_EQ(parse_public_key(text).n, kp.pub.n);
  // Hex fields are lowercase.
  std::string nhex = j["n"].get<std::string>();
  EXPECT_EQ(nhex.find_first_of("ABCDEF"), std::string::npos);
}

TEST(KeyIo, PublicParseAcceptsPrivateFile) {
  Rng rng(47);
  PaillierKeypair kp = keygen(128, rng);
  EXPECT_EQ(parse_public_key(private_key_json(kp)).n, kp.pub.n);
}

TEST(KeyIo, TamperedFileRejected) {
  Rng rng(53);
  PaillierKeypair kp = keygen(128, rng);
  auto j = nlohmann::json::parse(private_key_json(kp));
  j["lambda"] = to_hex(from_hex(j["lambda"].get<std::string>()) + 2);
  EXPECT_THROW(parse_private_key(j.dump()), ConfigError);

  auto j2 = nlohmann::json::parse(private_key_json(kp));
  j2.erase("mu");
  EXPECT_THROW(parse_private_key(j2.dump()), ConfigError);

  EXPECT_THROW(parse_private_key("not json"), ConfigError);
}

TEST(KeyIo, RejectsKeysBelowMinimumSize) {
  PaillierKeypair tiny = tiny_keypair();
  EXPECT_THROW(parse_private_key(private_key_json(tiny)), Error);
}

}  // namespace
