#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "credmatch/encoding.hpp"
#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/hash.hpp"
#include "credmatch/paillier.hpp"
#include "credmatch/polyeval.hpp"
#include "credmatch/rng.hpp"

namespace credmatch {

struct ClientPreferences {
  // Each entry is one acceptable credential combination.
  std::vector<std::vector<std::string>> options;
};

struct PolicyRule {
  std::vector<std::string> accept;    // client credentials this rule matches
  std::vector<std::string> disclose;  // server credentials offered in return
};

struct ServerPolicy {
  std::vector<PolicyRule> rules;
};

struct ProtocolParams {
  unsigned guard_bits = kMinGuardBits;
  unsigned hash_width = 0;  // 0 = raw bitmask codes
  bool payload = true;      // false = membership-only variant
  bool bucketing = false;
  uint32_t bucket_count = 0;  // 0 = derive from the option count
  uint32_t bucket_load = 0;
  uint64_t bucket_seed = 0;  // 0 = draw one at round 1
};

struct MatchAgreement {
  std::vector<std::string> client_option;
  std::vector<std::string> server_disclosure;  // empty in the plain variant

  bool operator==(const MatchAgreement& o) const {
    return client_option == o.client_option &&
           server_disclosure == o.server_disclosure;
  }
};

struct MatchResult {
  std::vector<MatchAgreement> agreements;  // sorted by code, deduplicated

  bool operator==(const MatchResult& o) const {
    return agreements == o.agreements;
  }
};

// The value a combination matches under: its option code, or its truncated
// hash when the domain is too wide for the modulus.
inline OptionCode match_key(const CredentialDomain& domain,
                            const std::vector<std::string>& names,
                            unsigned hash_width) {
  OptionCode code = encode_option(domain, names);
  return hash_width > 0 ? hash_map_element(code, hash_width) : code;
}

// ---- bucketing ----

struct BucketParams {
  uint32_t count;
  uint32_t load;
};

inline BucketParams choose_bucket_params(size_t s) {
  if (s == 0) throw Error("cannot pick bucket parameters for zero options");
  double ln_s = std::max(std::log(static_cast<double>(s)), 1.0);
  uint32_t count =
      s <= 2 ? 1
             : static_cast<uint32_t>(std::ceil(static_cast<double>(s) / ln_s));
  double lnln_s = std::max(std::log(ln_s), 0.0);
  uint32_t load = static_cast<uint32_t>(std::ceil(5.0 * lnln_s + 8.0));
  while (static_cast<uint64_t>(count) * load < s) ++load;
  return {count, load};
}

// Every bucket is padded to the same degree with this reserved root, so the
// transferred polynomials leak only (count, load), not the fill pattern.
inline mpz_class bucket_dummy_root(unsigned width_b) {
  return pow2(width_b) - 1;
}

inline uint32_t bucket_index(uint64_t seed, const mpz_class& key,
                             uint32_t bucket_count) {
  if (bucket_count == 0) throw Error("bucket count must be positive");
  std::vector<uint8_t> input;
  input.push_back(0x02);  // domain separation from the element hash
  for (int shift = 56; shift >= 0; shift -= 8) {
    input.push_back(static_cast<uint8_t>((seed >> shift) & 0xff));
  }
  std::vector<uint8_t> key_bytes = to_bytes_be(key);
  input.insert(input.end(), key_bytes.begin(), key_bytes.end());
  Sha256Digest digest = sha256(input);
  uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h = (h << 8) | digest[static_cast<size_t>(i)];
  return static_cast<uint32_t>(h % bucket_count);
}

// Distributes match keys into bucket_count root multisets of exactly
// bucket_load entries each, padding with the dummy root. Throws
// BucketOverflowError when some bucket draws more keys than it can hold;
// the caller retries under a fresh seed.
inline std::vector<std::vector<mpz_class>> bucketize_roots(
    const std::vector<mpz_class>& keys, unsigned width_b,
    uint32_t bucket_count, uint32_t bucket_load, uint64_t seed) {
  if (bucket_count == 0 || bucket_load == 0) {
    throw Error("bucket shape must be positive in both dimensions");
  }
  if (static_cast<uint64_t>(bucket_count) * bucket_load < keys.size()) {
    throw BucketOverflowError(
        std::to_string(bucket_count) + "x" + std::to_string(bucket_load) +
        " buckets cannot hold " + std::to_string(keys.size()) + " keys");
  }
  mpz_class dummy = bucket_dummy_root(width_b);
  std::vector<std::vector<mpz_class>> buckets(bucket_count);
  for (const mpz_class& key : keys) {
    uint32_t idx = bucket_index(seed, key, bucket_count);
    if (buckets[idx].size() == bucket_load) {
      throw BucketOverflowError("bucket " + std::to_string(idx) +
                                " exceeded its load of " +
                                std::to_string(bucket_load));
    }
    buckets[idx].push_back(key);
  }
  for (auto& bucket : buckets) {
    while (bucket.size() < bucket_load) bucket.push_back(dummy);
  }
  return buckets;
}

// ---- client round 1 ----

struct ClientRound1 {
  std::vector<EncryptedPolynomial> polynomials;  // one, or bucket_count
};

// Everything the client must retain between sending its polynomials and
// decoding the response. Holds the trapdoor, so it is move-only.
struct ClientSession {
  PaillierKeypair keypair;
  CredentialDomain client_domain;
  CredentialDomain server_domain;
  PayloadLayout layout;
  ProtocolParams params;  // with the bucket shape and seed finalized
  ClientRound1 round1;
  std::map<mpz_class, OptionCode> key_to_option;
  size_t option_count = 0;
  uint32_t expected_words = 0;  // learned from the handshake; 0 = unknown

  ClientSession(PaillierKeypair kp, CredentialDomain cdom,
                CredentialDomain sdom, PayloadLayout lay, ProtocolParams p)
      : keypair(std::move(kp)),
        client_domain(std::move(cdom)),
        server_domain(std::move(sdom)),
        layout(lay),
        params(p) {}
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;
  ClientSession(ClientSession&&) = default;
  ClientSession& operator=(ClientSession&&) = default;
};

inline ClientSession client_round1(PaillierKeypair keypair,
                                   CredentialDomain client_domain,
                                   CredentialDomain server_domain,
                                   const ClientPreferences& prefs,
                                   ProtocolParams params, Rng& rng,
                                   OpCounter* counter = nullptr) {
  if (prefs.options.empty()) {
    throw ConfigError("preference list has no options");
  }
  PayloadLayout layout =
      validate_layout(keypair.pub, client_domain, server_domain,
                      params.guard_bits, params.hash_width);

  std::map<mpz_class, OptionCode> key_to_option;
  ClientRound1 round1;

  mpz_class dummy = bucket_dummy_root(layout.width_b);
  std::vector<mpz_class> keys;
  for (const auto& option : prefs.options) {
    OptionCode code = encode_option(client_domain, option);
    OptionCode key = params.hash_width > 0
                         ? hash_map_element(code, params.hash_width)
                         : code;
    if (!key_to_option.emplace(key.value, code).second) {
      throw ConfigError(params.hash_width > 0
                            ? "two options collide under the configured hash "
                              "width; raise it or disable hashing"
                            : "duplicate option in preference list");
    }
    if (params.bucketing && key.value == dummy) {
      throw ConfigError(
          "the all-ones option code is reserved for bucket padding; disable "
          "bucketing to use it");
    }
    keys.push_back(key.value);
  }

  if (params.bucketing) {
    if (params.bucket_count == 0 || params.bucket_load == 0) {
      BucketParams bp = choose_bucket_params(keys.size());
      params.bucket_count = bp.count;
      params.bucket_load = bp.load;
    }
    bool pinned_seed = params.bucket_seed != 0;
    std::vector<std::vector<mpz_class>> buckets;
    for (int attempt = 0;; ++attempt) {
      if (!pinned_seed) params.bucket_seed = mpz_get_ui(rng.bits(64).get_mpz_t());
      try {
        buckets = bucketize_roots(keys, layout.width_b, params.bucket_count,
                                  params.bucket_load, params.bucket_seed);
        break;
      } catch (const BucketOverflowError&) {
        if (pinned_seed || attempt >= 32) throw;
      }
    }
    for (const auto& bucket : buckets) {
      RootPolynomial poly = build_root_poly_multiset(bucket, keypair.pub.n);
      round1.polynomials.push_back(
          encrypt_polynomial(keypair.pub, poly, rng, counter));
    }
  } else {
    RootPolynomial poly = build_root_poly(keys, keypair.pub.n);
    round1.polynomials.push_back(
        encrypt_polynomial(keypair.pub, poly, rng, counter));
  }

  ClientSession session(std::move(keypair), std::move(client_domain),
                        std::move(server_domain), layout, params);
  session.round1 = std::move(round1);
  session.key_to_option = std::move(key_to_option);
  session.option_count = prefs.options.size();
  return session;
}

// ---- server response ----

struct ServerResponse {
  std::vector<Ciphertext> words;  // one per rule, shuffled
};

namespace detail {

struct PreparedRule {
  mpz_class key;        // match key of the accepted combination
  mpz_class word;       // plaintext added on top of the mask
  uint32_t poly_index;  // which received polynomial to evaluate
};

inline std::vector<PreparedRule> prepare_rules(
    const CredentialDomain& client_domain,
    const CredentialDomain& server_domain, const ServerPolicy& policy,
    const ClientRound1& round1, const ProtocolParams& params,
    const PayloadLayout& layout) {
  if (policy.rules.empty()) throw ConfigError("policy has no rules");
  if (params.bucketing) {
    if (round1.polynomials.size() != params.bucket_count) {
      throw Error("expected " + std::to_string(params.bucket_count) +
                  " polynomials, got " +
                  std::to_string(round1.polynomials.size()));
    }
    for (const auto& poly : round1.polynomials) {
      if (poly.degree() != params.bucket_load) {
        throw Error("bucket polynomial degree does not match the load");
      }
    }
  } else {
    if (round1.polynomials.size() != 1) {
      throw Error("expected a single polynomial without bucketing");
    }
    if (round1.polynomials[0].coefficients.size() < 2) {
      throw Error("polynomial must have at least degree 1");
    }
  }

  std::set<std::pair<mpz_class, mpz_class>> seen;
  std::vector<PreparedRule> prepared;
  for (const PolicyRule& rule : policy.rules) {
    OptionCode accept_code = encode_option(client_domain, rule.accept);
    OptionCode disclose_code = encode_option(server_domain, rule.disclose);
    if (!seen.emplace(accept_code.value, disclose_code.value).second) {
      throw ConfigError("duplicate (accept, disclose) rule in policy");
    }
    OptionCode key = params.hash_width > 0
                         ? hash_map_element(accept_code, params.hash_width)
                         : accept_code;
    PreparedRule r;
    r.key = key.value;
    if (params.payload) {
      r.word = pack_payload(layout, key, disclose_code);
    } else {
      r.word = key.value;
    }
    r.poly_index = params.bucketing
                       ? bucket_index(params.bucket_seed, r.key,
                                      params.bucket_count)
                       : 0;
    prepared.push_back(std::move(r));
  }
  return prepared;
}

}  // namespace detail

// Evaluates the received polynomials against every policy rule and returns
// one word per rule in random order. Each word decrypts to the rule's
// payload when the client holds the matching option, and to a uniformly
// masked value otherwise.
inline ServerResponse server_respond(const PaillierPublicKey& pk,
                                     const CredentialDomain& client_domain,
                                     const CredentialDomain& server_domain,
                                     const ServerPolicy& policy,
                                     const ClientRound1& round1,
                                     const ProtocolParams& params, Rng& rng,
                                     OpCounter* counter = nullptr,
                                     unsigned threads = 1) {
  PayloadLayout layout = validate_layout(pk, client_domain, server_domain,
                                         params.guard_bits, params.hash_width);
  std::vector<detail::PreparedRule> prepared = detail::prepare_rules(
      client_domain, server_domain, policy, round1, params, layout);

  // One forked stream per rule, drawn in rule order, keeps the output
  // independent of the thread count.
  std::vector<Rng> rule_rngs;
  rule_rngs.reserve(prepared.size());
  for (size_t j = 0; j < prepared.size(); ++j) rule_rngs.push_back(rng.fork());

  std::vector<Ciphertext> words(prepared.size());
  auto work = [&](size_t j) {
    Rng& rule_rng = rule_rngs[j];
    const detail::PreparedRule& r = prepared[j];
    Ciphertext value = eval_encrypted_horner(
        pk, round1.polynomials[r.poly_index], r.key, counter);
    mpz_class mask = 1 + rule_rng.below(mpz_class(pk.n - 1));
    Ciphertext masked = scalar_mul(pk, value, mask, counter);
    Ciphertext with_word = add_ciphertexts(
        pk, masked, encrypt(pk, r.word, rule_rng, counter));
    words[j] = rerandomize(pk, with_word, rule_rng);
  };

  if (threads <= 1 || prepared.size() < 2) {
    for (size_t j = 0; j < prepared.size(); ++j) work(j);
  } else {
    unsigned nthreads =
        std::min<size_t>(threads, prepared.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (size_t j = w; j < prepared.size(); j += nthreads) work(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Uniform shuffle so word order carries no rule-order information.
  for (size_t i = words.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.below_u64(i));
    std::swap(words[i - 1], words[j]);
  }
  return ServerResponse{std::move(words)};
}

// ---- client finalize ----

inline MatchResult client_finalize(const ClientSession& session,
                                   const ServerResponse& response) {
  if (session.expected_words != 0 &&
      response.words.size() != session.expected_words) {
    throw Error("response has " + std::to_string(response.words.size()) +
                " words but the handshake announced " +
                std::to_string(session.expected_words));
  }
  PayloadLayout accept_layout = session.layout;
  if (!session.params.payload) accept_layout.width_c = 0;

  std::set<std::pair<mpz_class, mpz_class>> matched;
  for (const Ciphertext& word : response.words) {
    mpz_class m = decrypt(session.keypair.priv, session.keypair.pub, word);
    auto fields = unpack_payload(accept_layout, m);
    if (!fields) continue;  // guard band says masked non-match
    auto it = session.key_to_option.find(fields->first.value);
    if (it == session.key_to_option.end()) continue;
    matched.emplace(it->second.value, fields->second.value);
  }

  MatchResult result;
  for (const auto& [b_code, c_code] : matched) {
    MatchAgreement agreement;
    agreement.client_option =
        decode_option(session.client_domain, OptionCode{b_code});
    if (session.params.payload) {
      agreement.server_disclosure =
          decode_option(session.server_domain, OptionCode{c_code});
    }
    result.agreements.push_back(std::move(agreement));
  }
  return result;
}

// ---- plaintext reference ----

// The answer the protocol must reproduce, computed directly on plaintext
// codes. Keyed the same way as the encrypted path so hash-width collisions
// behave identically.
inline MatchResult plaintext_match(const CredentialDomain& client_domain,
                                   const CredentialDomain& server_domain,
                                   const ClientPreferences& prefs,
                                   const ServerPolicy& policy,
                                   const ProtocolParams& params) {
  std::map<mpz_class, OptionCode> key_to_option;
  for (const auto& option : prefs.options) {
    OptionCode code = encode_option(client_domain, option);
    OptionCode key = params.hash_width > 0
                         ? hash_map_element(code, params.hash_width)
                         : code;
    key_to_option.emplace(key.value, code);
  }
  std::set<std::pair<mpz_class, mpz_class>> matched;
  for (const PolicyRule& rule : policy.rules) {
    OptionCode accept_code = encode_option(client_domain, rule.accept);
    OptionCode disclose_code = encode_option(server_domain, rule.disclose);
    OptionCode key = params.hash_width > 0
                         ? hash_map_element(accept_code, params.hash_width)
                         : accept_code;
    auto it = key_to_option.find(key.value);
    if (it == key_to_option.end()) continue;
    matched.emplace(it->second.value,
                    params.payload ? disclose_code.value : mpz_class(0));
  }
  MatchResult result;
  for (const auto& [b_code, c_code] : matched) {
    MatchAgreement agreement;
    agreement.client_option =
        decode_option(client_domain, OptionCode{b_code});
    if (params.payload) {
      agreement.server_disclosure =
          decode_option(server_domain, OptionCode{c_code});
    }
    result.agreements.push_back(std::move(agreement));
  }
  return result;
}

}  // namespace credmatch
