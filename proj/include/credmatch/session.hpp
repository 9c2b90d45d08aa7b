#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "credmatch/matching.hpp"
#include "credmatch/net.hpp"
#include "credmatch/paillier.hpp"
#include "credmatch/rng.hpp"
#include "credmatch/wire.hpp"

namespace credmatch {

enum class Direction : uint8_t { sent, received };

// Shape of one frame as an observer on the wire would see it. Equal inputs
// of equal size must produce equal transcripts, so no values are kept.
struct TranscriptEntry {
  Direction direction;
  uint8_t type;
  size_t body_size;

  bool operator==(const TranscriptEntry& o) const {
    return direction == o.direction && type == o.type &&
           body_size == o.body_size;
  }
};

using SessionTranscript = std::vector<TranscriptEntry>;

namespace detail {

inline void send_logged(Stream& stream, SessionTranscript& transcript,
                        MsgType type, const std::vector<uint8_t>& body) {
  write_frame(stream, type, body);
  transcript.push_back(
      {Direction::sent, static_cast<uint8_t>(type), body.size()});
}

inline Frame recv_logged(Stream& stream, SessionTranscript& transcript) {
  Frame frame = read_frame(stream);
  transcript.push_back(
      {Direction::received, frame.type, frame.body.size()});
  return frame;
}

inline void send_abort_best_effort(Stream& stream, AbortReason reason) {
  try {
    write_frame(stream, MsgType::abort, encode_abort(reason));
  } catch (...) {
    // The peer may already be gone; the abort is a courtesy.
  }
}

inline bool ciphertext_in_range(const PaillierPublicKey& pk,
                                const Ciphertext& c) {
  return c.value > 0 && c.value < pk.n_squared;
}

}  // namespace detail

// ---- client side ----

struct ClientOutcome {
  MatchResult result;
  SessionTranscript transcript;
};

// Drives the whole exchange over an established stream. The session must
// come out of client_round1. Throws ProtocolError when the server aborts
// or misbehaves; the client sends exactly two frames in a clean run.
inline ClientOutcome run_client_session(Stream& stream,
                                        ClientSession session) {
  SessionTranscript transcript;
  const PaillierPublicKey& pk = session.keypair.pub;

  HelloMessage hello;
  hello.n = pk.n;
  hello.client_domain_digest = session.client_domain.digest();
  hello.server_domain_digest = session.server_domain.digest();
  hello.option_count = static_cast<uint32_t>(session.option_count);
  hello.params = session.params;
  detail::send_logged(stream, transcript, MsgType::hello,
                      encode_hello(hello));

  auto fail = [&](AbortReason reason, const std::string& msg) -> void {
    detail::send_abort_best_effort(stream, reason);
    throw ProtocolError(reason, msg);
  };

  auto expect = [&](MsgType want) -> Frame {
    Frame frame = detail::recv_logged(stream, transcript);
    if (frame.version != kProtocolVersion) {
      fail(AbortReason::version_mismatch,
           "peer speaks protocol version " + std::to_string(frame.version));
    }
    if (frame.type == static_cast<uint8_t>(MsgType::abort)) {
      AbortReason reason = decode_abort(frame.body);
      throw ProtocolError(reason, std::string("server aborted: ") +
                                      abort_reason_name(reason));
    }
    if (frame.type != static_cast<uint8_t>(want)) {
      fail(AbortReason::unexpected_message,
           "unexpected message type " + std::to_string(frame.type));
    }
    return frame;
  };

  HelloAckMessage ack = decode_hello_ack(expect(MsgType::hello_ack).body);
  session.expected_words = ack.word_count;

  detail::send_logged(stream, transcript, MsgType::coeffs,
                      encode_coeffs(session.round1, pk.ciphertext_bytes()));

  Frame response_frame = expect(MsgType::response);
  ServerResponse response;
  try {
    response = decode_response(response_frame.body, pk.ciphertext_bytes());
  } catch (const ProtocolError& e) {
    fail(e.reason(), e.what());
  }
  if (response.words.size() != ack.word_count) {
    fail(AbortReason::count_mismatch,
         "response word count disagrees with the handshake");
  }
  for (const Ciphertext& word : response.words) {
    if (!detail::ciphertext_in_range(pk, word)) {
      fail(AbortReason::invalid_ciphertext,
           "response word outside the ciphertext group");
    }
  }

  Frame close_frame = expect(MsgType::close);
  decode_close(close_frame.body);

  ClientOutcome outcome;
  outcome.result = client_finalize(session, response);
  outcome.transcript = std::move(transcript);
  return outcome;
}

// ---- server side ----

struct ServerSessionConfig {
  PaillierPublicKey expected_key;
  CredentialDomain client_domain;
  CredentialDomain server_domain;
  ServerPolicy policy;
  uint32_t max_option_count = 4096;
  bool allow_bucketing = true;
  unsigned threads = 1;
};

struct ServerOutcome {
  bool ok = false;
  AbortReason reason = AbortReason::internal;
  std::string detail;
  uint32_t option_count = 0;
  size_t word_count = 0;
  SessionTranscript transcript;
};

// Serves one connection start to finish. Never throws: every failure is
// answered with an ABORT frame (best effort) and reported in the outcome.
inline ServerOutcome run_server_session(Stream& stream,
                                        const ServerSessionConfig& config,
                                        Rng& rng,
                                        OpCounter* counter = nullptr) {
  ServerOutcome outcome;
  const PaillierPublicKey& pk = config.expected_key;

  struct Bail {};  // unwinds to the outcome return below
  auto fail = [&](AbortReason reason, const std::string& msg, bool answer) {
    if (answer) detail::send_abort_best_effort(stream, reason);
    outcome.ok = false;
    outcome.reason = reason;
    outcome.detail = msg;
    throw Bail{};
  };

  try {
    auto expect = [&](MsgType want) -> Frame {
      Frame frame = detail::recv_logged(stream, outcome.transcript);
      if (frame.version != kProtocolVersion) {
        fail(AbortReason::version_mismatch,
             "client speaks protocol version " + std::to_string(frame.version),
             true);
      }
      if (frame.type == static_cast<uint8_t>(MsgType::abort)) {
        AbortReason reason = AbortReason::internal;
        std::string detail_msg = "client aborted";
        try {
          reason = decode_abort(frame.body);
          detail_msg =
              std::string("client aborted: ") + abort_reason_name(reason);
        } catch (const ProtocolError&) {
        }
        fail(reason, detail_msg, false);
      }
      if (frame.type != static_cast<uint8_t>(want)) {
        fail(AbortReason::unexpected_message,
             "unexpected message type " + std::to_string(frame.type), true);
      }
      return frame;
    };

    HelloMessage hello;
    try {
      hello = decode_hello(expect(MsgType::hello).body);
    } catch (const ProtocolError& e) {
      fail(e.reason(), e.what(), true);
    }
    outcome.option_count = hello.option_count;

    if (hello.n != pk.n) {
      fail(AbortReason::key_mismatch,
           "client key does not match the pinned public key", true);
    }
    if (hello.client_domain_digest != config.client_domain.digest() ||
        hello.server_domain_digest != config.server_domain.digest()) {
      fail(AbortReason::digest_mismatch,
           "domain digests do not match this deployment", true);
    }
    if (hello.option_count == 0 ||
        hello.option_count > config.max_option_count) {
      fail(AbortReason::param_rejected,
           "option count " + std::to_string(hello.option_count) +
               " outside [1, " + std::to_string(config.max_option_count) + "]",
           true);
    }
    try {
      validate_layout(pk, config.client_domain, config.server_domain,
                      hello.params.guard_bits, hello.params.hash_width);
    } catch (const Error& e) {
      fail(AbortReason::param_rejected, e.what(), true);
    }
    uint32_t expected_polys = 1;
    uint32_t expected_degree = hello.option_count;
    if (hello.params.bucketing && !config.allow_bucketing) {
      fail(AbortReason::param_rejected,
           "bucketed sessions are disabled here", true);
    }
    if (hello.params.bucketing) {
      const uint64_t count = hello.params.bucket_count;
      const uint64_t load = hello.params.bucket_load;
      if (count == 0 || count > 65536 || load == 0 || load > 4096 ||
          count * load > (1u << 20) || count * load < hello.option_count) {
        fail(AbortReason::param_rejected, "unusable bucket shape", true);
      }
      expected_polys = hello.params.bucket_count;
      expected_degree = hello.params.bucket_load;
    }

    HelloAckMessage ack{static_cast<uint32_t>(config.policy.rules.size())};
    detail::send_logged(stream, outcome.transcript, MsgType::hello_ack,
                        encode_hello_ack(ack));

    ClientRound1 round1;
    try {
      round1 =
          decode_coeffs(expect(MsgType::coeffs).body, pk.ciphertext_bytes());
    } catch (const ProtocolError& e) {
      fail(e.reason(), e.what(), true);
    }
    if (round1.polynomials.size() != expected_polys) {
      fail(AbortReason::count_mismatch,
           "expected " + std::to_string(expected_polys) +
               " polynomials, got " +
               std::to_string(round1.polynomials.size()),
           true);
    }
    for (const EncryptedPolynomial& poly : round1.polynomials) {
      if (poly.coefficients.size() != size_t{expected_degree} + 1) {
        fail(AbortReason::count_mismatch,
             "polynomial degree disagrees with the handshake", true);
      }
      for (const Ciphertext& c : poly.coefficients) {
        if (!detail::ciphertext_in_range(pk, c)) {
          fail(AbortReason::invalid_ciphertext,
               "coefficient outside the ciphertext group", true);
        }
      }
    }

    ServerResponse response;
    try {
      response = server_respond(pk, config.client_domain,
                                config.server_domain, config.policy, round1,
                                hello.params, rng, counter, config.threads);
    } catch (const std::exception& e) {
      fail(AbortReason::internal, e.what(), true);
    }
    detail::send_logged(stream, outcome.transcript, MsgType::response,
                        encode_response(response, pk.ciphertext_bytes()));
    detail::send_logged(stream, outcome.transcript, MsgType::close,
                        encode_close(0));
    outcome.ok = true;
    outcome.word_count = response.words.size();
    outcome.detail = "agreed to exchange " +
                     std::to_string(response.words.size()) + " words";
  } catch (const Bail&) {
    // outcome already filled in
  } catch (const ProtocolError& e) {
    detail::send_abort_best_effort(stream, e.reason());
    outcome.ok = false;
    outcome.reason = e.reason();
    outcome.detail = e.what();
  } catch (const std::exception& e) {
    detail::send_abort_best_effort(stream, AbortReason::internal);
    outcome.ok = false;
    outcome.reason = AbortReason::internal;
    outcome.detail = e.what();
  }
  return outcome;
}

}  // namespace credmatch
