#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <utility>

#include "credmatch/error.hpp"
#include "credmatch/wire.hpp"

namespace credmatch {

inline constexpr unsigned kDefaultTimeoutSecs = 30;

// Byte stream with whole-buffer semantics; short reads and writes are
// retried internally, timeouts and disconnects surface as ProtocolError.
class Stream {
public:
  virtual ~Stream() = default;
  virtual void write_all(const uint8_t* data, size_t len) = 0;
  virtual void read_exact(uint8_t* data, size_t len) = 0;
};

class FdStream : public Stream {
public:
  explicit FdStream(int fd, unsigned timeout_secs = kDefaultTimeoutSecs)
      : fd_(fd) {
    set_timeout(timeout_secs);
  }
  ~FdStream() override {
    if (fd_ >= 0) ::close(fd_);
  }
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;

  void set_timeout(unsigned timeout_secs) {
    struct timeval tv;
    tv.tv_sec = timeout_secs;
    tv.tv_usec = 0;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  }

  void write_all(const uint8_t* data, size_t len) override {
    size_t sent = 0;
    while (sent < len) {
      ssize_t r = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
      if (r < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          throw ProtocolError(AbortReason::timeout, "send timed out");
        }
        throw ProtocolError(AbortReason::internal,
                            std::string("send failed: ") + strerror(errno));
      }
      sent += static_cast<size_t>(r);
    }
  }

  void read_exact(uint8_t* data, size_t len) override {
    size_t got = 0;
    while (got < len) {
      ssize_t r = ::recv(fd_, data + got, len - got, 0);
      if (r == 0) {
        throw ProtocolError(AbortReason::malformed_frame,
                            "peer closed the connection mid-message");
      }
      if (r < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          throw ProtocolError(AbortReason::timeout, "recv timed out");
        }
        throw ProtocolError(AbortReason::internal,
                            std::string("recv failed: ") + strerror(errno));
      }
      got += static_cast<size_t>(r);
    }
  }

  int fd() const { return fd_; }

private:
  int fd_;
};

struct HostPort {
  std::string host;
  uint16_t port;
};

inline HostPort parse_hostport(const std::string& text) {
  size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 ||
      colon + 1 == text.size()) {
    throw ConfigError("expected HOST:PORT, got '" + text + "'");
  }
  std::string host = text.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);  // bracketed IPv6 literal
  }
  std::string port_text = text.substr(colon + 1);
  unsigned long port = 0;
  try {
    size_t used = 0;
    port = std::stoul(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("invalid port in '" + text + "'");
  }
  if (port > 65535) throw ConfigError("port out of range in '" + text + "'");
  return {host, static_cast<uint16_t>(port)};
}

namespace detail {

struct AddrInfoHolder {
  struct addrinfo* list = nullptr;
  ~AddrInfoHolder() {
    if (list) ::freeaddrinfo(list);
  }
};

inline AddrInfoHolder resolve(const std::string& host, uint16_t port,
                              bool passive) {
  struct addrinfo hints;
  std::memset(&hints, 0, sizeof(hints));
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  AddrInfoHolder out;
  int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                         std::to_string(port).c_str(), &hints, &out.list);
  if (rc != 0) {
    throw ProtocolError(AbortReason::internal,
                        "cannot resolve " + host + ": " + gai_strerror(rc));
  }
  return out;
}

}  // namespace detail

class TcpListener {
public:
  TcpListener(const std::string& host, uint16_t port) {
    detail::AddrInfoHolder addrs = detail::resolve(host, port, true);
    std::string last_error = "no addresses";
    for (struct addrinfo* ai = addrs.list; ai; ai = ai->ai_next) {
      int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) {
        last_error = strerror(errno);
        continue;
      }
      int one = 1;
      ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
      if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 &&
          ::listen(fd, 16) == 0) {
        fd_ = fd;
        break;
      }
      last_error = strerror(errno);
      ::close(fd);
    }
    if (fd_ < 0) {
      throw ProtocolError(AbortReason::internal,
                          "cannot listen on " + host + ":" +
                              std::to_string(port) + ": " + last_error);
    }
  }
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t bound_port() const {
    struct sockaddr_storage ss;
    socklen_t len = sizeof(ss);
    if (::getsockname(fd_, reinterpret_cast<struct sockaddr*>(&ss), &len) !=
        0) {
      throw ProtocolError(AbortReason::internal, "getsockname failed");
    }
    if (ss.ss_family == AF_INET) {
      return ntohs(reinterpret_cast<struct sockaddr_in*>(&ss)->sin_port);
    }
    return ntohs(reinterpret_cast<struct sockaddr_in6*>(&ss)->sin6_port);
  }

  // Blocks until a client connects. Returns a peer description through
  // peer_out when given.
  std::unique_ptr<FdStream> accept(
      unsigned timeout_secs = kDefaultTimeoutSecs,
      std::string* peer_out = nullptr) {
    struct sockaddr_storage ss;
    socklen_t len = sizeof(ss);
    int fd = ::accept(fd_, reinterpret_cast<struct sockaddr*>(&ss), &len);
    if (fd < 0) {
      throw ProtocolError(AbortReason::internal,
                          std::string("accept failed: ") + strerror(errno));
    }
    if (peer_out) {
      char host[NI_MAXHOST] = {0};
      char serv[NI_MAXSERV] = {0};
      if (::getnameinfo(reinterpret_cast<struct sockaddr*>(&ss), len, host,
                        sizeof(host), serv, sizeof(serv),
                        NI_NUMERICHOST | NI_NUMERICSERV) == 0) {
        *peer_out = std::string(host) + ":" + serv;
      } else {
        *peer_out = "unknown";
      }
    }
    return std::make_unique<FdStream>(fd, timeout_secs);
  }

  int fd() const { return fd_; }

private:
  int fd_ = -1;
};

inline std::unique_ptr<FdStream> connect_tcp(
    const std::string& host, uint16_t port,
    unsigned timeout_secs = kDefaultTimeoutSecs) {
  detail::AddrInfoHolder addrs = detail::resolve(host, port, false);
  std::string last_error = "no addresses";
  for (struct addrinfo* ai = addrs.list; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = strerror(errno);
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      return std::make_unique<FdStream>(fd, timeout_secs);
    }
    last_error = strerror(errno);
    ::close(fd);
  }
  throw ProtocolError(AbortReason::internal,
                      "cannot connect to " + host + ":" +
                          std::to_string(port) + ": " + last_error);
}

// Connected stream pair in one process, for tests and loopback runs.
inline std::pair<std::unique_ptr<FdStream>, std::unique_ptr<FdStream>>
local_pipe(unsigned timeout_secs = kDefaultTimeoutSecs) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw ProtocolError(AbortReason::internal,
                        std::string("socketpair failed: ") + strerror(errno));
  }
  return {std::make_unique<FdStream>(fds[0], timeout_secs),
          std::make_unique<FdStream>(fds[1], timeout_secs)};
}

// ---- frame transport ----
// Frame = version byte, type byte, u32 big-endian body length, body.

inline void write_frame(Stream& stream, MsgType type,
                        const std::vector<uint8_t>& body) {
  if (body.size() > kMaxFrameBody) {
    throw ProtocolError(AbortReason::oversize, "frame body over the cap");
  }
  uint8_t header[6];
  header[0] = kProtocolVersion;
  header[1] = static_cast<uint8_t>(type);
  uint32_t len = static_cast<uint32_t>(body.size());
  header[2] = static_cast<uint8_t>(len >> 24);
  header[3] = static_cast<uint8_t>(len >> 16);
  header[4] = static_cast<uint8_t>(len >> 8);
  header[5] = static_cast<uint8_t>(len);
  stream.write_all(header, sizeof(header));
  if (!body.empty()) stream.write_all(body.data(), body.size());
}

inline Frame read_frame(Stream& stream) {
  uint8_t header[6];
  stream.read_exact(header, sizeof(header));
  Frame frame;
  frame.version = header[0];
  frame.type = header[1];
  uint32_t len = (static_cast<uint32_t>(header[2]) << 24) |
                 (static_cast<uint32_t>(header[3]) << 16) |
                 (static_cast<uint32_t>(header[4]) << 8) |
                 static_cast<uint32_t>(header[5]);
  if (len > kMaxFrameBody) {
    throw ProtocolError(AbortReason::oversize,
                        "announced frame body over the cap");
  }
  frame.body.resize(len);
  if (len > 0) stream.read_exact(frame.body.data(), len);
  return frame;
}

}  // namespace credmatch
