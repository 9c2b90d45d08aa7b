#pragma once

#include <stdexcept>
#include <string>

namespace credmatch {

// Base class for every failure raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-supplied configuration (unknown names, bad files, bad flags).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Payload layout does not fit the key modulus. Message names the deficit.
class OverflowError : public Error {
public:
  explicit OverflowError(const std::string& what) : Error(what) {}
};

// A bucket exceeded its maximum load; parameters need retuning.
class BucketOverflowError : public Error {
public:
  explicit BucketOverflowError(const std::string& what) : Error(what) {}
};

}  // namespace credmatch
