#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "credmatch/encoding.hpp"
#include "credmatch/error.hpp"
#include "credmatch/matching.hpp"

namespace credmatch {

// Below this many options the plain polynomial is cheaper than the bucket
// bookkeeping, so "auto" keeps bucketing off.
inline constexpr size_t kAutoBucketThreshold = 64;

enum class BucketMode { automatic, off, pinned };

struct ClientConfig {
  CredentialDomain client_domain;
  CredentialDomain server_domain;
  ClientPreferences prefs;
  ProtocolParams params;
  BucketMode bucket_mode = BucketMode::automatic;
  std::string key_path;  // optional; the --key flag overrides
  std::string connect;   // optional; the --connect flag overrides

  ClientConfig(CredentialDomain c, CredentialDomain s)
      : client_domain(std::move(c)), server_domain(std::move(s)) {}
};

struct ServerConfig {
  CredentialDomain client_domain;
  CredentialDomain server_domain;
  ServerPolicy policy;
  std::string key_pub_path;  // optional; the --key-pub flag overrides
  std::string listen;        // optional; the --listen flag overrides
  uint32_t max_options = 4096;
  unsigned threads = 1;

  ServerConfig(CredentialDomain c, CredentialDomain s)
      : client_domain(std::move(c)), server_domain(std::move(s)) {}
};

namespace detail {

inline nlohmann::json load_json_object(const std::string& path,
                                       const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(std::string("cannot open ") + what + " file: " + path);
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError(std::string(what) + " file is not a JSON object: " +
                      path);
  }
  return j;
}

inline void check_keys(const nlohmann::json& j, const std::string& origin,
                       std::initializer_list<const char*> allowed) {
  std::string unknown;
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) unknown += " '" + item.key() + "'";
  }
  if (!unknown.empty()) {
    throw ConfigError("unknown key(s) in " + origin + ":" + unknown);
  }
}

inline std::string resolve_path(const std::string& config_path,
                                const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_absolute()) return value;
  return (std::filesystem::path(config_path).parent_path() / p).string();
}

inline std::string require_string(const nlohmann::json& j,
                                  const std::string& origin,
                                  const char* key) {
  if (!j.contains(key) || !j.at(key).is_string() ||
      j.at(key).get<std::string>().empty()) {
    throw ConfigError("'" + std::string(key) +
                      "' must be a non-empty string in " + origin);
  }
  return j.at(key).get<std::string>();
}

inline std::string optional_string(const nlohmann::json& j,
                                   const std::string& origin,
                                   const char* key) {
  if (!j.contains(key)) return std::string();
  if (!j.at(key).is_string()) {
    throw ConfigError("'" + std::string(key) + "' must be a string in " +
                      origin);
  }
  return j.at(key).get<std::string>();
}

inline std::vector<std::string> parse_name_list(const nlohmann::json& j,
                                                const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + " must be a non-empty list of names");
  }
  std::vector<std::string> names;
  for (const auto& entry : j) {
    if (!entry.is_string()) {
      throw ConfigError(where + " has a non-string entry");
    }
    names.push_back(entry.get<std::string>());
  }
  return names;
}

inline void collect_unknown_names(const CredentialDomain& domain,
                                  const std::vector<std::string>& names,
                                  const std::string& where,
                                  std::vector<std::string>& out) {
  for (const std::string& n : names) {
    if (!domain.index_of(n)) out.push_back(where + ": '" + n + "'");
  }
}

inline void throw_collected(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = "configuration problems:";
  for (const std::string& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

inline uint64_t require_uint(const nlohmann::json& j,
                             const std::string& origin, const char* key,
                             uint64_t max_value) {
  if (!j.at(key).is_number_unsigned() ||
      j.at(key).get<uint64_t>() > max_value) {
    throw ConfigError("'" + std::string(key) + "' must be an integer in [0, " +
                      std::to_string(max_value) + "] in " + origin);
  }
  return j.at(key).get<uint64_t>();
}

inline void parse_params(const nlohmann::json& j, const std::string& origin,
                         ProtocolParams& params, BucketMode& mode) {
  check_keys(j, origin + " params",
             {"guard_bits", "hash_width", "payload", "buckets"});
  if (j.contains("guard_bits")) {
    params.guard_bits =
        static_cast<unsigned>(require_uint(j, origin, "guard_bits", 65535));
  }
  if (j.contains("hash_width")) {
    params.hash_width =
        static_cast<unsigned>(require_uint(j, origin, "hash_width", 256));
  }
  if (j.contains("payload")) {
    if (!j.at("payload").is_boolean()) {
      throw ConfigError("'payload' must be a boolean in " + origin);
    }
    params.payload = j.at("payload").get<bool>();
  }
  if (j.contains("buckets")) {
    const nlohmann::json& b = j.at("buckets");
    if (b.is_string()) {
      std::string v = b.get<std::string>();
      if (v == "auto") {
        mode = BucketMode::automatic;
      } else if (v == "off") {
        mode = BucketMode::off;
      } else {
        throw ConfigError(
            "'buckets' must be \"auto\", \"off\", or an object in " + origin);
      }
    } else if (b.is_object()) {
      check_keys(b, origin + " buckets", {"count", "load", "seed"});
      mode = BucketMode::pinned;
      if (b.contains("count")) {
        params.bucket_count =
            static_cast<uint32_t>(require_uint(b, origin, "count", 65536));
      }
      if (b.contains("load")) {
        params.bucket_load =
            static_cast<uint32_t>(require_uint(b, origin, "load", 4096));
      }
      if (b.contains("seed")) {
        params.bucket_seed = require_uint(b, origin, "seed", UINT64_MAX);
      }
    } else {
      throw ConfigError(
          "'buckets' must be \"auto\", \"off\", or an object in " + origin);
    }
  }
}

}  // namespace detail

inline ClientConfig load_client_config(const std::string& path) {
  nlohmann::json j = detail::load_json_object(path, "preferences");
  detail::check_keys(
      j, path,
      {"client_domain", "server_domain", "key", "connect", "options",
       "params"});
  CredentialDomain cdom = CredentialDomain::load_file(
      Side::client,
      detail::resolve_path(path, detail::require_string(j, path,
                                                        "client_domain")));
  CredentialDomain sdom = CredentialDomain::load_file(
      Side::server,
      detail::resolve_path(path, detail::require_string(j, path,
                                                        "server_domain")));
  ClientConfig config(std::move(cdom), std::move(sdom));

  if (!j.contains("options") || !j.at("options").is_array() ||
      j.at("options").empty()) {
    throw ConfigError("'options' must be a non-empty list in " + path);
  }
  std::vector<std::string> problems;
  size_t index = 0;
  for (const auto& entry : j.at("options")) {
    std::string where = "options[" + std::to_string(index) + "]";
    config.prefs.options.push_back(detail::parse_name_list(entry, where));
    detail::collect_unknown_names(config.client_domain,
                                  config.prefs.options.back(), where,
                                  problems);
    ++index;
  }
  detail::throw_collected(problems);

  std::set<mpz_class> codes;
  for (size_t i = 0; i < config.prefs.options.size(); ++i) {
    OptionCode code = encode_option(config.client_domain,
                                    config.prefs.options[i]);
    if (!codes.insert(code.value).second) {
      throw ConfigError("options[" + std::to_string(i) +
                        "] repeats an earlier option in " + path);
    }
  }

  config.key_path = detail::optional_string(j, path, "key");
  if (!config.key_path.empty()) {
    config.key_path = detail::resolve_path(path, config.key_path);
  }
  config.connect = detail::optional_string(j, path, "connect");
  if (j.contains("params")) {
    if (!j.at("params").is_object()) {
      throw ConfigError("'params' must be an object in " + path);
    }
    detail::parse_params(j.at("params"), path, config.params,
                         config.bucket_mode);
  }
  return config;
}

inline ServerConfig load_server_config(const std::string& path) {
  nlohmann::json j = detail::load_json_object(path, "policy");
  detail::check_keys(j, path,
                     {"client_domain", "server_domain", "key_pub", "listen",
                      "rules", "max_options", "threads"});
  CredentialDomain cdom = CredentialDomain::load_file(
      Side::client,
      detail::resolve_path(path, detail::require_string(j, path,
                                                        "client_domain")));
  CredentialDomain sdom = CredentialDomain::load_file(
      Side::server,
      detail::resolve_path(path, detail::require_string(j, path,
                                                        "server_domain")));
  ServerConfig config(std::move(cdom), std::move(sdom));

  if (!j.contains("rules") || !j.at("rules").is_array() ||
      j.at("rules").empty()) {
    throw ConfigError("'rules' must be a non-empty list in " + path);
  }
  std::vector<std::string> problems;
  size_t index = 0;
  for (const auto& entry : j.at("rules")) {
    std::string where = "rules[" + std::to_string(index) + "]";
    if (!entry.is_object()) {
      throw ConfigError(where + " must be an object in " + path);
    }
    detail::check_keys(entry, where, {"accept", "disclose"});
    if (!entry.contains("accept") || !entry.contains("disclose")) {
      throw ConfigError(where + " needs both 'accept' and 'disclose' in " +
                        path);
    }
    PolicyRule rule;
    rule.accept = detail::parse_name_list(entry.at("accept"),
                                          where + ".accept");
    rule.disclose = detail::parse_name_list(entry.at("disclose"),
                                            where + ".disclose");
    detail::collect_unknown_names(config.client_domain, rule.accept,
                                  where + ".accept", problems);
    detail::collect_unknown_names(config.server_domain, rule.disclose,
                                  where + ".disclose", problems);
    config.policy.rules.push_back(std::move(rule));
    ++index;
  }
  detail::throw_collected(problems);

  std::set<std::pair<mpz_class, mpz_class>> pairs;
  for (size_t i = 0; i < config.policy.rules.size(); ++i) {
    const PolicyRule& rule = config.policy.rules[i];
    auto pair = std::make_pair(
        encode_option(config.client_domain, rule.accept).value,
        encode_option(config.server_domain, rule.disclose).value);
    if (!pairs.insert(pair).second) {
      throw ConfigError("rules[" + std::to_string(i) +
                        "] repeats an earlier rule in " + path);
    }
  }

  config.key_pub_path = detail::optional_string(j, path, "key_pub");
  if (!config.key_pub_path.empty()) {
    config.key_pub_path = detail::resolve_path(path, config.key_pub_path);
  }
  config.listen = detail::optional_string(j, path, "listen");
  if (j.contains("max_options")) {
    config.max_options = static_cast<uint32_t>(
        detail::require_uint(j, path, "max_options", 1u << 20));
    if (config.max_options == 0) {
      throw ConfigError("'max_options' must be positive in " + path);
    }
  }
  if (j.contains("threads")) {
    config.threads = static_cast<unsigned>(
        detail::require_uint(j, path, "threads", 256));
    if (config.threads == 0) config.threads = 1;
  }
  return config;
}

inline ProtocolParams resolve_client_params(const ClientConfig& config) {
  ProtocolParams params = config.params;
  switch (config.bucket_mode) {
    case BucketMode::off:
      params.bucketing = false;
      break;
    case BucketMode::pinned:
      params.bucketing = true;
      break;
    case BucketMode::automatic:
      params.bucketing =
          config.prefs.options.size() >= kAutoBucketThreshold;
      break;
  }
  return params;
}

}  // namespace credmatch
