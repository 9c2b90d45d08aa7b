#include <sys/stat.h>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "credmatch/credmatch.hpp"

namespace {

using namespace credmatch;

unsigned resolve_timeout() {
  const char* env = std::getenv("CREDMATCH_TIMEOUT_SECS");
  if (!env || !*env) return kDefaultTimeoutSecs;
  char* end = nullptr;
  unsigned long value = std::strtoul(env, &end, 10);
  if (*end != '\0' || value == 0 || value > 86400) {
    throw ConfigError(
        "CREDMATCH_TIMEOUT_SECS must be a positive number of seconds");
  }
  return static_cast<unsigned>(value);
}

std::string timestamp() {
  char buf[32];
  time_t now = time(nullptr);
  struct tm tm_utc;
  gmtime_r(&now, &tm_utc);
  strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_file(const std::string& path, const std::string& body,
                bool private_mode) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out << body;
  out.close();
  if (!out) throw ConfigError("short write to " + path);
  if (private_mode) ::chmod(path.c_str(), 0600);
}

int cmd_keygen(unsigned bits, const std::string& out_path, bool force) {
  if (bits < kMinKeyBits) {
    throw ConfigError("--bits must be at least " +
                      std::to_string(kMinKeyBits));
  }
  std::string pub_path = out_path + ".pub";
  if (!force) {
    if (std::filesystem::exists(out_path)) {
      throw ConfigError(out_path + " already exists (use --force)");
    }
    if (std::filesystem::exists(pub_path)) {
      throw ConfigError(pub_path + " already exists (use --force)");
    }
  }
  Rng rng;
  PaillierKeypair kp = keygen(bits, rng);
  write_file(out_path, private_key_json(kp) + "\n", true);
  write_file(pub_path, public_key_json(kp.pub) + "\n", false);
  std::cout << "wrote " << out_path << " and " << pub_path << " ("
            << kp.pub.bits() << "-bit modulus)" << std::endl;
  return 0;
}

void print_human(const MatchResult& result) {
  if (result.agreements.empty()) {
    std::cout << "no agreements" << std::endl;
    return;
  }
  std::cout << "agreed on " << result.agreements.size() << " option(s):\n";
  for (const MatchAgreement& a : result.agreements) {
    std::cout << "  ";
    for (size_t i = 0; i < a.client_option.size(); ++i) {
      if (i) std::cout << ", ";
      std::cout << a.client_option[i];
    }
    if (!a.server_disclosure.empty()) {
      std::cout << "  =>  ";
      for (size_t i = 0; i < a.server_disclosure.size(); ++i) {
        if (i) std::cout << ", ";
        std::cout << a.server_disclosure[i];
      }
    }
    std::cout << "\n";
  }
  std::cout << std::flush;
}

void print_json(const MatchResult& result) {
  nlohmann::ordered_json out;
  out["count"] = result.agreements.size();
  out["agreements"] = nlohmann::json::array();
  for (const MatchAgreement& a : result.agreements) {
    nlohmann::ordered_json entry;
    entry["client_option"] = a.client_option;
    entry["server_disclosure"] = a.server_disclosure;
    out["agreements"].push_back(std::move(entry));
  }
  std::cout << out.dump(2) << std::endl;
}

int cmd_client(const std::string& prefs_path, const std::string& key_flag,
               const std::string& connect_flag, bool json_output) {
  unsigned timeout = resolve_timeout();
  ClientConfig config = load_client_config(prefs_path);

  std::string key_path = key_flag.empty() ? config.key_path : key_flag;
  if (key_path.empty()) {
    throw ConfigError(
        "no private key: pass --key or set \"key\" in the preferences file");
  }
  std::string connect = connect_flag.empty() ? config.connect : connect_flag;
  if (connect.empty()) {
    throw ConfigError(
        "no server address: pass --connect or set \"connect\" in the "
        "preferences file");
  }
  HostPort target = parse_hostport(connect);

  PaillierKeypair keypair = load_private_key(key_path);
  ProtocolParams params = resolve_client_params(config);

  Rng rng;
  ClientSession session =
      client_round1(std::move(keypair), config.client_domain,
                    config.server_domain, config.prefs, params, rng);
  auto stream = connect_tcp(target.host, target.port, timeout);
  ClientOutcome outcome = run_client_session(*stream, std::move(session));

  if (json_output) {
    print_json(outcome.result);
  } else {
    print_human(outcome.result);
  }
  return outcome.result.agreements.empty() ? 3 : 0;
}

int cmd_serve(const std::string& policy_path, const std::string& key_pub_flag,
              const std::string& listen_flag, const std::string& buckets) {
  unsigned timeout = resolve_timeout();
  ServerConfig config = load_server_config(policy_path);

  std::string key_pub =
      key_pub_flag.empty() ? config.key_pub_path : key_pub_flag;
  if (key_pub.empty()) {
    throw ConfigError(
        "no public key: pass --key-pub or set \"key_pub\" in the policy "
        "file");
  }
  std::string listen = listen_flag.empty() ? config.listen : listen_flag;
  if (listen.empty()) {
    throw ConfigError(
        "no listen address: pass --listen or set \"listen\" in the policy "
        "file");
  }
  HostPort bind_addr = parse_hostport(listen);

  ServerSessionConfig session_config{load_public_key(key_pub),
                                     config.client_domain,
                                     config.server_domain, config.policy};
  session_config.max_option_count = config.max_options;
  session_config.allow_bucketing = buckets != "off";
  session_config.threads = config.threads;

  TcpListener listener(bind_addr.host, bind_addr.port);
  std::cout << "listening on " << bind_addr.host << ":"
            << listener.bound_port() << std::endl;

  auto log_mutex = std::make_shared<std::mutex>();
  for (;;) {
    std::string peer;
    std::shared_ptr<FdStream> stream = listener.accept(timeout, &peer);
    std::thread([stream, peer, &session_config, log_mutex] {
      Rng rng;
      ServerOutcome outcome = run_server_session(*stream, session_config, rng);
      std::lock_guard<std::mutex> lock(*log_mutex);
      std::cerr << "[" << timestamp() << "] peer=" << peer
                << " s=" << outcome.option_count;
      if (outcome.ok) {
        std::cerr << " ok words=" << outcome.word_count;
      } else {
        std::cerr << " abort=\"" << abort_reason_name(outcome.reason)
                  << "\" detail=\"" << outcome.detail << "\"";
      }
      std::cerr << std::endl;
    }).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "two-party credential matching with encrypted preference lists"};
  app.require_subcommand(1);

  unsigned bits = kDefaultKeyBits;
  std::string out_path;
  bool force = false;
  CLI::App* keygen_cmd =
      app.add_subcommand("keygen", "generate a key pair as PATH and PATH.pub");
  keygen_cmd->add_option("--bits", bits, "modulus size in bits")
      ->capture_default_str();
  keygen_cmd->add_option("--out", out_path, "private key path")->required();
  keygen_cmd->add_flag("--force", force, "overwrite existing files");

  std::string policy_path, key_pub_flag, listen_flag;
  std::string buckets = "auto";
  CLI::App* serve_cmd =
      app.add_subcommand("serve", "answer matching requests for a policy");
  serve_cmd->add_option("--policy", policy_path, "policy JSON file")
      ->required();
  serve_cmd->add_option("--key-pub", key_pub_flag, "pinned public key file");
  serve_cmd->add_option("--listen", listen_flag, "HOST:PORT to bind");
  serve_cmd->add_option("--buckets", buckets, "auto|off")
      ->check(CLI::IsMember({"auto", "off"}))
      ->capture_default_str();

  std::string prefs_path, key_flag, connect_flag;
  bool json_output = false;
  CLI::App* client_cmd =
      app.add_subcommand("client", "negotiate against a server");
  client_cmd->add_option("--prefs", prefs_path, "preferences JSON file")
      ->required();
  client_cmd->add_option("--key", key_flag, "private key file");
  client_cmd->add_option("--connect", connect_flag, "HOST:PORT to reach");
  client_cmd->add_flag("--json", json_output, "print the result as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (keygen_cmd->parsed()) return cmd_keygen(bits, out_path, force);
    if (serve_cmd->parsed()) {
      return cmd_serve(policy_path, key_pub_flag, listen_flag, buckets);
    }
    return cmd_client(prefs_path, key_flag, connect_flag, json_output);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
