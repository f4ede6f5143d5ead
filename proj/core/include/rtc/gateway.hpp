#pragma once

// Brokers attacker messages to the system under test. Backends are pluggable:
// deterministic mocks for tests and simulations, or a remote HTTP endpoint.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtc/workflow.hpp"

namespace rtc {

struct ModelReply {
  std::string text;
  double latency_seconds = 0.0;
  std::map<std::string, std::string> transport_metadata;
  /// Set by scripted backends that plant known rule breaks.
  bool violative = false;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ModelReply reply(std::span<const Turn> history, std::string_view message) const = 0;
};

/// Validates history alternation and the message, then asks the backend.
/// The history is never modified.
ModelReply converse(std::span<const Turn> history, std::string_view message, const ChatBackend& backend);

class EchoBackend final : public ChatBackend {
 public:
  ModelReply reply(std::span<const Turn> history, std::string_view message) const override;
};

/// Reply k (k = attacker turns already in the history) is script[k mod size].
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> script);
  ModelReply reply(std::span<const Turn> history, std::string_view message) const override;

 private:
  std::vector<std::string> script_;
};

struct ScriptEntry {
  std::string trigger;
  std::string reply;
  bool violative = true;
};

struct ViolatorScript {
  std::vector<ScriptEntry> entries;
  std::string default_reply = "I can't help with that, but here is some general information.";
};

/// Replies with the first entry whose trigger occurs in the message, else the
/// default benign reply. Throws on duplicate triggers.
std::unique_ptr<ChatBackend> scripted_violator(ViolatorScript script_spec);

/// Config-driven mapping between the internal chat schema and a vendor API.
struct FieldMapping {
  std::string messages_field = "messages";
  std::string role_field = "role";
  std::string text_field = "text";
  std::string attacker_role = "user";
  std::string model_role = "assistant";
  /// JSON pointer to the reply text in the response body.
  std::string reply_pointer = "/text";
};

struct ChatEndpointConfig {
  std::string endpoint_url;
  /// Name of the environment variable that holds the bearer token.
  std::string auth_token_env_var_name;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  FieldMapping mapping;
};

/// Throws validation on timeout <= 0 or negative retries.
void validate(const ChatEndpointConfig& config);

struct HttpResult {
  int status = 0;
  std::string body;
};

enum class TransportFailure { none, timeout, connection };

struct TransportOutcome {
  TransportFailure failure = TransportFailure::none;
  HttpResult response;
  std::string detail;
};

/// One HTTP POST. Implementations must be safe for concurrent calls.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual TransportOutcome post(const std::string& url, const std::map<std::string, std::string>& headers,
                                const std::string& body, double timeout_seconds) = 0;
};

/// cpp-httplib backed transport.
std::shared_ptr<HttpTransport> make_http_transport();

/// Builds the request body for a history plus the new attacker message.
std::string build_chat_request(std::span<const Turn> history, std::string_view message,
                               const FieldMapping& mapping);

class RemoteBackend final : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RemoteBackend(ChatEndpointConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

  /// Retries timeouts, connection failures and 5xx/429 with exponential
  /// backoff. Throws transport "timeout_exhausted" or
  /// "transport_exhausted" once max_retries is spent, and
  /// "malformed_response" when the reply pointer does not resolve to text.
  ModelReply reply(std::span<const Turn> history, std::string_view message) const override;

 private:
  ChatEndpointConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
};

}  // namespace rtc
