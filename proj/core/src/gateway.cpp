#include "rtc/gateway.hpp"

#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rtc/error.hpp"

namespace rtc {

namespace {

void check_history(std::span<const Turn> history) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    const Author expected = i % 2 == 0 ? Author::attacker : Author::model;
    if (history[i].author != expected) {
      fail(ErrorKind::validation, "alternation", "history alternation violated at turn " + std::to_string(i));
    }
  }
  if (history.size() % 2 != 0) {
    fail(ErrorKind::validation, "alternation", "history ends with an unanswered attacker turn");
  }
}

std::size_t attacker_turns(std::span<const Turn> history) {
  std::size_t n = 0;
  for (const auto& t : history) n += t.author == Author::attacker ? 1 : 0;
  return n;
}

}  // namespace

ModelReply converse(std::span<const Turn> history, std::string_view message, const ChatBackend& backend) {
  if (message.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorKind::validation, "empty_message", "message is empty");
  }
  check_history(history);
  return backend.reply(history, message);
}

ModelReply EchoBackend::reply(std::span<const Turn>, std::string_view message) const {
  ModelReply r;
  r.text = std::string(message);
  r.transport_metadata["backend"] = "echo";
  return r;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> script) : script_(std::move(script)) {
  if (script_.empty()) fail(ErrorKind::validation, "empty_script", "scripted backend needs at least one reply");
}

ModelReply ScriptedBackend::reply(std::span<const Turn> history, std::string_view) const {
  ModelReply r;
  r.text = script_[attacker_turns(history) % script_.size()];
  r.transport_metadata["backend"] = "scripted";
  return r;
}

namespace {

class ViolatorBackend final : public ChatBackend {
 public:
  explicit ViolatorBackend(ViolatorScript script) : script_(std::move(script)) {}

  ModelReply reply(std::span<const Turn>, std::string_view message) const override {
    ModelReply r;
    r.transport_metadata["backend"] = "scripted_violator";
    for (const auto& entry : script_.entries) {
      if (message.find(entry.trigger) != std::string_view::npos) {
        r.text = entry.reply;
        r.violative = entry.violative;
        r.transport_metadata["trigger"] = entry.trigger;
        return r;
      }
    }
    r.text = script_.default_reply;
    return r;
  }

 private:
  ViolatorScript script_;
};

}  // namespace

std::unique_ptr<ChatBackend> scripted_violator(ViolatorScript script_spec) {
  std::set<std::string> seen;
  for (const auto& entry : script_spec.entries) {
    if (entry.trigger.empty()) fail(ErrorKind::validation, "empty_trigger", "script trigger is empty");
    if (!seen.insert(entry.trigger).second) {
      fail(ErrorKind::validation, "duplicate_trigger", "duplicate trigger '" + entry.trigger + "'");
    }
  }
  return std::make_unique<ViolatorBackend>(std::move(script_spec));
}

void validate(const ChatEndpointConfig& config) {
  if (!(config.timeout_seconds > 0)) fail(ErrorKind::validation, "invalid_timeout", "timeout must be > 0");
  if (config.max_retries < 0) fail(ErrorKind::validation, "invalid_retries", "max_retries must be >= 0");
}

std::string build_chat_request(std::span<const Turn> history, std::string_view message,
                               const FieldMapping& mapping) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& turn : history) {
    messages.push_back({{mapping.role_field, turn.author == Author::attacker ? mapping.attacker_role : mapping.model_role},
                        {mapping.text_field, turn.text}});
  }
  messages.push_back({{mapping.role_field, mapping.attacker_role}, {mapping.text_field, std::string(message)}});
  nlohmann::ordered_json body;
  body[mapping.messages_field] = std::move(messages);
  return body.dump();
}

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  TransportOutcome post(const std::string& url, const std::map<std::string, std::string>& headers,
                        const std::string& body, double timeout_seconds) override {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    const auto sec = static_cast<time_t>(timeout_seconds);
    const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(path, h, body, "application/json");

    TransportOutcome outcome;
    if (!result) {
      const auto err = result.error();
      outcome.failure = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                            ? TransportFailure::timeout
                            : TransportFailure::connection;
      outcome.detail = httplib::to_string(err);
      return outcome;
    }
    outcome.response.status = result->status;
    outcome.response.body = result->body;
    return outcome;
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

RemoteBackend::RemoteBackend(ChatEndpointConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  validate(config_);
  if (!transport_) fail(ErrorKind::validation, "missing_transport", "remote backend needs a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ModelReply RemoteBackend::reply(std::span<const Turn> history, std::string_view message) const {
  std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
  if (!config_.auth_token_env_var_name.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env_var_name.c_str()); token && *token) {
      headers["Authorization"] = std::string("Bearer ") + token;
    }
  }
  const std::string body = build_chat_request(history, message, config_.mapping);

  auto backoff = config_.initial_backoff;
  TransportFailure last_failure = TransportFailure::none;
  std::string last_detail;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff *= 2;
    }
    const auto started = std::chrono::steady_clock::now();
    TransportOutcome outcome = transport_->post(config_.endpoint_url, headers, body, config_.timeout_seconds);
    const double latency =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (outcome.failure != TransportFailure::none) {
      last_failure = outcome.failure;
      last_detail = outcome.detail;
      continue;
    }
    const int status = outcome.response.status;
    if (status >= 500 || status == 429) {
      last_failure = TransportFailure::connection;
      last_detail = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      fail(ErrorKind::transport, "http_error", "chat endpoint returned HTTP " + std::to_string(status));
    }

    const auto parsed = nlohmann::json::parse(outcome.response.body, nullptr, false);
    if (parsed.is_discarded()) fail(ErrorKind::transport, "malformed_response", "chat endpoint returned invalid JSON");
    const nlohmann::json::json_pointer pointer(config_.mapping.reply_pointer);
    if (!parsed.contains(pointer) || !parsed.at(pointer).is_string()) {
      fail(ErrorKind::transport, "malformed_response",
           "chat response has no text at '" + config_.mapping.reply_pointer + "'");
    }
    ModelReply reply;
    reply.text = parsed.at(pointer).get<std::string>();
    reply.latency_seconds = latency;
    reply.transport_metadata["attempts"] = std::to_string(attempt + 1);
    reply.transport_metadata["status"] = std::to_string(status);
    return reply;
  }
  if (last_failure == TransportFailure::timeout) {
    fail(ErrorKind::transport, "timeout_exhausted",
         "chat endpoint timed out " + std::to_string(config_.max_retries + 1) + " times");
  }
  fail(ErrorKind::transport, "transport_exhausted", "chat endpoint unavailable: " + last_detail);
}

}  // namespace rtc
