#pragma once

// Versioned HTTP+JSON API. ApiRouter is transport-free so tests can drive it
// directly; ApiServer binds it to a socket.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "rtc/error.hpp"
#include "rtc/service/campaign.hpp"

namespace rtc {

struct ApiRequest {
  std::string method;
  /// Path without the query string.
  std::string path;
  /// Header names are matched case-insensitively.
  std::map<std::string, std::string> headers;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

int http_status(ErrorKind kind) noexcept;
std::string_view to_string(ErrorKind kind) noexcept;

/// {"error": {"code", "message", "kind"}}
ApiResponse error_response(const Error& error);

class ApiRouter {
 public:
  /// Admin routes need `admin_token`; when it is empty they answer 401.
  ApiRouter(Campaign& campaign, std::string admin_token);

  ApiResponse handle(const ApiRequest& request) const;

 private:
  Campaign& campaign_;
  std::string admin_token_;
};

/// Reads the admin token from the named environment variable (empty when
/// unset).
std::string admin_token_from_env(const std::string& variable_name);

class ApiServer {
 public:
  explicit ApiServer(const ApiRouter& router);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rtc
