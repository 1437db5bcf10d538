#include <httplib.h>

#include <cmath>
#include <cstdlib>

#include "hlv/backend.hpp"
#include "hlv/error.hpp"

namespace hlv {

namespace {

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpTransport::HttpTransport(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  std::tie(scheme_host_port_, path_) = split_endpoint(config_.endpoint);
}

std::string HttpTransport::post(const std::string& body) {
  httplib::Client client(scheme_host_port_);
  if (!client.is_valid()) throw ConfigError("cannot build an HTTP client for " + config_.endpoint);
  const auto seconds = static_cast<time_t>(std::floor(config_.timeout_seconds));
  const auto micros =
      static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  if (!config_.token_env.empty()) {
    if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token) {
      client.set_bearer_token_auth(token);
    }
  }

  auto res = client.Post(path_, body, "application/json");
  if (!res) {
    throw BackendError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()),
                       true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint, true);
  }
  if (res->status != 200) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint + ": " +
                           res->body.substr(0, 512),
                       false);
  }
  return res->body;
}

}  // namespace hlv
