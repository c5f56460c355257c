#include <cstdlib>

#include <httplib.h>

#include "ckg/error.hpp"
#include "ckg/transports.hpp"
#include "ckg/wire.hpp"

namespace ckg {

HttpTransport::HttpTransport(const GatewayConfig& config) : timeout_(config.timeout) {
  const auto& url = config.endpoint_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url must be http(s)://...: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
  const auto path_begin = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);

  if (!config.api_key_env_name.empty()) {
    const char* key = std::getenv(config.api_key_env_name.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("credential environment variable " + config.api_key_env_name + " is not set");
    }
    api_key_ = key;
  }
}

TransportReply HttpTransport::send(const CompletionRequest& req) {
  // httplib::Client is not safe for concurrent use; one per request.
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_, headers, wire::chat_request_body(req), "application/json");
  if (!res) return TransportReply::failure(0, "HTTP error: " + httplib::to_string(res.error()));
  if (res->status != 200) return TransportReply::failure(res->status, res->body.substr(0, 512));
  try {
    TransportReply ok;
    ok.response = wire::parse_chat_response(res->body);
    return ok;
  } catch (const TransportError& e) {
    return TransportReply::failure(e.last_status(), e.what());
  }
}

}  // namespace ckg
