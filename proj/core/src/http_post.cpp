#include "http_post.hpp"

#include <httplib.h>

#include "hoptrace/error.hpp"

namespace hoptrace::detail {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "only http:// endpoints are supported: " + url);
  }
  auto slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds,
                         int retries,
                         const std::vector<std::pair<std::string, std::string>>& headers) {
  auto [host, path] = split_url(url);
  httplib::Client client(host);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  std::string last_error;
  const std::string payload = body.dump();
  for (int attempt = 0; attempt <= retries; ++attempt) {
    auto res = client.Post(path, h, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kTransportError, url + ": malformed JSON reply: " + e.what());
    }
  }
  throw Error(ErrorCode::kTransportError,
              url + ": " + last_error + " after " + std::to_string(retries + 1) + " attempts");
}

}  // namespace hoptrace::detail
