#include "http_client.hpp"

#include "httplib.h"

namespace opmodel::detail {

namespace {

template <class Client>
std::optional<HttpReply> send(Client& cli, const ParsedUrl& url, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              std::chrono::milliseconds timeout, std::string& transport_error) {
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = cli.Post(url.path, hdrs, body, "application/json");
  if (!res) {
    transport_error = httplib::to_string(res.error());
    return std::nullopt;
  }
  return HttpReply{res->status, res->body};
}

}  // namespace

std::optional<HttpReply> post_json(const ParsedUrl& url, const std::string& body,
                                   const std::vector<std::pair<std::string, std::string>>& headers,
                                   std::chrono::milliseconds timeout, std::string& transport_error) {
  if (url.scheme == "https") {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    httplib::SSLClient cli(url.host, url.port);
    return send(cli, url, body, headers, timeout, transport_error);
#else
    transport_error = "https endpoints need a build with OpenSSL support";
    return std::nullopt;
#endif
  }
  httplib::Client cli(url.host, url.port);
  return send(cli, url, body, headers, timeout, transport_error);
}

}  // namespace opmodel::detail
