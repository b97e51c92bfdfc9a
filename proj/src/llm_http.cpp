#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include "sentinel/llm_gateway.hpp"

namespace sentinel {

HttpResponse HttplibTransport::post(const HttpRequest& request) {
  // Split "scheme://host[:port]" from the path.
  const auto scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidArgument(fmt::format("invalid URL '{}'", request.url));
  }
  const auto path_start = request.url.find('/', scheme_end + 3);
  const std::string origin = request.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

  httplib::Client client(origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [name, value] : request.headers) {
    if (name == "Content-Type") {
      content_type = value;
    } else {
      headers.emplace(name, value);
    }
  }
  auto result = client.Post(path, headers, request.body, content_type);
  if (!result) {
    throw TransportError(fmt::format("HTTP request to {} failed: {}", origin,
                                     httplib::to_string(result.error())));
  }
  return {result->status, result->body};
}

}  // namespace sentinel
