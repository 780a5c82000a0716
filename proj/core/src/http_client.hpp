// SPDX-License-Identifier: Apache-2.0
#pragma once

// Thin blocking HTTP(S) client. Keeps cpp-httplib confined to one TU.

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace uala::detail {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Transport failures (connect, timeout, TLS) throw TransportError with
/// attempts = 1; HTTP error statuses are returned to the caller.
HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const HttpHeaders& headers, std::chrono::seconds timeout);
HttpResponse http_get(const std::string& base_url, const std::string& path_and_query, const HttpHeaders& headers,
                      std::chrono::seconds timeout);

/// Percent-encodes a query parameter value.
std::string url_encode(const std::string& value);

}  // namespace uala::detail
