// SPDX-License-Identifier: Apache-2.0
#include "http_client.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "uala/error.hpp"

namespace uala::detail {

namespace {

httplib::Client make_client(const std::string& base_url, std::chrono::seconds timeout) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

httplib::Headers to_headers(const HttpHeaders& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

HttpResponse finish(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw TransportError(fmt::format("{}: {}", what, httplib::to_string(res.error())), 1);
  }
  return {res->status, res->body};
}

}  // namespace

HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const HttpHeaders& headers, std::chrono::seconds timeout) {
  auto cli = make_client(base_url, timeout);
  return finish(cli.Post(path, to_headers(headers), body, "application/json"), "POST " + base_url + path);
}

HttpResponse http_get(const std::string& base_url, const std::string& path_and_query, const HttpHeaders& headers,
                      std::chrono::seconds timeout) {
  auto cli = make_client(base_url, timeout);
  return finish(cli.Get(path_and_query, to_headers(headers)), "GET " + base_url);
}

std::string url_encode(const std::string& value) { return httplib::detail::encode_query_param(value); }

}  // namespace uala::detail
