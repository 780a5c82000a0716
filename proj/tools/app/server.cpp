// SPDX-License-Identifier: Apache-2.0
#include "server.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "uala/canonical_json.hpp"
#include "uala/report.hpp"

namespace uala::app {

using nlohmann::json;

json escalations_json(const OracleQueue& queue) {
  json out = json::array();
  for (const auto& e : queue.pending()) out.push_back(e.payload);
  return out;
}

json progress_json(const RunProgress& progress, const OracleQueue& queue, std::size_t total) {
  const std::size_t completed = progress.completed.load();
  return {{"completed", completed},
          {"total", total},
          {"pending", queue.size()},
          {"escalated", progress.escalated.load()},
          {"em_so_far", completed == 0 ? json(nullptr) : json(em_percent(progress.correct.load(), completed))}};
}

struct EscalationServer::Impl {
  httplib::Server server;
  OracleQueue& queue;
  const RunProgress& progress;
  std::size_t total;

  Impl(OracleQueue& q, const RunProgress& p, std::size_t n) : queue(q), progress(p), total(n) {}
};

namespace {

void send_json(httplib::Response& res, const json& body) {
  res.set_content(canonical_dump(body), "application/json");
}

}  // namespace

EscalationServer::EscalationServer(OracleQueue& queue, const RunProgress& progress, std::size_t total,
                                   std::filesystem::path console_dir)
    : impl_(std::make_unique<Impl>(queue, progress, total)) {
  auto& s = impl_->server;
  // httplib's default also sets SO_REUSEPORT, which would let a second server
  // share a busy port instead of failing to start.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  Impl* self = impl_.get();
  s.Get("/api/escalations", [self](const httplib::Request&, httplib::Response& res) {
    send_json(res, escalations_json(self->queue));
  });
  s.Post(R"(/api/escalations/([^/]+)/answer)", [self](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("answer") || !body["answer"].is_string()) {
      res.status = 400;
      send_json(res, {{"error", "body must be {\"answer\": string}"}});
      return;
    }
    const std::string id = req.matches[1].str();  // httplib has already URL-decoded the path
    if (!self->queue.submit(id, body["answer"].get<std::string>())) {
      res.status = 404;
      send_json(res, {{"error", fmt::format("no pending escalation for '{}'", id)}});
      return;
    }
    res.status = 204;
  });
  s.Get("/api/runs/current", [self](const httplib::Request&, httplib::Response& res) {
    send_json(res, progress_json(self->progress, self->queue, self->total));
  });
  if (!console_dir.empty() && std::filesystem::is_directory(console_dir)) {
    s.set_mount_point("/", console_dir.string());
  }
}

EscalationServer::~EscalationServer() { stop(); }

int EscalationServer::start(const std::string& host, int port) {
  auto& s = impl_->server;
  const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw StartupError(fmt::format("cannot listen on {}:{}", host, port));
  listener_ = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return bound;
}

void EscalationServer::stop() {
  if (impl_) impl_->server.stop();
  if (listener_.joinable()) listener_.join();
}

}  // namespace uala::app
