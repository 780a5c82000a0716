// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include <gtest/gtest.h>

#include "app/server.hpp"
#include "support/test_util.hpp"
#include "uala/llm_gateway.hpp"

namespace uala::app {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;

TEST(Server, EscalationEndpoints) {
  OracleQueue queue;
  RunProgress progress;
  EscalationServer server(queue, progress, 20);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/api/escalations");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), json::array());

  queue.enqueue("ep 1", {{"episode_id", "ep 1"}, {"question", "Who?"}});
  res = cli.Get("/api/escalations");
  EXPECT_EQ(json::parse(res->body)[0]["question"], "Who?");

  res = cli.Get("/api/runs/current");
  auto cur = json::parse(res->body);
  EXPECT_EQ(cur["pending"], 1);
  EXPECT_EQ(cur["total"], 20);
  EXPECT_TRUE(cur["em_so_far"].is_null());

  EXPECT_EQ(cli.Post("/api/escalations/ep%201/answer", "{}", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/api/escalations/ep%201/answer", "not json", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/api/escalations/other/answer", R"({"answer":"x"})", "application/json")->status, 404);

  std::optional<std::string> got;
  std::thread waiter([&] { got = queue.wait("ep 1", 5s); });
  EXPECT_EQ(cli.Post("/api/escalations/ep%201/answer", R"({"answer":"Nixon"})", "application/json")->status, 204);
  waiter.join();
  EXPECT_EQ(got, "Nixon");
  EXPECT_EQ(cli.Post("/api/escalations/ep%201/answer", R"({"answer":"again"})", "application/json")->status, 404);

  progress.completed = 3;
  progress.correct = 2;
  cur = json::parse(cli.Get("/api/runs/current")->body);
  EXPECT_EQ(cur["em_so_far"], 66.7);
  server.stop();
}

TEST(Server, BusyPortIsAStartupError) {
  OracleQueue queue;
  RunProgress progress;
  EscalationServer first(queue, progress, 0);
  const int port = first.start("127.0.0.1", 0);
  EscalationServer second(queue, progress, 0);
  EXPECT_THROW(second.start("127.0.0.1", port), StartupError);
}

// A stand-in completion endpoint: fails once with 503, then answers.
TEST(LiveProvider, TalksToACompletionsEndpoint) {
  httplib::Server fake;
  std::atomic<int> hits{0};
  std::string auth;
  json seen;
  fake.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    seen = json::parse(req.body);
    res.set_content(R"({"choices":[{"text":" Nixon","finish_reason":"stop",
      "logprobs":{"tokens":[" Nixon"],"token_logprobs":[-0.3]}}]})",
                    "application/json");
  });
  const int port = fake.bind_to_any_port("127.0.0.1");
  std::thread t([&] { fake.listen_after_bind(); });
  fake.wait_until_ready();

  ::setenv("UALA_TEST_LLM_KEY", "k-123", 1);
  LiveProviderConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "m";
  cfg.api_key_env = "UALA_TEST_LLM_KEY";
  GatewayOptions opts;
  opts.backoff_base = 0ms;
  LlmGateway gw(std::make_shared<LiveProvider>(cfg), opts);
  CompletionRequest req;
  req.prompt = "Question: Who?\n";
  req.stop = {"\nQuestion:"};
  const auto c = gw.complete(req, UsageStage::Base);
  fake.stop();
  t.join();

  EXPECT_EQ(c.text, " Nixon");
  EXPECT_EQ(c.token_logprobs, std::vector<double>{-0.3});
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(auth, "Bearer k-123");
  EXPECT_EQ(seen["model"], "m");
  EXPECT_EQ(seen["prompt"], "Question: Who?\n");
}

}  // namespace
}  // namespace uala::app
