#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "faultline/errors.hpp"
#include "faultline/llm_gateway.hpp"
#include "test_support.hpp"

namespace faultline::llm {
namespace {

using nlohmann::json;

// Local OpenAI-style endpoint; `fail_first` requests answer with `fail_status`.
class MockEndpoint {
 public:
  MockEndpoint(int fail_first = 0, int fail_status = 500) : fail_first_(fail_first), fail_status_(fail_status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      last_auth_ = req.get_header_value("Authorization");
      if (n <= fail_first_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      const json body = json::parse(req.body);
      last_body_ = body;
      json reply;
      reply["choices"] = json::array({{{"message", {{"role", "assistant"},
                                                    {"content", "echo: " + body["messages"].back()["content"].get<std::string>()}}}}});
      reply["usage"] = {{"prompt_tokens", 7}, {"completion_tokens", 3}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  EndpointProfile profile() const {
    EndpointProfile p;
    p.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
    p.model = "mock";
    p.retry.initial_backoff = std::chrono::milliseconds(1);
    p.retry.max_retries = 3;
    p.timeout = std::chrono::milliseconds(5000);
    p.credential_env = "FAULTLINE_TEST_KEY";
    return p;
  }

  int requests() const { return requests_; }
  std::string last_auth() const { return last_auth_; }
  json last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_;
  int fail_status_;
  std::atomic<int> requests_{0};
  std::string last_auth_;
  json last_body_;
};

const std::vector<ChatMessage> kHello = {{"system", "be brief"}, {"user", "hello"}};

TEST(Gateway, CompletesAgainstALocalEndpoint) {
  MockEndpoint mock;
  ::setenv("FAULTLINE_TEST_KEY", "sk-test-123", 1);
  ChatClient client(mock.profile());
  const Completion c = client.complete(kHello);
  EXPECT_EQ(c.text, "echo: hello");
  EXPECT_EQ(c.attempts, 1);
  EXPECT_EQ(c.usage.prompt_tokens, 7u);
  EXPECT_EQ(mock.last_auth(), "Bearer sk-test-123");
  EXPECT_EQ(mock.last_body()["model"], "mock");
  EXPECT_EQ(mock.last_body()["n"], 1);
  EXPECT_EQ(client.usage().calls, 1u);
  EXPECT_EQ(client.id(), "llm:mock");
  ::unsetenv("FAULTLINE_TEST_KEY");
}

TEST(Gateway, RetriesServerErrors) {
  MockEndpoint mock(2, 500);
  ChatClient client(mock.profile());
  const Completion c = client.complete(kHello);
  EXPECT_EQ(c.text, "echo: hello");
  EXPECT_EQ(c.attempts, 3);
  EXPECT_EQ(client.usage().retries, 2u);
  EXPECT_EQ(client.usage().http_requests, 3u);
}

TEST(Gateway, GivesUpAfterTheRetryBudget) {
  MockEndpoint mock(100, 503);
  auto p = mock.profile();
  p.retry.max_retries = 1;
  ChatClient client(p);
  try {
    client.complete(kHello);
    FAIL();
  } catch (const transport_error& e) {
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(mock.requests(), 2);
}

TEST(Gateway, AuthFailureIsFatalWithoutRetry) {
  MockEndpoint mock(100, 401);
  ChatClient client(mock.profile());
  EXPECT_THROW(client.complete(kHello), config_error);
  EXPECT_EQ(mock.requests(), 1);
  EXPECT_EQ(client.usage().retries, 0u);
}

TEST(Gateway, RecordThenReplayWithoutNetwork) {
  const auto path = testing::scratch_dir("cache") / "cache.jsonl";
  EndpointProfile profile;
  {
    MockEndpoint mock;
    profile = mock.profile();
    auto cache = std::make_shared<ReplayCache>(path);
    ChatClient client(profile, cache, CacheMode::record);
    EXPECT_EQ(client.complete(kHello).text, "echo: hello");
    EXPECT_TRUE(client.complete(kHello).from_cache);
    EXPECT_EQ(mock.requests(), 1);
    cache->flush();
  }
  // endpoint is gone; replay must be served from the file
  auto cache = std::make_shared<ReplayCache>(path);
  EXPECT_EQ(cache->size(), 1u);
  ChatClient client(profile, cache, CacheMode::replay);
  const Completion c = client.complete(kHello);
  EXPECT_EQ(c.text, "echo: hello");
  EXPECT_EQ(c.attempts, 0);
  const std::vector<ChatMessage> other = {{"user", "something else"}};
  EXPECT_THROW(client.complete(other), transport_error);
}

TEST(Gateway, CacheKeyTracksSamplingParameters) {
  EndpointProfile a;
  EndpointProfile b = a;
  b.temperature = 0.7;
  EXPECT_EQ(cache_key(a, kHello), cache_key(a, kHello));
  EXPECT_NE(cache_key(a, kHello), cache_key(b, kHello));
}

TEST(Gateway, ProfileValidation) {
  EndpointProfile p;
  p.base_url = "localhost:8000";
  EXPECT_FALSE(validate_profile(p).empty());
  EXPECT_THROW(ChatClient{p}, config_error);
  EXPECT_THROW(ChatClient(EndpointProfile{}, nullptr, CacheMode::replay), config_error);
  EXPECT_FALSE(parse_cache_mode("sometimes"));
}

TEST(Gateway, RedactionRemovesEveryOccurrence) {
  EXPECT_EQ(redact("Bearer sk-1 and sk-1 again", "sk-1"), "Bearer *** and *** again");
  EXPECT_EQ(redact("nothing", ""), "nothing");
}

}  // namespace
}  // namespace faultline::llm
