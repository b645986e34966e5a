#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "listrank/http_backend.hpp"

using namespace listrank;

namespace {

/// Local chat-completions stand-in. Handlers set `reply` per test.
struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread runner;
  std::atomic<int> hits{0};
  std::function<void(const httplib::Request&, httplib::Response&)> reply;

  LocalServer() {
    server.Post("/v1/chat/completions",
                [this](const httplib::Request& req, httplib::Response& res) {
                  hits.fetch_add(1);
                  reply(req, res);
                });
    port = server.bind_to_any_port("127.0.0.1");
    runner = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    runner.join();
  }

  HttpBackendConfig config() const {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.api_key_env = "";
    cfg.max_retries = 2;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.max_backoff = std::chrono::milliseconds(4);
    cfg.timeout = std::chrono::seconds(5);
    return cfg;
  }
};

void answer(httplib::Response& res, const std::string& content,
            bool with_usage = true) {
  nlohmann::json body;
  body["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  if (with_usage) {
    body["usage"] = {{"prompt_tokens", 321}, {"completion_tokens", 21}};
  }
  res.set_content(body.dump(), "application/json");
}

RankRequest simple_request() {
  RankRequest request;
  request.prompt = "rank these: [1] alpha [2] beta";
  return request;
}

}  // namespace

TEST_SUITE("http_backend") {

TEST_CASE("success parses content and server-reported usage") {
  LocalServer server;
  std::string seen_body;
  server.reply = [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    answer(res, "[2] > [1]");
  };
  HttpBackend backend(server.config());
  RankResponse response = backend.rank_window(simple_request());
  CHECK(response.raw_text == "[2] > [1]");
  CHECK(response.input_tokens == 321);
  CHECK(response.output_tokens == 21);
  CHECK(response.latency.count() > 0);

  nlohmann::json body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "gpt-4o-mini-2024-07-18");
  CHECK(body["temperature"] == 0);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == simple_request().prompt);
  CHECK_FALSE(body.contains("max_tokens"));
}

TEST_CASE("request model name overrides the configured one") {
  LocalServer server;
  std::string seen_model;
  server.reply = [&](const httplib::Request& req, httplib::Response& res) {
    seen_model = nlohmann::json::parse(req.body)["model"];
    answer(res, "[1]");
  };
  HttpBackend backend(server.config());
  RankRequest request = simple_request();
  request.model_name = "other-model";
  backend.rank_window(request);
  CHECK(seen_model == "other-model");
}

TEST_CASE("output caps become a max_tokens limit") {
  LocalServer server;
  int seen_max_tokens = 0;
  server.reply = [&](const httplib::Request& req, httplib::Response& res) {
    seen_max_tokens = nlohmann::json::parse(req.body).value("max_tokens", -1);
    answer(res, "[1]");
  };
  HttpBackend backend(server.config());
  RankRequest request = simple_request();
  request.max_output_ids = 10;
  backend.rank_window(request);
  CHECK(seen_max_tokens == 50);
}

TEST_CASE("missing usage falls back to the tokenizer") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    answer(res, "[1] > [2]", false);
  };
  HttpBackend backend(server.config());
  RankResponse response = backend.rank_window(simple_request());
  CHECK(response.input_tokens ==
        TokenizerHandle::heuristic().count(simple_request().prompt));
  CHECK(response.output_tokens == TokenizerHandle::heuristic().count("[1] > [2]"));
}

TEST_CASE("the api key is read from the environment") {
  LocalServer server;
  std::string seen_auth = "unset";
  server.reply = [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    answer(res, "[1]");
  };

  SUBCASE("bearer header when the variable is set") {
    ::setenv("LISTRANK_TEST_KEY", "sk-local-test", 1);
    HttpBackendConfig cfg = server.config();
    cfg.api_key_env = "LISTRANK_TEST_KEY";
    HttpBackend backend(cfg);
    backend.rank_window(simple_request());
    CHECK(seen_auth == "Bearer sk-local-test");
    ::unsetenv("LISTRANK_TEST_KEY");
  }
  SUBCASE("constructing without the variable fails fast") {
    ::unsetenv("LISTRANK_MISSING_KEY");
    HttpBackendConfig cfg = server.config();
    cfg.api_key_env = "LISTRANK_MISSING_KEY";
    CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
  }
  SUBCASE("empty variable name sends no header") {
    HttpBackend backend(server.config());
    backend.rank_window(simple_request());
    CHECK(seen_auth == "");
  }
}

TEST_CASE("transient statuses are retried") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    if (server.hits.load() < 3) {
      res.status = server.hits.load() == 1 ? 500 : 429;
      res.set_content("try later", "text/plain");
    } else {
      answer(res, "[1] > [2]");
    }
  };
  HttpBackend backend(server.config());
  RankResponse response = backend.rank_window(simple_request());
  CHECK(response.raw_text == "[1] > [2]");
  CHECK(server.hits.load() == 3);
}

TEST_CASE("client errors fail immediately") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("{\"error\": \"bad request\"}", "application/json");
  };
  HttpBackend backend(server.config());
  try {
    backend.rank_window(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::protocol);
  }
  CHECK(server.hits.load() == 1);
}

TEST_CASE("retries exhaust into a classified error") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    res.status = 429;
    res.set_content("slow down", "text/plain");
  };
  HttpBackendConfig cfg = server.config();
  cfg.max_retries = 1;
  HttpBackend backend(cfg);
  try {
    backend.rank_window(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::rate_limit);
    CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
  }
  CHECK(server.hits.load() == 2);
}

TEST_CASE("malformed success bodies are protocol errors") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"unexpected\": true}", "application/json");
  };
  HttpBackend backend(server.config());
  try {
    backend.rank_window(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::protocol);
  }
}

TEST_CASE("unreachable hosts raise transport errors") {
  // Port 9 on localhost is reliably closed.
  HttpBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";
  cfg.api_key_env = "";
  cfg.max_retries = 0;
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::seconds(1);
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.rank_window(simple_request()), BackendError);
}

TEST_CASE("config validation") {
  HttpBackendConfig cfg;
  cfg.api_key_env = "";
  cfg.max_concurrent = 0;
  CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
  cfg = HttpBackendConfig{};
  cfg.api_key_env = "";
  cfg.model = "";
  CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
  cfg = HttpBackendConfig{};
  cfg.api_key_env = "";
  cfg.backoff_multiplier = 0.5;
  CHECK_THROWS_AS(HttpBackend{cfg}, ConfigError);
}

TEST_CASE("empty prompts are rejected before any request") {
  LocalServer server;
  server.reply = [&](const httplib::Request&, httplib::Response& res) {
    answer(res, "[1]");
  };
  HttpBackend backend(server.config());
  CHECK_THROWS_AS(backend.rank_window(RankRequest{}), ValidationError);
  CHECK(server.hits.load() == 0);
}

TEST_CASE("rate limiter spaces acquisitions") {
  RateLimiter limiter(std::chrono::milliseconds(5));
  const auto start = std::chrono::steady_clock::now();
  limiter.acquire();
  limiter.acquire();
  limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed >= std::chrono::milliseconds(9));
  RateLimiter unpaced(std::chrono::milliseconds(0));
  unpaced.acquire();  // no sleep, no deadlock
}

}  // TEST_SUITE
