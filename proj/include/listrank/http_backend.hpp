#pragma once

#include <chrono>
#include <mutex>
#include <semaphore>
#include <string>

#include "listrank/backends.hpp"
#include "listrank/prompting.hpp"

namespace listrank {

/// Connection and retry settings for the chat-completions backend. The API
/// key is read from the environment variable named here, never from flags,
/// so it cannot leak into shell history or process listings. An empty
/// api_key_env means no auth header (local servers).
struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini-2024-07-18";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{16000};
  int max_concurrent = 4;
  std::chrono::milliseconds min_request_interval{0};
  std::chrono::seconds timeout{120};

  void validate() const;
};

/// Paces requests so consecutive acquires are at least min_interval apart.
/// Zero interval disables pacing.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds min_interval);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::milliseconds interval_;
  std::chrono::steady_clock::time_point next_;
};

/// Live backend speaking the chat-completions wire format: one user message
/// per request, max_output_ids translated to a max_tokens cap of ids x 5.
/// Retries transport failures, 408, 429, and 5xx with exponential backoff;
/// other 4xx statuses fail immediately. Token counts come from the server's
/// usage block when present, otherwise from the fallback tokenizer.
class HttpBackend : public RankBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config,
                       TokenizerHandle fallback = TokenizerHandle::heuristic());

  RankResponse rank_window(const RankRequest& request) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  RankResponse attempt(const RankRequest& request, const std::string& body);

  HttpBackendConfig config_;
  TokenizerHandle tokenizer_;
  std::string api_key_;
  RateLimiter limiter_;
  std::counting_semaphore<> slots_;
};

}  // namespace listrank
