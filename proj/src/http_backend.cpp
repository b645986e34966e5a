#include "listrank/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace listrank {

namespace {

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

BackendError::Kind kind_for_status(int status) {
  if (status == 429) return BackendError::Kind::rate_limit;
  if (status == 408) return BackendError::Kind::timeout;
  return BackendError::Kind::transport;
}

std::string snippet(const std::string& body) {
  return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

struct SlotGuard {
  std::counting_semaphore<>& slots;
  explicit SlotGuard(std::counting_semaphore<>& s) : slots(s) {
    slots.acquire();
  }
  ~SlotGuard() { slots.release(); }
};

HttpBackendConfig validated(HttpBackendConfig config) {
  config.validate();
  return config;
}

}  // namespace

void HttpBackendConfig::validate() const {
  if (base_url.empty() || path.empty()) {
    throw ConfigError("http backend needs a base_url and path");
  }
  if (model.empty()) throw ConfigError("http backend needs a model name");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (backoff_multiplier < 1.0) {
    throw ConfigError("backoff_multiplier must be >= 1");
  }
  if (max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
  if (initial_backoff.count() < 0 || max_backoff.count() < 0 ||
      min_request_interval.count() < 0 || timeout.count() <= 0) {
    throw ConfigError("http backend durations must be nonnegative");
  }
}

RateLimiter::RateLimiter(std::chrono::milliseconds min_interval)
    : interval_(min_interval), next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard<std::mutex> lock(mu_);
    slot = std::max(std::chrono::steady_clock::now(), next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

HttpBackend::HttpBackend(HttpBackendConfig config, TokenizerHandle fallback)
    : config_(validated(std::move(config))),
      tokenizer_(std::move(fallback)),
      limiter_(config_.min_request_interval),
      slots_(config_.max_concurrent) {
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env +
                        " is not set (it must hold the API key)");
    }
    api_key_ = key;
  }
}

RankResponse HttpBackend::attempt(const RankRequest& request,
                                  const std::string& body) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key_);
  }

  const auto start = std::chrono::steady_clock::now();
  httplib::Result result =
      client.Post(config_.path, headers, body, "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);

  if (!result) {
    throw BackendError(result.error() == httplib::Error::Read ||
                               result.error() == httplib::Error::ConnectionTimeout
                           ? BackendError::Kind::timeout
                           : BackendError::Kind::transport,
                       "request failed: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw BackendError(retryable_status(result->status)
                           ? kind_for_status(result->status)
                           : BackendError::Kind::protocol,
                       "HTTP " + std::to_string(result->status) + ": " +
                           snippet(result->body));
  }

  nlohmann::json payload = nlohmann::json::parse(result->body, nullptr, false);
  if (payload.is_discarded() || !payload.contains("choices") ||
      payload["choices"].empty() ||
      !payload["choices"][0].contains("message")) {
    throw BackendError(BackendError::Kind::protocol,
                       "unexpected response body: " + snippet(result->body));
  }

  RankResponse response;
  response.raw_text =
      payload["choices"][0]["message"].value("content", std::string());
  response.latency = latency;
  if (payload.contains("usage") &&
      payload["usage"].contains("prompt_tokens") &&
      payload["usage"].contains("completion_tokens")) {
    response.input_tokens = payload["usage"]["prompt_tokens"].get<std::uint64_t>();
    response.output_tokens =
        payload["usage"]["completion_tokens"].get<std::uint64_t>();
  } else {
    response.input_tokens = tokenizer_.count(request.prompt);
    response.output_tokens = tokenizer_.count(response.raw_text);
  }
  return response;
}

RankResponse HttpBackend::rank_window(const RankRequest& request) {
  if (request.prompt.empty()) {
    throw ValidationError("rank request has an empty prompt");
  }

  nlohmann::ordered_json body;
  body["model"] =
      request.model_name.empty() ? config_.model : request.model_name;
  body["messages"] = nlohmann::json::array(
      {{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = 0;
  if (request.max_output_ids) {
    // Worst case per id: bracket, up to three digits, bracket, separator.
    body["max_tokens"] = *request.max_output_ids * 5;
  }
  const std::string body_text = body.dump();

  auto backoff = config_.initial_backoff;
  std::string last_error;
  BackendError::Kind last_kind = BackendError::Kind::transport;
  for (int tries = 0; tries <= config_.max_retries; ++tries) {
    if (tries > 0) {
      std::this_thread::sleep_for(backoff);
      auto next = std::chrono::milliseconds(static_cast<std::int64_t>(
          static_cast<double>(backoff.count()) * config_.backoff_multiplier));
      backoff = std::min(next, config_.max_backoff);
    }
    limiter_.acquire();
    try {
      SlotGuard guard(slots_);
      return attempt(request, body_text);
    } catch (const BackendError& e) {
      if (e.kind() == BackendError::Kind::protocol) throw;
      last_error = e.what();
      last_kind = e.kind();
    }
  }
  throw BackendError(last_kind,
                     "gave up after " + std::to_string(config_.max_retries + 1) +
                         " attempts; last error: " + last_error);
}

}  // namespace listrank
