#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "listrank/core.hpp"
#include "listrank/prompting.hpp"

namespace listrank {

struct RankRequest {
  std::string prompt;
  std::optional<int> max_output_ids;
  std::string model_name;
};

struct RankResponse {
  std::string raw_text;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::chrono::microseconds latency{0};
};

/// Failure of a ranking call, classified so callers can distinguish "retry
/// was already exhausted" from "the request itself is broken".
class BackendError : public std::runtime_error {
 public:
  enum class Kind { transport, rate_limit, timeout, protocol };

  BackendError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// One listwise ranking call. Implementations must tolerate concurrent
/// rank_window calls from multiple query workers.
class RankBackend {
 public:
  virtual ~RankBackend() = default;
  virtual RankResponse rank_window(const RankRequest& request) = 0;
  virtual std::string name() const = 0;
};

std::uint64_t fnv1a64(std::string_view text);

/// Cache key over everything that determines a response: the prompt, the
/// output cap, and the model.
std::uint64_t request_key(const RankRequest& request);

/// Ranks by hidden per-passage scores, keyed by passage body text. Reads the
/// bodies back out of the rendered prompt ("[i] body" lines), sorts them by
/// score descending with ties kept in window order, and answers in the
/// "[a] > [b]" output format. Deterministic and instantaneous, which makes
/// it the ground truth for strategy tests.
class OracleBackend : public RankBackend {
 public:
  explicit OracleBackend(std::unordered_map<std::string, double> score_by_body,
                         TokenizerHandle tokenizer = TokenizerHandle::heuristic());

  RankResponse rank_window(const RankRequest& request) override;
  std::string name() const override { return "oracle"; }

 private:
  std::unordered_map<std::string, double> score_by_body_;
  TokenizerHandle tokenizer_;
};

/// Independent per-response corruption rates, each in [0,1].
struct FaultSpec {
  double duplicate_rate = 0.0;
  double drop_rate = 0.0;
  double out_of_range_rate = 0.0;
  double prose_rate = 0.0;
  double empty_rate = 0.0;

  void validate() const;
};

/// Applies the faults selected by (spec, seed) to a well-formed response.
/// Pure: the same inputs always produce the same corruption.
RankResponse corrupt(const RankResponse& response, const FaultSpec& spec,
                     std::uint64_t seed);

/// Wraps another backend and corrupts its answers. The per-call seed mixes
/// the configured seed with a hash of the prompt, so corruption is stable
/// under concurrency and call reordering.
class NoisyBackend : public RankBackend {
 public:
  NoisyBackend(std::shared_ptr<RankBackend> inner, FaultSpec spec,
               std::uint64_t seed);

  RankResponse rank_window(const RankRequest& request) override;
  std::string name() const override { return "noisy+" + inner_->name(); }

 private:
  std::shared_ptr<RankBackend> inner_;
  FaultSpec spec_;
  std::uint64_t seed_;
};

/// Record/replay cache over another backend. Responses are persisted as
/// JSON-lines; identical requests never reach the inner backend twice, even
/// when issued concurrently (the first call claims the request, later ones
/// wait on its result). Constructed without an inner backend it replays
/// strictly and treats a miss as an error.
class ReplayBackend : public RankBackend {
 public:
  ReplayBackend(std::shared_ptr<RankBackend> inner, std::string cache_path);

  RankResponse rank_window(const RankRequest& request) override;
  std::string name() const override;
  int live_calls() const { return live_calls_.load(); }
  int size() const;

 private:
  struct Entry {
    RankRequest request;
    RankResponse response;
  };

  const RankResponse* find_locked(std::uint64_t key,
                                  const RankRequest& request) const;
  void load_cache();
  void append_locked(const RankRequest& request, const RankResponse& response);

  std::shared_ptr<RankBackend> inner_;
  std::string cache_path_;
  mutable std::mutex mu_;
  std::unordered_multimap<std::uint64_t, Entry> cache_;
  std::unordered_map<std::string, std::shared_future<RankResponse>> in_flight_;
  std::ofstream out_;
  std::atomic<int> live_calls_{0};
};

}  // namespace listrank
