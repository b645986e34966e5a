#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace listrank {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A retrieved passage. The body is stored verbatim; any cleanup happens at
/// ingestion time.
class Passage {
 public:
  Passage(std::string doc_id, std::string body,
          std::optional<std::uint64_t> token_estimate = std::nullopt);

  const std::string& doc_id() const { return doc_id_; }
  const std::string& body() const { return body_; }
  const std::optional<std::uint64_t>& token_estimate() const {
    return token_estimate_;
  }

 private:
  std::string doc_id_;
  std::string body_;
  std::optional<std::uint64_t> token_estimate_;
};

class Query {
 public:
  Query(std::string query_id, std::string body);

  const std::string& query_id() const { return query_id_; }
  const std::string& body() const { return body_; }

 private:
  std::string query_id_;
  std::string body_;
};

/// A query plus its retrieved passages in retrieval order. Doc ids must be
/// pairwise distinct.
class CandidateList {
 public:
  CandidateList(Query query, std::vector<Passage> passages);

  const Query& query() const { return query_; }
  const std::vector<Passage>& passages() const { return passages_; }
  int size() const { return static_cast<int>(passages_.size()); }

 private:
  Query query_;
  std::vector<Passage> passages_;
};

/// A bijection on 1..n. order()[i] is the 1-based source position of the item
/// ranked at position i+1.
class Permutation {
 public:
  explicit Permutation(std::vector<int> order);
  static Permutation identity(int n);

  const std::vector<int>& order() const { return order_; }
  int size() const { return static_cast<int>(order_.size()); }

  bool operator==(const Permutation& other) const = default;

 private:
  std::vector<int> order_;
};

/// A ranked prefix over n items: distinct 1-based positions in output order,
/// the rest implicitly unranked.
class PartialRanking {
 public:
  PartialRanking(std::vector<int> listed, int n);

  const std::vector<int>& listed() const { return listed_; }
  int total() const { return n_; }

 private:
  std::vector<int> listed_;
  int n_;
};

struct Perturbation {
  enum class Kind { none, shuffle, reverse };

  Kind kind = Kind::none;
  std::uint64_t seed = 0;

  static Perturbation none() { return {}; }
  static Perturbation shuffle(std::uint64_t seed) {
    return {Kind::shuffle, seed};
  }
  static Perturbation reverse() { return {Kind::reverse, 0}; }
};

/// Window scheduling parameters. The defaults match the common top-100
/// listwise setup (window 20, step 10).
struct WindowConfig {
  int window_size = 20;
  int step = 10;
  std::optional<int> top_k_output;
  Perturbation perturbation;

  /// Throws ConfigError unless 1 <= step <= window_size and, when set,
  /// 1 <= top_k_output <= window_size.
  void validate() const;
};

/// Graded relevance judgments keyed by (query_id, doc_id). Absent pairs mean
/// relevance 0.
class Qrels {
 public:
  void add(const std::string& query_id, const std::string& doc_id,
           int relevance);
  int relevance(const std::string& query_id, const std::string& doc_id) const;
  const std::unordered_map<std::string, int>& for_query(
      const std::string& query_id) const;
  std::vector<std::string> query_ids() const;
  bool has_query(const std::string& query_id) const;

 private:
  std::map<std::string, std::unordered_map<std::string, int>> judged_;
};

/// Exact decimal money, stored in picodollars. Per-1K token prices with up to
/// nine decimal places divide into exact per-token amounts.
class Money {
 public:
  Money() = default;

  static Money parse(const std::string& decimal);
  static Money from_picodollars(std::int64_t pico);
  static Money from_dollars(double dollars);

  std::int64_t picodollars() const { return pico_; }
  std::string to_string() const;

  Money operator+(const Money& other) const;
  Money& operator+=(const Money& other);
  auto operator<=>(const Money& other) const = default;

  /// Treats this amount as a price per 1K tokens and charges `tokens` at it,
  /// exactly. Requires the per-token amount to be a whole number of
  /// picodollars.
  Money per_1k_times(std::uint64_t tokens) const;

 private:
  std::int64_t pico_ = 0;  // 1e-12 dollars
};

struct PriceSheet {
  std::string model_name;
  Money input_price_per_1k;
  Money output_price_per_1k;

  void validate() const;  // prices must be >= 0
};

/// One backend call's worth of bookkeeping. Window positions are 1-based and
/// inclusive; `pass` numbers multi-pass rounds from 1.
struct UsageRecord {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::chrono::microseconds latency{0};
  int window_start = 0;
  int window_end = 0;
  int pass = 1;
  std::string query_id;
};

/// Reorders candidates so that output position i holds input passage
/// perm[i]. Throws ValidationError on length mismatch.
CandidateList apply_permutation(const CandidateList& candidates,
                                const Permutation& perm);

/// The permutation perturb_order applies for a list of n items.
Permutation perturbation_permutation(int n, const Perturbation& perturbation);

/// Applies the configured initial-order perturbation. Shuffles are
/// reproducible from the seed alone, independent of platform.
CandidateList perturb_order(const CandidateList& candidates,
                            const Perturbation& perturbation);

}  // namespace listrank
