#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "listrank/core.hpp"

namespace listrank {

/// Describes the run that produced a ledger: which strategy, model, and
/// window geometry. One ledger covers one strategy on one model.
struct LedgerMeta {
  std::string strategy;
  std::string model;
  int window_size = 0;
  int step = 0;
  std::optional<int> top_k_output;
  std::string perturbation = "none";
  std::uint64_t seed = 0;
};

class UsageLedger {
 public:
  UsageLedger() = default;
  explicit UsageLedger(LedgerMeta meta) : meta_(std::move(meta)) {}

  void add(UsageRecord record) { records_.push_back(std::move(record)); }
  void extend(std::span<const UsageRecord> records);

  const LedgerMeta& meta() const { return meta_; }
  const std::vector<UsageRecord>& records() const { return records_; }

 private:
  LedgerMeta meta_;
  std::vector<UsageRecord> records_;
};

Money cost(std::span<const UsageRecord> usage, const PriceSheet& prices);

/// Per-strategy totals over a shared query set. Latency is the sum of
/// per-call latencies, i.e. the time a strictly serialized run would take.
struct StrategyStats {
  std::string name;
  int queries = 0;
  std::int64_t calls = 0;
  std::int64_t passage_evaluations = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t latency_us = 0;
  Money total_cost;

  double calls_per_query() const;
  double evals_per_query() const;
  double latency_per_query_us() const;
};

/// Stat ratios of one strategy over another, cost included. Token and call
/// ratios are exact arithmetic on the totals.
struct StrategyRatios {
  std::string numerator;
  std::string denominator;
  double calls = 0.0;
  double passage_evaluations = 0.0;
  double input_tokens = 0.0;
  double output_tokens = 0.0;
  double latency = 0.0;
  double cost = 0.0;
};

struct StrategyReport {
  std::vector<StrategyStats> strategies;
  std::vector<StrategyRatios> ratios;  // each later strategy vs the first
};

StrategyStats summarize(const UsageLedger& ledger, const PriceSheet& prices);

StrategyRatios ratio_between(const StrategyStats& numerator,
                             const StrategyStats& denominator);

/// Builds the comparison table. All ledgers must cover the same query ids;
/// the first ledger is the ratio baseline.
StrategyReport strategy_report(std::span<const UsageLedger> ledgers,
                               const PriceSheet& prices);

/// Same, with its own price sheet per ledger (mixed-model comparisons).
StrategyReport strategy_report(std::span<const UsageLedger> ledgers,
                               std::span<const PriceSheet> prices);

std::string format_report(const StrategyReport& report);

}  // namespace listrank
