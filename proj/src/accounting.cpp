#include "listrank/accounting.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace listrank {

namespace {

double per_query(std::int64_t total, int queries) {
  return queries == 0 ? 0.0
                      : static_cast<double>(total) / static_cast<double>(queries);
}

double ratio(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

std::set<std::string> query_set(const UsageLedger& ledger) {
  std::set<std::string> ids;
  for (const UsageRecord& r : ledger.records()) ids.insert(r.query_id);
  return ids;
}

}  // namespace

void UsageLedger::extend(std::span<const UsageRecord> records) {
  records_.insert(records_.end(), records.begin(), records.end());
}

Money cost(std::span<const UsageRecord> usage, const PriceSheet& prices) {
  prices.validate();
  std::uint64_t input = 0;
  std::uint64_t output = 0;
  for (const UsageRecord& r : usage) {
    input += r.input_tokens;
    output += r.output_tokens;
  }
  return prices.input_price_per_1k.per_1k_times(input) +
         prices.output_price_per_1k.per_1k_times(output);
}

double StrategyStats::calls_per_query() const {
  return per_query(calls, queries);
}

double StrategyStats::evals_per_query() const {
  return per_query(passage_evaluations, queries);
}

double StrategyStats::latency_per_query_us() const {
  return per_query(latency_us, queries);
}

StrategyStats summarize(const UsageLedger& ledger, const PriceSheet& prices) {
  StrategyStats stats;
  stats.name = ledger.meta().strategy;
  stats.queries = static_cast<int>(query_set(ledger).size());
  for (const UsageRecord& r : ledger.records()) {
    ++stats.calls;
    stats.passage_evaluations += r.window_end - r.window_start + 1;
    stats.input_tokens += static_cast<std::int64_t>(r.input_tokens);
    stats.output_tokens += static_cast<std::int64_t>(r.output_tokens);
    stats.latency_us += r.latency.count();
  }
  stats.total_cost = cost(ledger.records(), prices);
  return stats;
}

StrategyRatios ratio_between(const StrategyStats& numerator,
                             const StrategyStats& denominator) {
  StrategyRatios r;
  r.numerator = numerator.name;
  r.denominator = denominator.name;
  r.calls = ratio(static_cast<double>(numerator.calls),
                  static_cast<double>(denominator.calls));
  r.passage_evaluations =
      ratio(static_cast<double>(numerator.passage_evaluations),
            static_cast<double>(denominator.passage_evaluations));
  r.input_tokens = ratio(static_cast<double>(numerator.input_tokens),
                         static_cast<double>(denominator.input_tokens));
  r.output_tokens = ratio(static_cast<double>(numerator.output_tokens),
                          static_cast<double>(denominator.output_tokens));
  r.latency = ratio(static_cast<double>(numerator.latency_us),
                    static_cast<double>(denominator.latency_us));
  r.cost = ratio(static_cast<double>(numerator.total_cost.picodollars()),
                 static_cast<double>(denominator.total_cost.picodollars()));
  return r;
}

StrategyReport strategy_report(std::span<const UsageLedger> ledgers,
                               const PriceSheet& prices) {
  std::vector<PriceSheet> sheets(ledgers.size(), prices);
  return strategy_report(ledgers, sheets);
}

StrategyReport strategy_report(std::span<const UsageLedger> ledgers,
                               std::span<const PriceSheet> prices) {
  if (ledgers.empty()) {
    throw ValidationError("no ledgers to report on");
  }
  if (prices.size() != ledgers.size()) {
    throw ValidationError("need one price sheet per ledger");
  }
  auto baseline_queries = query_set(ledgers.front());
  for (const UsageLedger& ledger : ledgers.subspan(1)) {
    if (query_set(ledger) != baseline_queries) {
      throw ValidationError("ledger for '" + ledger.meta().strategy +
                            "' covers a different query set than '" +
                            ledgers.front().meta().strategy + "'");
    }
  }
  StrategyReport report;
  for (std::size_t i = 0; i < ledgers.size(); ++i) {
    report.strategies.push_back(summarize(ledgers[i], prices[i]));
  }
  for (std::size_t i = 1; i < report.strategies.size(); ++i) {
    report.ratios.push_back(
        ratio_between(report.strategies[i], report.strategies.front()));
  }
  return report;
}

std::string format_report(const StrategyReport& report) {
  std::ostringstream out;
  out << "strategy            queries  calls/q  evals/q  in_tokens  "
         "out_tokens  latency_ms/q  cost\n";
  char line[256];
  for (const StrategyStats& s : report.strategies) {
    std::snprintf(line, sizeof(line),
                  "%-18s %8d %8.2f %8.2f %10lld %11lld %13.1f  $%s\n",
                  s.name.c_str(), s.queries, s.calls_per_query(),
                  s.evals_per_query(),
                  static_cast<long long>(s.input_tokens),
                  static_cast<long long>(s.output_tokens),
                  s.latency_per_query_us() / 1000.0,
                  s.total_cost.to_string().c_str());
    out << line;
  }
  for (const StrategyRatios& r : report.ratios) {
    std::snprintf(line, sizeof(line),
                  "%s/%s: calls %.3f, evals %.3f, in_tokens %.3f, "
                  "out_tokens %.3f, latency %.3f, cost %.3f\n",
                  r.numerator.c_str(), r.denominator.c_str(), r.calls,
                  r.passage_evaluations, r.input_tokens, r.output_tokens,
                  r.latency, r.cost);
    out << line;
  }
  return out.str();
}

}  // namespace listrank
