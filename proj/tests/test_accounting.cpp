#include <doctest.h>

#include "listrank/accounting.hpp"

using namespace listrank;

namespace {

UsageRecord call(const std::string& qid, int pass, int start, int end,
                 std::uint64_t in_tokens, std::uint64_t out_tokens,
                 std::int64_t latency_us = 0) {
  UsageRecord r;
  r.query_id = qid;
  r.pass = pass;
  r.window_start = start;
  r.window_end = end;
  r.input_tokens = in_tokens;
  r.output_tokens = out_tokens;
  r.latency = std::chrono::microseconds(latency_us);
  return r;
}

PriceSheet mini_prices() {
  return {"gpt-4o-mini-2024-07-18", Money::parse("0.00015"),
          Money::parse("0.00060")};
}

UsageLedger sliding_ledger() {
  UsageLedger ledger({"sliding", "m", 20, 10, std::nullopt, "none", 0});
  ledger.add(call("q1", 1, 81, 100, 1000, 100, 500));
  ledger.add(call("q1", 1, 71, 90, 1000, 100, 500));
  ledger.add(call("q2", 1, 81, 100, 2000, 200, 1000));
  return ledger;
}

}  // namespace

TEST_SUITE("accounting") {

TEST_CASE("cost charges input and output at their own rates") {
  std::vector<UsageRecord> usage = {call("q1", 1, 1, 20, 1000, 200)};
  Money total = cost(usage, mini_prices());
  // 1000 input tokens at 0.00015/1K plus 200 output at 0.00060/1K.
  CHECK(total == Money::parse("0.00015") + Money::parse("0.00012"));
  CHECK(cost({}, mini_prices()).picodollars() == 0);
}

TEST_CASE("summarize aggregates per-strategy totals") {
  StrategyStats stats = summarize(sliding_ledger(), mini_prices());
  CHECK(stats.name == "sliding");
  CHECK(stats.queries == 2);
  CHECK(stats.calls == 3);
  CHECK(stats.passage_evaluations == 60);
  CHECK(stats.input_tokens == 4000);
  CHECK(stats.output_tokens == 400);
  CHECK(stats.latency_us == 2000);
  CHECK(stats.calls_per_query() == doctest::Approx(1.5));
  CHECK(stats.evals_per_query() == doctest::Approx(30.0));
  CHECK(stats.latency_per_query_us() == doctest::Approx(1000.0));
  CHECK(stats.total_cost ==
        Money::parse("0.00015").per_1k_times(4000) +
            Money::parse("0.00060").per_1k_times(400));
}

TEST_CASE("ratios divide matching totals") {
  UsageLedger full({"full", "m", 0, 0, std::nullopt, "none", 0});
  full.add(call("q1", 1, 1, 100, 3000, 150, 2000));
  full.add(call("q2", 1, 1, 100, 3000, 150, 2000));
  StrategyStats a = summarize(full, mini_prices());
  StrategyStats b = summarize(sliding_ledger(), mini_prices());
  StrategyRatios r = ratio_between(a, b);
  CHECK(r.numerator == "full");
  CHECK(r.denominator == "sliding");
  CHECK(r.calls == doctest::Approx(2.0 / 3.0));
  CHECK(r.passage_evaluations == doctest::Approx(200.0 / 60.0));
  CHECK(r.input_tokens == doctest::Approx(6000.0 / 4000.0));
  CHECK(r.output_tokens == doctest::Approx(300.0 / 400.0));
  CHECK(r.latency == doctest::Approx(4000.0 / 2000.0));
  CHECK(r.cost > 0.0);
}

TEST_CASE("report requires a shared query set") {
  UsageLedger full({"full", "m", 0, 0, std::nullopt, "none", 0});
  full.add(call("q1", 1, 1, 100, 3000, 150));
  full.add(call("q3", 1, 1, 100, 3000, 150));
  std::vector<UsageLedger> ledgers = {sliding_ledger(), full};
  CHECK_THROWS_AS(strategy_report(ledgers, mini_prices()), ValidationError);
}

TEST_CASE("report formats one row per strategy plus ratios") {
  UsageLedger full({"full", "m", 0, 0, std::nullopt, "none", 0});
  full.add(call("q1", 1, 1, 100, 3000, 150, 2000));
  full.add(call("q2", 1, 1, 100, 3000, 150, 2000));
  std::vector<UsageLedger> ledgers = {sliding_ledger(), full};
  StrategyReport report = strategy_report(ledgers, mini_prices());
  REQUIRE(report.strategies.size() == 2);
  REQUIRE(report.ratios.size() == 1);
  CHECK(report.ratios[0].numerator == "full");
  std::string text = format_report(report);
  CHECK(text.find("sliding") != std::string::npos);
  CHECK(text.find("full/sliding") != std::string::npos);
}

TEST_CASE("mixed-model reports price each ledger separately") {
  UsageLedger mini({"sliding", "gpt-4o-mini-2024-07-18", 20, 10, std::nullopt,
                    "none", 0});
  mini.add(call("q1", 1, 1, 20, 1000, 0));
  UsageLedger big({"full", "gpt-4o-2024-08-06", 0, 0, std::nullopt, "none", 0});
  big.add(call("q1", 1, 1, 20, 1000, 0));
  std::vector<UsageLedger> ledgers = {mini, big};
  std::vector<PriceSheet> sheets = {
      mini_prices(),
      {"gpt-4o-2024-08-06", Money::parse("0.0025"), Money::parse("0.0100")}};
  StrategyReport report = strategy_report(ledgers, sheets);
  // Same token counts, but gpt-4o costs 0.0025/0.00015 times as much.
  CHECK(report.ratios[0].cost ==
        doctest::Approx(0.0025 / 0.00015).epsilon(1e-9));
}

TEST_CASE("extend appends a batch of records") {
  UsageLedger ledger({"s", "m", 20, 10, std::nullopt, "none", 0});
  std::vector<UsageRecord> batch = {call("q1", 1, 1, 5, 10, 1),
                                    call("q1", 1, 6, 10, 10, 1)};
  ledger.extend(batch);
  CHECK(ledger.records().size() == 2);
}

}  // TEST_SUITE
