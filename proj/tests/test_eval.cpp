#include <doctest.h>

#include <cmath>
#include <random>

#include "listrank/eval.hpp"
#include "reference.hpp"

using namespace listrank;

TEST_SUITE("eval") {

TEST_CASE("hand-computed two-document case") {
  std::unordered_map<std::string, int> rels = {{"a", 3}, {"b", 2}, {"c", 0}};
  std::vector<std::string> ranking = {"b", "a", "c"};
  NdcgValue v = ndcg_at_k(ranking, rels, 10);
  const double dcg = 3.0 / std::log2(2.0) + 7.0 / std::log2(3.0);
  const double idcg = 7.0 / std::log2(2.0) + 3.0 / std::log2(3.0);
  CHECK(v.value == doctest::Approx(dcg / idcg).epsilon(1e-14));
  CHECK(v.has_relevant);
}

TEST_CASE("ideal order scores one") {
  std::unordered_map<std::string, int> rels = {{"a", 3}, {"b", 2}, {"c", 1}};
  CHECK(ndcg_at_k(std::vector<std::string>{"a", "b", "c"}, rels, 10).value ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("all relevant docs first in descending grade scores one at k=10") {
  std::unordered_map<std::string, int> rels;
  std::vector<std::string> ranking;
  for (int i = 0; i < 5; ++i) {
    const std::string doc = "rel" + std::to_string(i);
    rels[doc] = 5 - i;
    ranking.push_back(doc);
  }
  for (int i = 0; i < 20; ++i) ranking.push_back("junk" + std::to_string(i));
  CHECK(ndcg_at_k(ranking, rels, 10).value ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ideal ranking counts judged docs missing from the run") {
  // Only "b" (rel 2) was retrieved; the ideal still places "a" (rel 3)
  // first, so NDCG must stay below one.
  std::unordered_map<std::string, int> rels = {{"a", 3}, {"b", 2}};
  NdcgValue v = ndcg_at_k(std::vector<std::string>{"b"}, rels, 10);
  const double idcg = 7.0 / std::log2(2.0) + 3.0 / std::log2(3.0);
  CHECK(v.value == doctest::Approx(3.0 / idcg).epsilon(1e-14));
}

TEST_CASE("cutoff truncates both dcg and the ideal") {
  std::unordered_map<std::string, int> rels = {{"a", 1}, {"b", 1}, {"c", 1}};
  // k=2: only the first two positions count, and the ideal is two docs too.
  NdcgValue v = ndcg_at_k(std::vector<std::string>{"x", "a", "b"}, rels, 2);
  const double dcg = 1.0 / std::log2(3.0);
  const double idcg = 1.0 / std::log2(2.0) + 1.0 / std::log2(3.0);
  CHECK(v.value == doctest::Approx(dcg / idcg).epsilon(1e-14));
}

TEST_CASE("no positive judgments flags the query") {
  std::unordered_map<std::string, int> rels = {{"a", 0}, {"b", 0}};
  NdcgValue v = ndcg_at_k(std::vector<std::string>{"a", "b"}, rels, 10);
  CHECK(v.value == 0.0);
  CHECK_FALSE(v.has_relevant);
  NdcgValue unjudged = ndcg_at_k(std::vector<std::string>{"a"}, {}, 10);
  CHECK_FALSE(unjudged.has_relevant);
}

TEST_CASE("unjudged docs in the ranking contribute nothing") {
  std::unordered_map<std::string, int> rels = {{"a", 2}};
  NdcgValue with_junk =
      ndcg_at_k(std::vector<std::string>{"junk", "a"}, rels, 10);
  const double expected = (3.0 / std::log2(3.0)) / (3.0 / std::log2(2.0));
  CHECK(with_junk.value == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("argument validation") {
  std::unordered_map<std::string, int> rels = {{"a", 1}};
  CHECK_THROWS_AS(ndcg_at_k(std::vector<std::string>{"a"}, rels, 0),
                  ValidationError);
  CHECK_THROWS_AS(ndcg_at_k(std::vector<std::string>{}, rels, 10),
                  ValidationError);
}

TEST_CASE("matches the brute-force reference on random instances") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int judged = 1 + static_cast<int>(rng() % 6);
    std::unordered_map<std::string, int> rels;
    for (int i = 0; i < judged; ++i) {
      rels["doc" + std::to_string(i)] = static_cast<int>(rng() % 4);
    }
    std::vector<std::string> ranking;
    const int ranked = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < ranked; ++i) {
      ranking.push_back("doc" + std::to_string(rng() % 8));
    }
    // Doc ids may repeat in this synthetic ranking; dedup to keep it a run.
    std::vector<std::string> unique;
    for (const auto& doc : ranking) {
      if (std::find(unique.begin(), unique.end(), doc) == unique.end()) {
        unique.push_back(doc);
      }
    }
    const int k = 1 + static_cast<int>(rng() % 10);
    auto expected = reference::brute_force_ndcg(unique, rels, k);
    NdcgValue got = ndcg_at_k(unique, rels, k);
    if (!expected.has_value()) {
      CHECK_FALSE(got.has_relevant);
      CHECK(got.value == 0.0);
    } else {
      CHECK(got.has_relevant);
      CHECK(std::abs(got.value - *expected) <= 1e-12);
    }
  }
}

TEST_CASE("aggregate sorts per-query values and counts unjudged") {
  std::vector<QueryNdcg> per_query = {
      {"q3", 0.5, true}, {"q1", 1.0, true}, {"q2", 0.0, false}};
  NdcgSummary summary = aggregate_ndcg(per_query);
  CHECK(summary.mean == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(summary.zero_relevant_queries == 1);
  CHECK(summary.per_query[0].query_id == "q1");
  CHECK(summary.per_query[1].query_id == "q2");
  CHECK(summary.per_query[2].query_id == "q3");
  CHECK_THROWS_AS(aggregate_ndcg({}), ValidationError);
}

}  // TEST_SUITE
