#include <doctest.h>

#include "listrank/io.hpp"
#include "test_util.hpp"

using namespace listrank;

TEST_SUITE("io") {

TEST_CASE("corpus loads docid and contents") {
  testutil::TempDir dir;
  const std::string path = dir.path("corpus.jsonl");
  testutil::write_file(path,
                       "{\"docid\": \"d1\", \"contents\": \"first doc\"}\n"
                       "{\"docid\": 17, \"contents\": \"numeric id\"}\n"
                       "\n");
  auto corpus = load_corpus(path);
  CHECK(corpus.size() == 2);
  CHECK(corpus.at("d1") == "first doc");
  CHECK(corpus.at("17") == "numeric id");

  testutil::write_file(path, "{\"docid\": \"d1\", \"contents\": \"a\"}\n"
                             "{\"docid\": \"d1\", \"contents\": \"b\"}\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
  testutil::write_file(path, "{broken\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
  CHECK_THROWS_AS(load_corpus(dir.path("missing.jsonl")), ValidationError);
}

TEST_CASE("queries are tab-separated with optional CR") {
  testutil::TempDir dir;
  const std::string path = dir.path("queries.tsv");
  testutil::write_file(path, "q1\twhat is coffee\r\nq2\ttea history\n");
  auto queries = load_queries(path);
  REQUIRE(queries.size() == 2);
  CHECK(queries[0].query_id() == "q1");
  CHECK(queries[0].body() == "what is coffee");
  CHECK(queries[1].body() == "tea history");
  testutil::write_file(path, "no-tab-here\n");
  CHECK_THROWS_AS(load_queries(path), ValidationError);
}

TEST_CASE("qrels parse whitespace-separated judgments") {
  testutil::TempDir dir;
  const std::string path = dir.path("qrels.txt");
  testutil::write_file(path, "q1 0 d1 2\nq1 0 d2 0\nq2\t0\td1\t1\n");
  Qrels qrels = load_qrels(path);
  CHECK(qrels.relevance("q1", "d1") == 2);
  CHECK(qrels.relevance("q1", "d2") == 0);
  CHECK(qrels.relevance("q2", "d1") == 1);
  testutil::write_file(path, "q1 0 d1\n");
  CHECK_THROWS_AS(load_qrels(path), ValidationError);
  testutil::write_file(path, "q1 0 d1 notanumber\n");
  CHECK_THROWS_AS(load_qrels(path), ValidationError);
}

TEST_CASE("run files round-trip") {
  testutil::TempDir dir;
  const std::string path = dir.path("run.txt");
  std::vector<RunEntry> entries = {{"q1", "d2", 1, 30.0, "tag"},
                                   {"q1", "d1", 2, 29.5, "tag"}};
  save_run(path, entries);
  CHECK(testutil::read_file(path) ==
        "q1 Q0 d2 1 30 tag\n"
        "q1 Q0 d1 2 29.500000 tag\n");
  auto loaded = load_run(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].query_id == "q1");
  CHECK(loaded[0].doc_id == "d2");
  CHECK(loaded[0].rank == 1);
  CHECK(loaded[0].score == 30.0);
  CHECK(loaded[0].tag == "tag");

  testutil::write_file(path, "q1 Q0 d1 notanint 1.0 tag\n");
  CHECK_THROWS_AS(load_run(path), ValidationError);
  testutil::write_file(path, "q1 Q0 d1 1\n");
  CHECK_THROWS_AS(load_run(path), ValidationError);
}

TEST_CASE("assemble_candidates joins run, corpus, and queries") {
  std::vector<RunEntry> run = {{"q2", "d21", 1, 3.0, "t"},
                               {"q1", "d12", 2, 1.0, "t"},
                               {"q1", "d11", 1, 2.0, "t"},
                               {"q2", "d22", 2, 2.5, "t"}};
  std::vector<Query> queries = {Query("q1", "first"), Query("q2", "second"),
                                Query("q3", "unused")};
  std::unordered_map<std::string, std::string> corpus = {
      {"d11", "one one"}, {"d12", "one two"}, {"d21", "two one"},
      {"d22", "two two"}};

  auto lists = assemble_candidates(run, queries, corpus);
  REQUIRE(lists.size() == 2);
  // Query order follows first appearance in the run.
  CHECK(lists[0].query().query_id() == "q2");
  CHECK(lists[1].query().query_id() == "q1");
  // Passages sort by run rank.
  CHECK(lists[1].passages()[0].doc_id() == "d11");
  CHECK(lists[1].passages()[1].doc_id() == "d12");
  CHECK(lists[1].passages()[0].body() == "one one");

  SUBCASE("max_candidates trims each list") {
    auto trimmed = assemble_candidates(run, queries, corpus, 1);
    CHECK(trimmed[0].size() == 1);
    CHECK(trimmed[0].passages()[0].doc_id() == "d21");
  }
  SUBCASE("max_body_bytes truncates at ingestion") {
    auto cut = assemble_candidates(run, queries, corpus, std::nullopt, 3);
    CHECK(cut[0].passages()[0].body() == "two");
  }
  SUBCASE("unknown doc or query fails") {
    std::vector<RunEntry> bad_doc = {{"q1", "missing", 1, 1.0, "t"}};
    CHECK_THROWS_AS(assemble_candidates(bad_doc, queries, corpus),
                    ValidationError);
    std::vector<RunEntry> bad_query = {{"q9", "d11", 1, 1.0, "t"}};
    CHECK_THROWS_AS(assemble_candidates(bad_query, queries, corpus),
                    ValidationError);
  }
}

TEST_CASE("ledger round-trips meta and records") {
  testutil::TempDir dir;
  const std::string path = dir.path("ledger.jsonl");
  UsageLedger ledger({"sliding", "oracle", 20, 10, 10, "shuffle:42", 42});
  UsageRecord r;
  r.query_id = "q1";
  r.pass = 2;
  r.window_start = 11;
  r.window_end = 30;
  r.input_tokens = 1234;
  r.output_tokens = 56;
  r.latency = std::chrono::microseconds(789);
  ledger.add(r);
  save_ledger(path, ledger);

  UsageLedger loaded = load_ledger(path);
  CHECK(loaded.meta().strategy == "sliding");
  CHECK(loaded.meta().model == "oracle");
  CHECK(loaded.meta().window_size == 20);
  CHECK(loaded.meta().step == 10);
  CHECK(loaded.meta().top_k_output == std::optional<int>{10});
  CHECK(loaded.meta().perturbation == "shuffle:42");
  CHECK(loaded.meta().seed == 42);
  REQUIRE(loaded.records().size() == 1);
  CHECK(loaded.records()[0].query_id == "q1");
  CHECK(loaded.records()[0].pass == 2);
  CHECK(loaded.records()[0].window_start == 11);
  CHECK(loaded.records()[0].window_end == 30);
  CHECK(loaded.records()[0].input_tokens == 1234);
  CHECK(loaded.records()[0].output_tokens == 56);
  CHECK(loaded.records()[0].latency.count() == 789);

  SUBCASE("absent output cap stays absent") {
    UsageLedger no_cap({"full", "m", 0, 0, std::nullopt, "none", 0});
    save_ledger(path, no_cap);
    CHECK_FALSE(load_ledger(path).meta().top_k_output.has_value());
  }
  SUBCASE("missing meta line fails") {
    testutil::write_file(path, "{\"type\":\"call\"}\n");
    CHECK_THROWS_AS(load_ledger(path), ValidationError);
  }
}

TEST_CASE("training records round-trip") {
  testutil::TempDir dir;
  const std::string path = dir.path("records.jsonl");
  std::vector<Passage> candidates;
  candidates.emplace_back("d1", "alpha");
  candidates.emplace_back("d2", "beta");
  TrainingRecord record = emit_training_example(
      Query("q1", "find"), candidates, Permutation({2, 1}), 0.5,
      PromptTemplate::listwise_default(), {"teach", "multipass", 9});
  save_training_records(path, {&record, 1});

  auto loaded = load_training_records(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].prompt == record.prompt);
  CHECK(loaded[0].label.text() == "[2] > [1]");
  CHECK(loaded[0].label.alpha() == 0.5);
  CHECK(loaded[0].label.spans().size() == 3);
  CHECK(loaded[0].label.weights() == record.label.weights());
  CHECK(loaded[0].meta.teacher == "teach");
  CHECK(loaded[0].meta.strategy == "multipass");
  CHECK(loaded[0].meta.seed == 9);

  SUBCASE("a tampered span table is rejected") {
    std::string text = testutil::read_file(path);
    const std::string needle = "\"rank\":1,\"weight\":2.0";
    auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "\"rank\":1,\"weight\":1.75");
    testutil::write_file(path, text);
    CHECK_THROWS_AS(load_training_records(path), ValidationError);
  }
  SUBCASE("a tampered label is rejected") {
    std::string text = testutil::read_file(path);
    const std::string needle = "\"label\":\"[2] > [1]\"";
    auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "\"label\":\"[2] >  [1]\"");
    testutil::write_file(path, text);
    CHECK_THROWS_AS(load_training_records(path), ValidationError);
  }
}

TEST_CASE("perturbation strings round-trip") {
  CHECK(perturbation_to_string(Perturbation::none()) == "none");
  CHECK(perturbation_to_string(Perturbation::reverse()) == "reverse");
  CHECK(perturbation_to_string(Perturbation::shuffle(99)) == "shuffle:99");
  CHECK(parse_perturbation("none").kind == Perturbation::Kind::none);
  CHECK(parse_perturbation("reverse").kind == Perturbation::Kind::reverse);
  Perturbation shuffled = parse_perturbation("shuffle:123");
  CHECK(shuffled.kind == Perturbation::Kind::shuffle);
  CHECK(shuffled.seed == 123);
  CHECK_THROWS_AS(parse_perturbation("shuffle:"), ConfigError);
  CHECK_THROWS_AS(parse_perturbation("shuffle:abc"), ConfigError);
  CHECK_THROWS_AS(parse_perturbation("sideways"), ConfigError);
}

TEST_CASE("price tables load from JSON") {
  testutil::TempDir dir;
  const std::string path = dir.path("prices.json");
  testutil::write_file(
      path,
      "{\"model-a\": {\"input_per_1k\": \"0.00015\", \"output_per_1k\": "
      "\"0.0006\"},\n"
      " \"model-b\": {\"input_per_1k\": 0.0025, \"output_per_1k\": 0.01}}\n");
  auto table = load_price_table(path);
  REQUIRE(table.size() == 2);
  CHECK(table.at("model-a").input_price_per_1k == Money::parse("0.00015"));
  CHECK(table.at("model-a").output_price_per_1k == Money::parse("0.0006"));
  CHECK(table.at("model-b").input_price_per_1k == Money::parse("0.0025"));
  testutil::write_file(path, "[]");
  CHECK_THROWS_AS(load_price_table(path), ValidationError);
}

TEST_CASE("builtin prices cover the two supported models") {
  PriceSheet mini = builtin_price("gpt-4o-mini-2024-07-18");
  CHECK(mini.input_price_per_1k == Money::parse("0.00015"));
  CHECK(mini.output_price_per_1k == Money::parse("0.0006"));
  PriceSheet big = builtin_price("gpt-4o-2024-08-06");
  CHECK(big.input_price_per_1k == Money::parse("0.0025"));
  CHECK(big.output_price_per_1k == Money::parse("0.01"));
  CHECK_THROWS_AS(builtin_price("unknown-model"), ConfigError);
}

}  // TEST_SUITE
