#include "listrank/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "listrank/accounting.hpp"
#include "listrank/backends.hpp"
#include "listrank/core.hpp"
#include "listrank/eval.hpp"
#include "listrank/http_backend.hpp"
#include "listrank/io.hpp"
#include "listrank/loss_weights.hpp"
#include "listrank/parsing.hpp"
#include "listrank/prompting.hpp"
#include "listrank/scheduler.hpp"

namespace listrank {

namespace {

std::optional<int> as_optional(int value) {
  return value > 0 ? std::optional<int>(value) : std::nullopt;
}

struct BackendOptions {
  std::string kind = "oracle";
  std::string model;
  std::string qrels_path;
  std::string replay_cache;
  std::string base_url = "https://api.openai.com";
  std::string api_path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  int timeout_s = 120;
  int concurrency = 4;
  int min_interval_ms = 0;
  FaultSpec faults;
  std::uint64_t fault_seed = 1;
};

void add_backend_flags(CLI::App* cmd, BackendOptions& o) {
  cmd->add_option("--backend", o.kind, "oracle, http, or replay")
      ->check(CLI::IsMember({"oracle", "http", "replay"}));
  cmd->add_option("--model", o.model, "model name sent with each request");
  cmd->add_option("--qrels", o.qrels_path,
                  "qrels file; doubles as the oracle backend's hidden scores");
  cmd->add_option("--replay-cache", o.replay_cache,
                  "JSONL transcript; records live responses, replays known ones");
  cmd->add_option("--base-url", o.base_url, "chat API origin");
  cmd->add_option("--api-path", o.api_path, "chat API route");
  cmd->add_option("--api-key-env", o.api_key_env,
                  "environment variable holding the API key (empty disables auth)");
  cmd->add_option("--max-retries", o.max_retries, "live-call retry cap")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--timeout", o.timeout_s, "per-request timeout, seconds")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--concurrency", o.concurrency, "max in-flight live requests")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--min-interval-ms", o.min_interval_ms,
                  "minimum spacing between live requests")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--fault-duplicate", o.faults.duplicate_rate,
                  "chance of duplicating an id in each response")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--fault-drop", o.faults.drop_rate,
                  "chance of dropping an id")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--fault-oor", o.faults.out_of_range_rate,
                  "chance of inserting an out-of-range id")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--fault-prose", o.faults.prose_rate,
                  "chance of wrapping the answer in chatter")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--fault-empty", o.faults.empty_rate,
                  "chance of an empty response")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--fault-seed", o.fault_seed, "fault injection seed");
}

std::string backend_model_name(const BackendOptions& o) {
  if (!o.model.empty()) return o.model;
  if (o.kind == "http") return HttpBackendConfig{}.model;
  return o.kind;
}

bool any_fault(const FaultSpec& f) {
  return f.duplicate_rate > 0 || f.drop_rate > 0 || f.out_of_range_rate > 0 ||
         f.prose_rate > 0 || f.empty_rate > 0;
}

std::shared_ptr<RankBackend> build_backend(
    const BackendOptions& o, std::span<const CandidateList> lists) {
  std::shared_ptr<RankBackend> backend;
  if (o.kind == "oracle") {
    if (o.qrels_path.empty()) {
      throw ConfigError(
          "the oracle backend needs --qrels to supply hidden scores");
    }
    Qrels qrels = load_qrels(o.qrels_path);
    std::unordered_map<std::string, double> scores;
    for (const CandidateList& list : lists) {
      for (const Passage& p : list.passages()) {
        const double rel = static_cast<double>(
            qrels.relevance(list.query().query_id(), p.doc_id()));
        auto [it, inserted] =
            scores.emplace(flatten_passage_body(p.body()), rel);
        if (!inserted && it->second != rel) {
          throw ConfigError(
              "doc '" + p.doc_id() +
              "' shares its body with a differently judged doc; the oracle "
              "backend needs one score per distinct body");
        }
      }
    }
    backend = std::make_shared<OracleBackend>(std::move(scores));
  } else if (o.kind == "http") {
    HttpBackendConfig cfg;
    cfg.base_url = o.base_url;
    cfg.path = o.api_path;
    cfg.model = backend_model_name(o);
    cfg.api_key_env = o.api_key_env;
    cfg.max_retries = o.max_retries;
    cfg.timeout = std::chrono::seconds(o.timeout_s);
    cfg.max_concurrent = o.concurrency;
    cfg.min_request_interval = std::chrono::milliseconds(o.min_interval_ms);
    backend = std::make_shared<HttpBackend>(std::move(cfg));
  } else {
    if (o.replay_cache.empty()) {
      throw ConfigError("--backend replay needs --replay-cache");
    }
    return std::make_shared<ReplayBackend>(nullptr, o.replay_cache);
  }

  if (any_fault(o.faults)) {
    backend = std::make_shared<NoisyBackend>(backend, o.faults, o.fault_seed);
  }
  if (!o.replay_cache.empty()) {
    backend = std::make_shared<ReplayBackend>(backend, o.replay_cache);
  }
  return backend;
}

/// Runs fn(0..count-1) across `workers` threads. The first exception wins;
/// remaining items are abandoned once a failure is seen.
template <typename Fn>
void parallel_for(int workers, std::size_t count, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const int spawn =
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers),
                                             count));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spawn));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(spawn));
  for (int t = 0; t < spawn; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i;
             !failed.load() && (i = next.fetch_add(1)) < count;) {
          fn(i);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
        failed.store(true);
      }
    });
  }
  for (auto& thread : threads) thread.join();
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

struct IngestOptions {
  std::string runs_path;
  std::string corpus_path;
  std::string queries_path;
  int max_candidates = 0;
  int max_passage_bytes = 0;
};

void add_ingest_flags(CLI::App* cmd, IngestOptions& o) {
  cmd->add_option("--runs", o.runs_path, "candidate TREC run file")->required();
  cmd->add_option("--corpus", o.corpus_path, "JSONL corpus {docid, contents}")
      ->required();
  cmd->add_option("--queries", o.queries_path, "TSV queries qid<TAB>text")
      ->required();
  cmd->add_option("--max-candidates", o.max_candidates,
                  "keep only the first K candidates per query")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-passage-bytes", o.max_passage_bytes,
                  "truncate passage bodies at ingestion")
      ->check(CLI::PositiveNumber);
}

std::vector<CandidateList> ingest(const IngestOptions& o) {
  auto corpus = load_corpus(o.corpus_path);
  auto queries = load_queries(o.queries_path);
  auto run = load_run(o.runs_path);
  auto lists = assemble_candidates(run, queries, corpus,
                                   as_optional(o.max_candidates),
                                   as_optional(o.max_passage_bytes));
  if (lists.empty()) throw ValidationError(o.runs_path + " has no entries");
  return lists;
}

struct WindowFlags {
  int window = 20;
  int step = 10;
  int topk = 0;
  std::string perturb = "none";
  std::string template_path;
};

void add_window_flags(CLI::App* cmd, WindowFlags& o) {
  cmd->add_option("--window", o.window, "window size")->check(CLI::PositiveNumber);
  cmd->add_option("--step", o.step, "window step")->check(CLI::PositiveNumber);
  cmd->add_option("--topk-output", o.topk,
                  "ask each call for only the top K ids")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--perturb", o.perturb,
                  "initial-order perturbation: none, reverse, shuffle:SEED");
  cmd->add_option("--template", o.template_path,
                  "prompt template file (line containing {passage} repeats per passage)");
}

StrategySetup make_setup(const WindowFlags& w, const std::string& model,
                         const Perturbation& perturbation) {
  WindowConfig cfg;
  cfg.window_size = w.window;
  cfg.step = w.step;
  cfg.top_k_output = as_optional(w.topk);
  cfg.perturbation = perturbation;
  StrategySetup setup;
  setup.window = cfg;
  setup.model_name = model;
  if (!w.template_path.empty()) {
    setup.prompt = PromptTemplate::from_file(w.template_path);
  }
  return setup;
}

struct RerankOptions {
  std::string strategy = "sliding";
  WindowFlags window;
  IngestOptions ingest;
  BackendOptions backend;
  std::string out_path;
  std::string ledger_path;
  int workers = 1;
};

int do_rerank(const RerankOptions& o, std::ostream& out) {
  auto lists = ingest(o.ingest);
  auto backend = build_backend(o.backend, lists);
  const Perturbation perturbation = parse_perturbation(o.window.perturb);
  const std::string model = backend_model_name(o.backend);
  StrategySetup setup = make_setup(o.window, model, perturbation);

  std::vector<std::optional<StrategyOutcome>> outcomes(lists.size());
  parallel_for(o.workers, lists.size(), [&](std::size_t i) {
    outcomes[i] = o.strategy == "full"
                      ? full_rank(lists[i], *backend, setup)
                      : sliding_window_pass(lists[i], *backend, setup);
  });

  std::vector<RunEntry> output;
  LedgerMeta meta{o.strategy,
                  model,
                  o.window.window,
                  o.window.step,
                  as_optional(o.window.topk),
                  perturbation_to_string(perturbation),
                  perturbation.seed};
  UsageLedger ledger(meta);
  std::int64_t calls = 0;
  int parse_failures = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const StrategyOutcome& outcome = *outcomes[i];
    const CandidateList& list = lists[i];
    const int n = list.size();
    const auto& order = outcome.final_order.order();
    for (int r = 1; r <= n; ++r) {
      output.push_back({list.query().query_id(),
                        list.passages()[static_cast<std::size_t>(order[r - 1] - 1)].doc_id(),
                        r, static_cast<double>(n - r + 1),
                        "listrank-" + o.strategy});
    }
    ledger.extend(outcome.usage);
    calls += outcome.calls;
    parse_failures += outcome.repairs.parse_failures;
  }
  save_run(o.out_path, output);
  const std::string ledger_path =
      o.ledger_path.empty() ? o.out_path + ".ledger.jsonl" : o.ledger_path;
  save_ledger(ledger_path, ledger);

  out << "reranked " << lists.size() << " queries (" << o.strategy << ", "
      << calls << " calls";
  if (parse_failures > 0) {
    out << ", " << parse_failures << " windows kept prior order";
  }
  out << ")\nrun: " << o.out_path << "\nledger: " << ledger_path << '\n';
  return 0;
}

struct LabelOptions {
  std::string passes = "multi";
  double alpha = 1.0;
  std::string teacher;
  WindowFlags window;
  IngestOptions ingest;
  BackendOptions backend;
  std::string out_path;
  std::string ledger_path;
  int workers = 1;
};

int do_make_labels(const LabelOptions& o, std::ostream& out) {
  auto lists = ingest(o.ingest);
  const Perturbation perturbation = parse_perturbation(o.window.perturb);

  // The perturbation is applied here rather than inside the strategy so the
  // emitted prompt shows the exact order the teacher saw.
  std::vector<CandidateList> working;
  working.reserve(lists.size());
  for (const CandidateList& list : lists) {
    working.push_back(perturb_order(list, perturbation));
  }

  auto backend = build_backend(o.backend, working);
  const std::string model = backend_model_name(o.backend);
  const std::string teacher = o.teacher.empty() ? model : o.teacher;
  const std::string strategy = o.passes == "multi" ? "multipass" : "full";
  StrategySetup setup = make_setup(o.window, model, Perturbation::none());

  std::vector<std::optional<StrategyOutcome>> outcomes(working.size());
  std::vector<std::optional<TrainingRecord>> records(working.size());
  parallel_for(o.workers, working.size(), [&](std::size_t i) {
    outcomes[i] = o.passes == "multi"
                      ? multi_pass_label(working[i], *backend, setup)
                      : full_rank(working[i], *backend, setup);
    records[i] = emit_training_example(
        working[i].query(), working[i].passages(), outcomes[i]->final_order,
        o.alpha, setup.prompt,
        Provenance{teacher, strategy, perturbation.seed});
  });

  std::vector<TrainingRecord> flat;
  flat.reserve(records.size());
  for (auto& record : records) flat.push_back(std::move(*record));
  save_training_records(o.out_path, flat);

  LedgerMeta meta{strategy,
                  model,
                  o.window.window,
                  o.window.step,
                  as_optional(o.window.topk),
                  perturbation_to_string(perturbation),
                  perturbation.seed};
  UsageLedger ledger(meta);
  std::int64_t windows = 0;
  for (auto& outcome : outcomes) {
    ledger.extend(outcome->usage);
    windows += outcome->calls;
  }
  const std::string ledger_path =
      o.ledger_path.empty() ? o.out_path + ".ledger.jsonl" : o.ledger_path;
  save_ledger(ledger_path, ledger);

  out << "labeled " << working.size() << " queries (" << strategy << ", "
      << windows << " windows)\nrecords: " << o.out_path
      << "\nledger: " << ledger_path << '\n';
  return 0;
}

struct EvalOptions {
  std::string run_path;
  std::string qrels_path;
  int k = 10;
};

int do_eval(const EvalOptions& o, std::ostream& out) {
  auto run = load_run(o.run_path);
  if (run.empty()) throw ValidationError(o.run_path + " has no entries");
  Qrels qrels = load_qrels(o.qrels_path);

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const RunEntry*>> grouped;
  for (const RunEntry& entry : run) {
    auto [it, inserted] = grouped.try_emplace(entry.query_id);
    if (inserted) order.push_back(entry.query_id);
    it->second.push_back(&entry);
  }

  std::vector<QueryNdcg> per_query;
  per_query.reserve(order.size());
  for (const std::string& qid : order) {
    auto& entries = grouped[qid];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry* a, const RunEntry* b) {
                       return a->rank < b->rank;
                     });
    std::vector<std::string> ranking;
    ranking.reserve(entries.size());
    for (const RunEntry* e : entries) ranking.push_back(e->doc_id);
    NdcgValue value = ndcg_at_k(ranking, qrels.for_query(qid), o.k);
    per_query.push_back({qid, value.value, value.has_relevant});
  }
  NdcgSummary summary = aggregate_ndcg(std::move(per_query));

  char line[128];
  out << "query\tndcg@" << o.k << '\n';
  for (const QueryNdcg& q : summary.per_query) {
    std::snprintf(line, sizeof(line), "%.6f", q.value);
    out << q.query_id << '\t' << line;
    if (!q.has_relevant) out << "\t(no relevant judged docs)";
    out << '\n';
  }
  std::snprintf(line, sizeof(line), "%.6f", summary.mean);
  out << "mean\t" << line << " over " << summary.per_query.size()
      << " queries";
  if (summary.zero_relevant_queries > 0) {
    out << " (" << summary.zero_relevant_queries
        << " with no relevant judged docs)";
  }
  out << '\n';
  return 0;
}

struct CostOptions {
  std::vector<std::string> ledger_paths;
  std::string prices_path;
};

int do_cost(const CostOptions& o, std::ostream& out) {
  std::unordered_map<std::string, PriceSheet> table;
  if (!o.prices_path.empty()) table = load_price_table(o.prices_path);
  auto price_for = [&](const std::string& model) {
    if (!o.prices_path.empty()) {
      auto it = table.find(model);
      if (it == table.end()) {
        throw ValidationError("price table " + o.prices_path +
                              " has no entry for model '" + model + "'");
      }
      return it->second;
    }
    return builtin_price(model);
  };

  std::vector<UsageLedger> ledgers;
  std::vector<PriceSheet> sheets;
  for (const std::string& path : o.ledger_paths) {
    ledgers.push_back(load_ledger(path));
    sheets.push_back(price_for(ledgers.back().meta().model));
  }

  if (ledgers.size() == 1) {
    const StrategyStats stats = summarize(ledgers.front(), sheets.front());
    const LedgerMeta& meta = ledgers.front().meta();
    char line[160];
    out << "strategy " << meta.strategy << ", model " << meta.model << '\n';
    std::snprintf(line, sizeof(line), "calls %lld (%.2f/query over %d queries)\n",
                  static_cast<long long>(stats.calls), stats.calls_per_query(),
                  stats.queries);
    out << line;
    std::snprintf(line, sizeof(line),
                  "passage evaluations %lld (%.2f/query)\n",
                  static_cast<long long>(stats.passage_evaluations),
                  stats.evals_per_query());
    out << line;
    out << "input tokens " << stats.input_tokens << ", output tokens "
        << stats.output_tokens << '\n';
    std::snprintf(line, sizeof(line), "sequential latency %.1f ms/query\n",
                  stats.latency_per_query_us() / 1000.0);
    out << line;
    std::snprintf(
        line, sizeof(line), "cost $%s total, $%.8f/query\n",
        stats.total_cost.to_string().c_str(),
        stats.queries == 0
            ? 0.0
            : static_cast<double>(stats.total_cost.picodollars()) / 1e12 /
                  stats.queries);
    out << line;
  } else {
    out << format_report(strategy_report(ledgers, sheets));
  }
  return 0;
}

struct WeightsOptions {
  std::string perm_text;
  double alpha = 1.0;
};

int do_weights(const WeightsOptions& o, std::ostream& out) {
  std::vector<int> ids;
  for (long long id : extract_bracketed_ids(o.perm_text)) {
    ids.push_back(static_cast<int>(id));
  }
  if (ids.empty()) {
    throw ValidationError("--perm must contain bracketed ids like \"[3] > [1]\"");
  }
  WeightedLabel label{Permutation(std::move(ids)), o.alpha};
  out << label.text() << '\n';
  out << "start  end  kind        rank  weight\n";
  const auto& spans = label.spans();
  const auto& weights = label.weights();
  char line[96];
  for (std::size_t i = 0; i < spans.size(); ++i) {
    std::snprintf(line, sizeof(line), "%5d %4d  %-11s %4d  %.6f\n",
                  spans[i].range.begin, spans[i].range.end,
                  spans[i].kind == LabelSpan::Kind::passage_id ? "passage_id"
                                                               : "separator",
                  spans[i].rank, weights[i]);
    out << line;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"listwise passage reranking toolkit"};
  app.name("lrank");
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  RerankOptions rerank;
  CLI::App* rerank_cmd = app.add_subcommand(
      "rerank", "rerank a candidate run with a listwise strategy");
  rerank_cmd->add_option("--strategy", rerank.strategy, "full or sliding")
      ->check(CLI::IsMember({"full", "sliding"}));
  add_window_flags(rerank_cmd, rerank.window);
  add_ingest_flags(rerank_cmd, rerank.ingest);
  add_backend_flags(rerank_cmd, rerank.backend);
  rerank_cmd->add_option("--out", rerank.out_path, "output run file")
      ->required();
  rerank_cmd->add_option("--ledger", rerank.ledger_path,
                         "usage ledger path (default: OUT.ledger.jsonl)");
  rerank_cmd->add_option("--workers", rerank.workers, "parallel queries")
      ->check(CLI::PositiveNumber);

  LabelOptions labels;
  CLI::App* labels_cmd = app.add_subcommand(
      "make-labels", "build weighted training labels from a teacher backend");
  labels_cmd->add_option("--passes", labels.passes,
                         "multi (sliding passes) or full (one call)")
      ->check(CLI::IsMember({"multi", "full"}));
  labels_cmd->add_option("--alpha", labels.alpha, "separator weight in (0, 1]");
  labels_cmd->add_option("--teacher", labels.teacher,
                         "teacher name recorded in each record (default: model)");
  add_window_flags(labels_cmd, labels.window);
  add_ingest_flags(labels_cmd, labels.ingest);
  add_backend_flags(labels_cmd, labels.backend);
  labels_cmd->add_option("--out", labels.out_path, "output records JSONL")
      ->required();
  labels_cmd->add_option("--ledger", labels.ledger_path,
                         "usage ledger path (default: OUT.ledger.jsonl)");
  labels_cmd->add_option("--workers", labels.workers, "parallel queries")
      ->check(CLI::PositiveNumber);

  EvalOptions eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score a run file against qrels");
  eval_cmd->add_option("--run", eval.run_path, "TREC run file")->required();
  eval_cmd->add_option("--qrels", eval.qrels_path, "qrels file")->required();
  eval_cmd->add_option("--k", eval.k, "NDCG cutoff")->check(CLI::PositiveNumber);

  CostOptions cost;
  CLI::App* cost_cmd =
      app.add_subcommand("cost", "summarize one ledger or compare several");
  cost_cmd->add_option("--ledger", cost.ledger_paths, "ledger file (repeatable)")
      ->required();
  cost_cmd->add_option("--prices", cost.prices_path,
                       "price table JSON (default: built-in model prices)");

  WeightsOptions weights;
  CLI::App* weights_cmd = app.add_subcommand(
      "weights", "show the span table and loss weights for a label");
  weights_cmd->add_option("--perm", weights.perm_text,
                          "label text like \"[3] > [1] > [2]\"")
      ->required();
  weights_cmd->add_option("--alpha", weights.alpha, "separator weight in (0, 1]");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lrank");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*rerank_cmd) return do_rerank(rerank, out);
    if (*labels_cmd) return do_make_labels(labels, out);
    if (*eval_cmd) return do_eval(eval, out);
    if (*cost_cmd) return do_cost(cost, out);
    if (*weights_cmd) return do_weights(weights, out);
  } catch (const StrategyError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const listrank::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << "error: no subcommand selected\n";
  return 1;
}

}  // namespace listrank
