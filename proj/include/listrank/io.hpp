#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "listrank/accounting.hpp"
#include "listrank/core.hpp"
#include "listrank/loss_weights.hpp"

namespace listrank {

/// One line of a TREC run file: "qid Q0 docid rank score tag".
struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag = "listrank";
};

/// Corpus is JSON-lines, one {"docid": ..., "contents": ...} object per line.
std::unordered_map<std::string, std::string> load_corpus(
    const std::string& path);

/// Queries are TSV, one "qid<TAB>text" per line.
std::vector<Query> load_queries(const std::string& path);

/// Qrels are whitespace-separated "qid 0 docid rel" lines.
Qrels load_qrels(const std::string& path);

std::vector<RunEntry> load_run(const std::string& path);
void save_run(const std::string& path, std::span<const RunEntry> entries);

/// Joins a run file with its corpus and query texts into per-query candidate
/// lists, ordered by first appearance in the run and by rank within each
/// query. Every referenced doc_id and query_id must resolve. max_body_bytes
/// truncates passage bodies at ingestion.
std::vector<CandidateList> assemble_candidates(
    std::span<const RunEntry> run, const std::vector<Query>& queries,
    const std::unordered_map<std::string, std::string>& corpus,
    std::optional<int> max_candidates = std::nullopt,
    std::optional<int> max_body_bytes = std::nullopt);

/// Ledgers are JSON-lines: one meta line describing the run, then one line
/// per backend call.
void save_ledger(const std::string& path, const UsageLedger& ledger);
UsageLedger load_ledger(const std::string& path);

void save_training_records(const std::string& path,
                           std::span<const TrainingRecord> records);
std::vector<TrainingRecord> load_training_records(const std::string& path);

/// "none", "reverse", or "shuffle:SEED".
std::string perturbation_to_string(const Perturbation& perturbation);
Perturbation parse_perturbation(const std::string& text);

/// Price table file: one JSON object keyed by model name, each entry holding
/// decimal-string prices {"input_per_1k": "0.00015", "output_per_1k": ...}.
std::unordered_map<std::string, PriceSheet> load_price_table(
    const std::string& path);

/// Per-1K prices for the models used throughout: gpt-4o-mini-2024-07-18 and
/// gpt-4o-2024-08-06. Unknown model -> ConfigError.
PriceSheet builtin_price(const std::string& model);

}  // namespace listrank
