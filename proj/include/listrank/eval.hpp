#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "listrank/core.hpp"

namespace listrank {

/// NDCG for one query. has_relevant is false when the qrels judge nothing
/// positive for the query; such queries score 0 but should be reported as
/// unjudged rather than as failures.
struct NdcgValue {
  double value = 0.0;
  bool has_relevant = true;
};

struct QueryNdcg {
  std::string query_id;
  double value = 0.0;
  bool has_relevant = true;
};

struct NdcgSummary {
  double mean = 0.0;
  int zero_relevant_queries = 0;
  std::vector<QueryNdcg> per_query;  // sorted by query id
};

/// Gain is exponential (2^rel - 1) with a log2(i+1) discount; docs absent
/// from the qrels contribute nothing. The ideal ordering ranks every judged
/// doc for the query, not just the docs present in the ranking.
NdcgValue ndcg_at_k(std::span<const std::string> ranking,
                    const std::unordered_map<std::string, int>& rels, int k);

NdcgSummary aggregate_ndcg(std::vector<QueryNdcg> per_query);

}  // namespace listrank
