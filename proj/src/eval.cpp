#include "listrank/eval.hpp"

#include <algorithm>
#include <cmath>

namespace listrank {

namespace {

double gain(int rel) { return std::exp2(static_cast<double>(rel)) - 1.0; }

double discount(int position) {
  return std::log2(static_cast<double>(position) + 1.0);
}

}  // namespace

NdcgValue ndcg_at_k(std::span<const std::string> ranking,
                    const std::unordered_map<std::string, int>& rels, int k) {
  if (k < 1) throw ValidationError("ndcg cutoff must be >= 1");
  if (ranking.empty()) {
    throw ValidationError("cannot score an empty ranking");
  }

  std::vector<int> judged;
  judged.reserve(rels.size());
  for (const auto& [doc_id, rel] : rels) judged.push_back(rel);
  std::sort(judged.begin(), judged.end(), std::greater<int>());

  double idcg = 0.0;
  for (int i = 0; i < k && i < static_cast<int>(judged.size()); ++i) {
    idcg += gain(judged[static_cast<std::size_t>(i)]) / discount(i + 1);
  }
  if (idcg <= 0.0) return {0.0, false};

  double dcg = 0.0;
  for (int i = 0; i < k && i < static_cast<int>(ranking.size()); ++i) {
    auto it = rels.find(ranking[static_cast<std::size_t>(i)]);
    if (it != rels.end()) dcg += gain(it->second) / discount(i + 1);
  }
  return {dcg / idcg, true};
}

NdcgSummary aggregate_ndcg(std::vector<QueryNdcg> per_query) {
  if (per_query.empty()) {
    throw ValidationError("cannot aggregate zero queries");
  }
  std::sort(per_query.begin(), per_query.end(),
            [](const QueryNdcg& a, const QueryNdcg& b) {
              return a.query_id < b.query_id;
            });
  NdcgSummary summary;
  double sum = 0.0;
  for (const QueryNdcg& q : per_query) {
    sum += q.value;
    if (!q.has_relevant) ++summary.zero_relevant_queries;
  }
  summary.mean = sum / static_cast<double>(per_query.size());
  summary.per_query = std::move(per_query);
  return summary;
}

}  // namespace listrank
