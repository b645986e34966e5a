#include "listrank/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace listrank {

// Anything other than optional whitespace and digits voids a bracket and the
// scan resumes after the opening '['.
std::vector<long long> extract_bracketed_ids(std::string_view raw) {
  std::vector<long long> ids;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < raw.size() && std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    std::size_t digits_begin = j;
    long long value = 0;
    bool overflow = false;
    while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) {
      if (value > 1'000'000'000LL) {
        overflow = true;
      } else {
        value = value * 10 + (raw[j] - '0');
      }
      ++j;
    }
    if (value > 1'000'000'000LL) overflow = true;
    if (j == digits_begin) {
      ++i;
      continue;
    }
    while (j < raw.size() && std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    if (j < raw.size() && raw[j] == ']') {
      ids.push_back(overflow ? 2'000'000'000LL : value);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return ids;
}

namespace {

// Shared repair front half: keep-first dedup, then drop ids outside 1..m.
// Dedup runs on the raw stream so a repeated out-of-range id counts once as
// a duplicate and once as out-of-range, not twice as out-of-range.
std::vector<int> dedup_and_bound(const std::vector<long long>& ids, int m,
                                 ParseReport& report) {
  std::vector<int> kept;
  std::vector<bool> seen_small(static_cast<std::size_t>(m) + 1, false);
  std::vector<long long> seen_large;
  for (long long id : ids) {
    bool duplicate;
    if (id >= 1 && id <= m) {
      duplicate = seen_small[static_cast<std::size_t>(id)];
      seen_small[static_cast<std::size_t>(id)] = true;
    } else {
      duplicate = std::find(seen_large.begin(), seen_large.end(), id) !=
                  seen_large.end();
      if (!duplicate) seen_large.push_back(id);
    }
    if (duplicate) {
      ++report.duplicates_removed;
      continue;
    }
    if (id < 1 || id > m) {
      ++report.out_of_range_dropped;
      continue;
    }
    kept.push_back(static_cast<int>(id));
  }
  report.repaired =
      report.duplicates_removed > 0 || report.out_of_range_dropped > 0;
  return kept;
}

}  // namespace

std::pair<Permutation, ParseReport> parse_ranking(std::string_view raw, int m,
                                                  const RepairPolicy& policy) {
  if (m < 1) throw ParseError("parse_ranking: window size must be positive");
  ParseReport report;
  auto ids = extract_bracketed_ids(raw);
  if (ids.empty()) {
    throw ParseError("parse_ranking: no passage identifiers found in output");
  }
  auto kept = dedup_and_bound(ids, m, report);
  if (static_cast<int>(kept.size()) < m) {
    if (policy.missing == RepairPolicy::Missing::leave_partial) {
      throw ParseError("parse_ranking: output ranks " +
                       std::to_string(kept.size()) + " of " +
                       std::to_string(m) + " passages");
    }
    std::vector<bool> listed(static_cast<std::size_t>(m) + 1, false);
    for (int id : kept) listed[static_cast<std::size_t>(id)] = true;
    for (int id = 1; id <= m; ++id) {
      if (!listed[static_cast<std::size_t>(id)]) {
        kept.push_back(id);
        ++report.missing_appended;
      }
    }
    report.repaired = true;
  }
  return {Permutation(kept), report};
}

std::pair<PartialRanking, ParseReport> parse_partial_ranking(
    std::string_view raw, int m, const RepairPolicy&) {
  if (m < 1) {
    throw ParseError("parse_partial_ranking: window size must be positive");
  }
  ParseReport report;
  auto kept = dedup_and_bound(extract_bracketed_ids(raw), m, report);
  return {PartialRanking(std::move(kept), m), report};
}

}  // namespace listrank
