#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "listrank/core.hpp"

namespace listrank {

/// Raised when raw model output cannot be turned into a ranking at all; the
/// caller decides whether to retry or fall back to identity order.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How malformed output gets repaired. Duplicate ids keep their first
/// mention, out-of-range ids are dropped, and text outside bracketed
/// integers is ignored; those behaviors are fixed. Only the handling of
/// unmentioned ids is configurable.
struct RepairPolicy {
  enum class Missing { append_in_original_order, leave_partial };
  Missing missing = Missing::append_in_original_order;
};

struct ParseReport {
  bool repaired = false;
  int duplicates_removed = 0;
  int out_of_range_dropped = 0;
  int missing_appended = 0;
};

/// All bracketed integers in raw text, in order of appearance. Whitespace
/// inside the brackets is tolerated; values too large for an int come back
/// clamped to 2e9 so they still register as out-of-range mentions.
std::vector<long long> extract_bracketed_ids(std::string_view raw);

/// Full-mode parse: always yields a valid permutation over 1..m, or throws
/// ParseError when the text has no usable ids (or is incomplete under
/// leave_partial).
std::pair<Permutation, ParseReport> parse_ranking(std::string_view raw, int m,
                                                  const RepairPolicy& policy);

/// Partial-mode parse: distinct in-range ids in output order. Never appends
/// missing ids; an id-free text yields an empty listing.
std::pair<PartialRanking, ParseReport> parse_partial_ranking(
    std::string_view raw, int m, const RepairPolicy& policy);

}  // namespace listrank
