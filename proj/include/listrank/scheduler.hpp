#pragma once

#include <string>
#include <vector>

#include "listrank/backends.hpp"
#include "listrank/core.hpp"
#include "listrank/parsing.hpp"
#include "listrank/prompting.hpp"

namespace listrank {

/// What the strategy had to clean up along the way. A parse failure means a
/// window's output was unusable and that window kept its incoming order.
struct RepairStats {
  int parse_failures = 0;
  int repaired_windows = 0;
};

struct StrategyOutcome {
  Permutation final_order;
  std::vector<UsageRecord> usage;
  int calls = 0;
  int passes = 1;
  RepairStats repairs;
};

/// A strategy aborted mid-query (backend retries exhausted). Carries the
/// usage of the calls that did complete so spend is never lost.
class StrategyError : public std::runtime_error {
 public:
  StrategyError(const std::string& what, std::vector<UsageRecord> usage,
                BackendError::Kind cause)
      : std::runtime_error(what), usage_(std::move(usage)), cause_(cause) {}

  const std::vector<UsageRecord>& usage() const { return usage_; }
  BackendError::Kind cause() const { return cause_; }

 private:
  std::vector<UsageRecord> usage_;
  BackendError::Kind cause_;
};

struct StrategySetup {
  WindowConfig window;
  std::string model_name;
  RepairPolicy repair;
  PromptTemplate prompt = PromptTemplate::listwise_default();
};

/// Ranks the whole candidate list in one backend call. Only top_k_output is
/// read from the window config; window_size and step do not apply. With
/// top_k_output=k < N, positions beyond k keep their original order behind
/// the listed ids.
StrategyOutcome full_rank(const CandidateList& candidates,
                          RankBackend& backend, const StrategySetup& setup);

/// One sliding pass from the tail of the list to the head: rank the last
/// window_size passages, slide forward by step, repeat, clamping the last
/// window to start at position 1. Each window sees passages renumbered from
/// 1 and is reordered in place before the window moves.
StrategyOutcome sliding_window_pass(const CandidateList& candidates,
                                    RankBackend& backend,
                                    const StrategySetup& setup);

/// Repeats sliding passes to build a fully ordered list: each pass fixes its
/// top window_size - step passages and recurses on the rest; once at most
/// window_size passages remain a single window finishes the job.
StrategyOutcome multi_pass_label(const CandidateList& candidates,
                                 RankBackend& backend,
                                 const StrategySetup& setup);

/// Backend calls one sliding pass makes over n candidates.
int sliding_call_count(int n, const WindowConfig& config);

/// Passes and total windows the multi-pass construction makes over n.
int multi_pass_pass_count(int n, const WindowConfig& config);
int multi_pass_window_count(int n, const WindowConfig& config);

}  // namespace listrank
