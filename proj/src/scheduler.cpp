#include "listrank/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <utility>

namespace listrank {

namespace {

void check_truncation_for_sliding(const WindowConfig& cfg) {
  cfg.validate();
  if (cfg.top_k_output && *cfg.top_k_output < cfg.step) {
    throw ConfigError(
        "top_k_output must be >= step for sliding windows, got k=" +
        std::to_string(*cfg.top_k_output) + " step=" +
        std::to_string(cfg.step));
  }
}

// New order for one window of size m, derived from raw backend output. In
// truncated mode the unlisted window members follow the listed ones in their
// prior relative order; in full mode an unparseable output degrades to the
// prior order and is counted as a parse failure.
std::vector<int> window_order_from(const std::string& raw, int m,
                                   const StrategySetup& setup,
                                   RepairStats& repairs) {
  const auto& k = setup.window.top_k_output;
  if (k && *k < m) {
    auto [partial, report] = parse_partial_ranking(raw, m, setup.repair);
    if (report.repaired) ++repairs.repaired_windows;
    std::vector<int> order = partial.listed();
    std::vector<bool> listed(static_cast<std::size_t>(m) + 1, false);
    for (int id : order) listed[static_cast<std::size_t>(id)] = true;
    for (int id = 1; id <= m; ++id) {
      if (!listed[static_cast<std::size_t>(id)]) order.push_back(id);
    }
    return order;
  }
  try {
    auto [perm, report] = parse_ranking(raw, m, setup.repair);
    if (report.repaired) ++repairs.repaired_windows;
    return perm.order();
  } catch (const ParseError&) {
    ++repairs.parse_failures;
    std::vector<int> identity(static_cast<std::size_t>(m));
    std::iota(identity.begin(), identity.end(), 1);
    return identity;
  }
}

// Ranks current[lo-1..hi-1] (1-based positions into `current`) in place.
void run_window(const CandidateList& candidates, std::vector<int>& current,
                int lo, int hi, int pass_no, RankBackend& backend,
                const StrategySetup& setup, std::vector<UsageRecord>& usage,
                int& calls, RepairStats& repairs) {
  const int m = hi - lo + 1;
  std::vector<Passage> window;
  window.reserve(static_cast<std::size_t>(m));
  for (int p = lo; p <= hi; ++p) {
    window.push_back(
        candidates.passages()[static_cast<std::size_t>(current[p - 1] - 1)]);
  }

  RankRequest request{setup.prompt.render(candidates.query(), window),
                      setup.window.top_k_output, setup.model_name};
  RankResponse response = backend.rank_window(request);
  ++calls;
  usage.push_back({response.input_tokens, response.output_tokens,
                   response.latency, lo, hi, pass_no,
                   candidates.query().query_id()});

  if (m == 1) return;
  std::vector<int> order = window_order_from(response.raw_text, m, setup,
                                             repairs);
  std::vector<int> slice(current.begin() + (lo - 1), current.begin() + hi);
  for (int i = 0; i < m; ++i) {
    current[static_cast<std::size_t>(lo - 1 + i)] =
        slice[static_cast<std::size_t>(order[static_cast<std::size_t>(i)] - 1)];
  }
}

StrategyOutcome sliding_impl(const CandidateList& candidates,
                             RankBackend& backend, const StrategySetup& setup,
                             int pass_no) {
  const int n = candidates.size();
  const WindowConfig& cfg = setup.window;
  std::vector<int> current(static_cast<std::size_t>(n));
  std::iota(current.begin(), current.end(), 1);

  std::vector<UsageRecord> usage;
  RepairStats repairs;
  int calls = 0;
  try {
    for (int j = 0;; ++j) {
      int lo = std::max(1, n - cfg.window_size + 1 - j * cfg.step);
      int hi = std::min(lo + cfg.window_size - 1, n);
      run_window(candidates, current, lo, hi, pass_no, backend, setup, usage,
                 calls, repairs);
      if (lo == 1) break;
    }
  } catch (const BackendError& e) {
    throw StrategyError("backend '" + backend.name() +
                            "' failed mid-pass: " + e.what(),
                        std::move(usage), e.kind());
  }
  return {Permutation(std::move(current)), std::move(usage), calls, 1,
          repairs};
}

// Maps an outcome computed over a perturbed list back onto the original
// candidate positions.
StrategyOutcome compose_with(Permutation perturb, StrategyOutcome inner) {
  const auto& p = perturb.order();
  std::vector<int> final_order;
  final_order.reserve(p.size());
  for (int pos : inner.final_order.order()) {
    final_order.push_back(p[static_cast<std::size_t>(pos - 1)]);
  }
  inner.final_order = Permutation(std::move(final_order));
  return inner;
}

}  // namespace

StrategyOutcome full_rank(const CandidateList& candidates,
                          RankBackend& backend, const StrategySetup& setup) {
  const auto& k = setup.window.top_k_output;
  if (k && *k < 1) {
    throw ConfigError("top_k_output must be >= 1 when set");
  }
  Permutation perturb =
      perturbation_permutation(candidates.size(), setup.window.perturbation);
  CandidateList working = apply_permutation(candidates, perturb);

  const int n = working.size();
  std::vector<UsageRecord> usage;
  RepairStats repairs;
  int calls = 0;
  RankRequest request{
      setup.prompt.render(working.query(), working.passages()),
      k, setup.model_name};
  RankResponse response;
  try {
    response = backend.rank_window(request);
  } catch (const BackendError& e) {
    throw StrategyError("backend '" + backend.name() +
                            "' failed: " + e.what(),
                        std::move(usage), e.kind());
  }
  ++calls;
  usage.push_back({response.input_tokens, response.output_tokens,
                   response.latency, 1, n, 1,
                   working.query().query_id()});

  std::vector<int> order;
  if (n == 1) {
    order = {1};
  } else {
    order = window_order_from(response.raw_text, n, setup, repairs);
  }
  return compose_with(std::move(perturb),
                      {Permutation(std::move(order)), std::move(usage), calls,
                       1, repairs});
}

StrategyOutcome sliding_window_pass(const CandidateList& candidates,
                                    RankBackend& backend,
                                    const StrategySetup& setup) {
  check_truncation_for_sliding(setup.window);
  Permutation perturb =
      perturbation_permutation(candidates.size(), setup.window.perturbation);
  CandidateList working = apply_permutation(candidates, perturb);
  return compose_with(std::move(perturb),
                      sliding_impl(working, backend, setup, 1));
}

StrategyOutcome multi_pass_label(const CandidateList& candidates,
                                 RankBackend& backend,
                                 const StrategySetup& setup) {
  check_truncation_for_sliding(setup.window);
  const WindowConfig& cfg = setup.window;
  const int n = candidates.size();
  const int fix_per_pass = cfg.window_size - cfg.step;
  if (n > cfg.window_size && fix_per_pass < 1) {
    throw ConfigError(
        "multi-pass needs step < window_size to make progress, got step=" +
        std::to_string(cfg.step) + " window_size=" +
        std::to_string(cfg.window_size));
  }
  if (cfg.top_k_output && *cfg.top_k_output < fix_per_pass) {
    throw ConfigError(
        "multi-pass needs top_k_output >= window_size - step so every fixed "
        "passage is actually ranked");
  }

  Permutation perturb = perturbation_permutation(n, cfg.perturbation);
  CandidateList working = apply_permutation(candidates, perturb);

  std::vector<int> label;
  label.reserve(static_cast<std::size_t>(n));
  std::vector<int> remaining(static_cast<std::size_t>(n));
  std::iota(remaining.begin(), remaining.end(), 1);

  std::vector<UsageRecord> usage;
  RepairStats repairs;
  int calls = 0;
  int pass_no = 0;
  while (!remaining.empty()) {
    ++pass_no;
    const int r = static_cast<int>(remaining.size());
    std::vector<Passage> sub_passages;
    sub_passages.reserve(remaining.size());
    for (int pos : remaining) {
      sub_passages.push_back(
          working.passages()[static_cast<std::size_t>(pos - 1)]);
    }
    CandidateList sub(working.query(), std::move(sub_passages));

    std::optional<StrategyOutcome> pass_outcome;
    try {
      pass_outcome = sliding_impl(sub, backend, setup, pass_no);
    } catch (StrategyError& e) {
      usage.insert(usage.end(), e.usage().begin(), e.usage().end());
      throw StrategyError(e.what(), std::move(usage), e.cause());
    }
    usage.insert(usage.end(), pass_outcome->usage.begin(),
                 pass_outcome->usage.end());
    calls += pass_outcome->calls;
    repairs.parse_failures += pass_outcome->repairs.parse_failures;
    repairs.repaired_windows += pass_outcome->repairs.repaired_windows;

    const auto& pass_order = pass_outcome->final_order.order();
    const int fixed = r <= cfg.window_size ? r : fix_per_pass;
    for (int i = 0; i < fixed; ++i) {
      label.push_back(
          remaining[static_cast<std::size_t>(pass_order[static_cast<std::size_t>(i)] - 1)]);
    }
    std::vector<int> next;
    next.reserve(static_cast<std::size_t>(r - fixed));
    for (int i = fixed; i < r; ++i) {
      next.push_back(
          remaining[static_cast<std::size_t>(pass_order[static_cast<std::size_t>(i)] - 1)]);
    }
    remaining = std::move(next);
  }

  return compose_with(std::move(perturb),
                      {Permutation(std::move(label)), std::move(usage), calls,
                       pass_no, repairs});
}

int sliding_call_count(int n, const WindowConfig& config) {
  config.validate();
  if (n < 1) throw ValidationError("candidate count must be >= 1");
  if (n <= config.window_size) return 1;
  return (n - config.window_size + config.step - 1) / config.step + 1;
}

namespace {

void check_multi_pass_progress(int n, const WindowConfig& config) {
  if (n > config.window_size && config.step >= config.window_size) {
    throw ConfigError(
        "multi-pass needs step < window_size to make progress, got step=" +
        std::to_string(config.step) + " window_size=" +
        std::to_string(config.window_size));
  }
}

}  // namespace

int multi_pass_pass_count(int n, const WindowConfig& config) {
  config.validate();
  if (n < 1) throw ValidationError("candidate count must be >= 1");
  check_multi_pass_progress(n, config);
  int passes = 0;
  int r = n;
  while (true) {
    ++passes;
    if (r <= config.window_size) break;
    r -= config.window_size - config.step;
  }
  return passes;
}

int multi_pass_window_count(int n, const WindowConfig& config) {
  config.validate();
  if (n < 1) throw ValidationError("candidate count must be >= 1");
  check_multi_pass_progress(n, config);
  int windows = 0;
  int r = n;
  while (true) {
    windows += sliding_call_count(r, config);
    if (r <= config.window_size) break;
    r -= config.window_size - config.step;
  }
  return windows;
}

}  // namespace listrank
