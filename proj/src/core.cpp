#include "listrank/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <unordered_set>
#include <utility>

namespace listrank {

Passage::Passage(std::string doc_id, std::string body,
                 std::optional<std::uint64_t> token_estimate)
    : doc_id_(std::move(doc_id)),
      body_(std::move(body)),
      token_estimate_(token_estimate) {
  if (doc_id_.empty()) throw ValidationError("passage doc_id is empty");
  if (body_.empty()) throw ValidationError("passage body is empty");
}

Query::Query(std::string query_id, std::string body)
    : query_id_(std::move(query_id)), body_(std::move(body)) {
  if (query_id_.empty()) throw ValidationError("query_id is empty");
  if (body_.empty()) throw ValidationError("query body is empty");
}

CandidateList::CandidateList(Query query, std::vector<Passage> passages)
    : query_(std::move(query)), passages_(std::move(passages)) {
  if (passages_.empty())
    throw ValidationError("candidate list for query '" + query_.query_id() +
                          "' is empty");
  std::unordered_set<std::string> seen;
  seen.reserve(passages_.size());
  for (const auto& p : passages_) {
    if (!seen.insert(p.doc_id()).second)
      throw ValidationError("duplicate doc_id '" + p.doc_id() +
                            "' in candidates for query '" + query_.query_id() +
                            "'");
  }
}

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)) {
  if (order_.empty()) throw ValidationError("permutation is empty");
  const int n = static_cast<int>(order_.size());
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int v : order_) {
    if (v < 1 || v > n)
      throw ValidationError("permutation value " + std::to_string(v) +
                            " out of range 1.." + std::to_string(n));
    if (seen[static_cast<std::size_t>(v - 1)])
      throw ValidationError("permutation repeats value " + std::to_string(v));
    seen[static_cast<std::size_t>(v - 1)] = true;
  }
}

Permutation Permutation::identity(int n) {
  if (n < 1) throw ValidationError("permutation size must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  return Permutation(std::move(order));
}

PartialRanking::PartialRanking(std::vector<int> listed, int n)
    : listed_(std::move(listed)), n_(n) {
  if (n_ < 1) throw ValidationError("partial ranking total must be >= 1");
  if (static_cast<int>(listed_.size()) > n_)
    throw ValidationError("partial ranking lists more items than it covers");
  std::vector<bool> seen(static_cast<std::size_t>(n_), false);
  for (int v : listed_) {
    if (v < 1 || v > n_)
      throw ValidationError("partial ranking value " + std::to_string(v) +
                            " out of range 1.." + std::to_string(n_));
    if (seen[static_cast<std::size_t>(v - 1)])
      throw ValidationError("partial ranking repeats value " +
                            std::to_string(v));
    seen[static_cast<std::size_t>(v - 1)] = true;
  }
}

void WindowConfig::validate() const {
  if (window_size < 1)
    throw ConfigError("window_size must be >= 1, got " +
                      std::to_string(window_size));
  if (step < 1 || step > window_size)
    throw ConfigError("step must satisfy 1 <= step <= window_size, got step=" +
                      std::to_string(step) + " window_size=" +
                      std::to_string(window_size));
  if (top_k_output && (*top_k_output < 1 || *top_k_output > window_size))
    throw ConfigError("top_k_output must satisfy 1 <= k <= window_size, got " +
                      std::to_string(*top_k_output));
}

void Qrels::add(const std::string& query_id, const std::string& doc_id,
                int relevance) {
  if (relevance < 0)
    throw ValidationError("negative relevance for (" + query_id + ", " +
                          doc_id + ")");
  judged_[query_id][doc_id] = relevance;
}

int Qrels::relevance(const std::string& query_id,
                     const std::string& doc_id) const {
  auto q = judged_.find(query_id);
  if (q == judged_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::unordered_map<std::string, int>& Qrels::for_query(
    const std::string& query_id) const {
  static const std::unordered_map<std::string, int> empty;
  auto q = judged_.find(query_id);
  return q == judged_.end() ? empty : q->second;
}

std::vector<std::string> Qrels::query_ids() const {
  std::vector<std::string> ids;
  ids.reserve(judged_.size());
  for (const auto& [qid, _] : judged_) ids.push_back(qid);
  return ids;
}

bool Qrels::has_query(const std::string& query_id) const {
  return judged_.contains(query_id);
}

namespace {

constexpr std::int64_t kPicoPerDollar = 1'000'000'000'000;

}  // namespace

Money Money::parse(const std::string& decimal) {
  std::size_t pos = 0;
  bool negative = false;
  if (pos < decimal.size() && (decimal[pos] == '+' || decimal[pos] == '-')) {
    negative = decimal[pos] == '-';
    ++pos;
  }
  std::int64_t whole = 0;
  std::size_t digits = 0;
  while (pos < decimal.size() &&
         std::isdigit(static_cast<unsigned char>(decimal[pos]))) {
    whole = whole * 10 + (decimal[pos] - '0');
    if (whole > 9'000'000)  // keeps whole * 1e12 well inside int64
      throw ValidationError("money amount too large: " + decimal);
    ++digits;
    ++pos;
  }
  std::int64_t frac = 0;
  std::size_t frac_digits = 0;
  if (pos < decimal.size() && decimal[pos] == '.') {
    ++pos;
    while (pos < decimal.size() &&
           std::isdigit(static_cast<unsigned char>(decimal[pos]))) {
      if (frac_digits < 12) {
        frac = frac * 10 + (decimal[pos] - '0');
        ++frac_digits;
      } else if (decimal[pos] != '0') {
        throw ValidationError("money amount finer than a picodollar: " +
                              decimal);
      }
      ++pos;
      ++digits;
    }
  }
  if (digits == 0 || pos != decimal.size())
    throw ValidationError("malformed money amount: '" + decimal + "'");
  for (std::size_t i = frac_digits; i < 12; ++i) frac *= 10;
  std::int64_t pico = whole * kPicoPerDollar + frac;
  return from_picodollars(negative ? -pico : pico);
}

Money Money::from_picodollars(std::int64_t pico) {
  Money m;
  m.pico_ = pico;
  return m;
}

Money Money::from_dollars(double dollars) {
  const long double pico = static_cast<long double>(dollars) *
                           static_cast<long double>(kPicoPerDollar);
  if (pico > 9.0e18L || pico < -9.0e18L)
    throw ValidationError("money amount out of range");
  return from_picodollars(static_cast<std::int64_t>(std::llroundl(pico)));
}

std::string Money::to_string() const {
  std::int64_t pico = pico_;
  std::string sign;
  if (pico < 0) {
    sign = "-";
    pico = -pico;
  }
  const std::int64_t whole = pico / kPicoPerDollar;
  std::int64_t frac = pico % kPicoPerDollar;
  std::string out = sign + std::to_string(whole);
  if (frac != 0) {
    std::string digits(12, '0');
    for (int i = 11; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] =
          static_cast<char>('0' + frac % 10);
      frac /= 10;
    }
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

Money Money::operator+(const Money& other) const {
  Money m = *this;
  m += other;
  return m;
}

Money& Money::operator+=(const Money& other) {
  const std::int64_t before = pico_;
  pico_ += other.pico_;
  if ((other.pico_ > 0 && pico_ < before) ||
      (other.pico_ < 0 && pico_ > before))
    throw ValidationError("money overflow");
  return *this;
}

Money Money::per_1k_times(std::uint64_t tokens) const {
  if (pico_ % 1000 != 0)
    throw ValidationError(
        "per-1K price does not divide into whole picodollars per token: " +
        to_string());
  const __int128 per_token = pico_ / 1000;
  const __int128 total = per_token * static_cast<__int128>(tokens);
  if (total > static_cast<__int128>(INT64_MAX) ||
      total < static_cast<__int128>(INT64_MIN))
    throw ValidationError("money overflow in cost computation");
  return from_picodollars(static_cast<std::int64_t>(total));
}

void PriceSheet::validate() const {
  if (model_name.empty()) throw ValidationError("price sheet has no model name");
  if (input_price_per_1k.picodollars() < 0 ||
      output_price_per_1k.picodollars() < 0)
    throw ValidationError("negative price for model " + model_name);
}

CandidateList apply_permutation(const CandidateList& candidates,
                                const Permutation& perm) {
  if (perm.size() != candidates.size())
    throw ValidationError("permutation size " + std::to_string(perm.size()) +
                          " does not match candidate count " +
                          std::to_string(candidates.size()));
  std::vector<Passage> reordered;
  reordered.reserve(candidates.passages().size());
  for (int src : perm.order())
    reordered.push_back(candidates.passages()[static_cast<std::size_t>(src - 1)]);
  return CandidateList(candidates.query(), std::move(reordered));
}

namespace {

// Bounded draw via multiply-shift so shuffles do not depend on the standard
// library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace

Permutation perturbation_permutation(int n, const Perturbation& perturbation) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  switch (perturbation.kind) {
    case Perturbation::Kind::none:
      break;
    case Perturbation::Kind::reverse:
      std::reverse(order.begin(), order.end());
      break;
    case Perturbation::Kind::shuffle: {
      std::mt19937_64 rng(perturbation.seed);
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(order[i - 1], order[j]);
      }
      break;
    }
  }
  return Permutation(std::move(order));
}

CandidateList perturb_order(const CandidateList& candidates,
                            const Perturbation& perturbation) {
  if (perturbation.kind == Perturbation::Kind::none) return candidates;
  return apply_permutation(
      candidates, perturbation_permutation(candidates.size(), perturbation));
}

}  // namespace listrank
