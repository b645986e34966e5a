#include "listrank/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

#include <json.hpp>

#include "listrank/parsing.hpp"

namespace listrank {

namespace {

void check_request(const RankRequest& request) {
  if (request.prompt.empty()) {
    throw ValidationError("rank request has an empty prompt");
  }
  if (request.max_output_ids && *request.max_output_ids < 1) {
    throw ValidationError("max_output_ids must be >= 1 when set");
  }
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += " > ";
    out += '[';
    out += std::to_string(ids[i]);
    out += ']';
  }
  return out;
}

// Draw with probability `rate` from the top 53 bits of one rng step.
bool chance(std::mt19937_64& rng, double rate) {
  std::uint64_t draw = rng();
  if (rate <= 0.0) return false;
  if (rate >= 1.0) return true;
  return static_cast<double>(draw >> 11) < rate * 9007199254740992.0;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::uint64_t request_key(const RankRequest& request) {
  std::string keyed = request.prompt;
  keyed += '\x1f';
  keyed += request.model_name;
  keyed += '\x1f';
  keyed += request.max_output_ids ? std::to_string(*request.max_output_ids)
                                  : std::string("all");
  return fnv1a64(keyed);
}

OracleBackend::OracleBackend(
    std::unordered_map<std::string, double> score_by_body,
    TokenizerHandle tokenizer)
    : score_by_body_(std::move(score_by_body)),
      tokenizer_(std::move(tokenizer)) {}

RankResponse OracleBackend::rank_window(const RankRequest& request) {
  check_request(request);

  // Recover the window's passages from the rendered prompt. Passage lines
  // are exactly "[i] body"; no other line of the listwise template starts
  // with a bracketed integer.
  std::vector<std::string_view> bodies;
  std::string_view prompt = request.prompt;
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    std::size_t eol = prompt.find('\n', pos);
    std::string_view line = prompt.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    if (line.size() >= 3 && line[0] == '[') {
      std::size_t d = 1;
      while (d < line.size() &&
             std::isdigit(static_cast<unsigned char>(line[d]))) {
        ++d;
      }
      if (d > 1 && d + 1 < line.size() && line[d] == ']' && line[d + 1] == ' ') {
        bodies.push_back(line.substr(d + 2));
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  if (bodies.empty()) {
    throw BackendError(BackendError::Kind::protocol,
                       "oracle found no passage lines in the prompt");
  }

  std::vector<int> order(bodies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i) + 1;
  std::vector<double> scores(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    auto it = score_by_body_.find(std::string(bodies[i]));
    if (it == score_by_body_.end()) {
      throw BackendError(BackendError::Kind::protocol,
                         "oracle has no hidden score for a prompted passage");
    }
    scores[i] = it->second;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a - 1)] >
           scores[static_cast<std::size_t>(b - 1)];
  });

  if (request.max_output_ids &&
      *request.max_output_ids < static_cast<int>(order.size())) {
    order.resize(static_cast<std::size_t>(*request.max_output_ids));
  }

  RankResponse response;
  response.raw_text = join_ids(order);
  response.input_tokens = tokenizer_.count(request.prompt);
  response.output_tokens = tokenizer_.count(response.raw_text);
  return response;
}

void FaultSpec::validate() const {
  for (double rate : {duplicate_rate, drop_rate, out_of_range_rate, prose_rate,
                      empty_rate}) {
    if (!(rate >= 0.0) || rate > 1.0) {
      throw ConfigError("fault rates must be in [0, 1]");
    }
  }
}

RankResponse corrupt(const RankResponse& response, const FaultSpec& spec,
                     std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  RankResponse out = response;

  if (chance(rng, spec.empty_rate)) {
    out.raw_text.clear();
    return out;
  }

  auto raw_ids = extract_bracketed_ids(response.raw_text);
  std::vector<int> ids;
  ids.reserve(raw_ids.size());
  for (long long id : raw_ids) ids.push_back(static_cast<int>(id));

  if (!ids.empty() && chance(rng, spec.duplicate_rate)) {
    std::size_t src = rng() % ids.size();
    std::size_t at = rng() % (ids.size() + 1);
    ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(at), ids[src]);
  }
  if (!ids.empty() && chance(rng, spec.drop_rate)) {
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(rng() % ids.size()));
  }
  if (chance(rng, spec.out_of_range_rate)) {
    std::size_t at = rng() % (ids.size() + 1);
    int bogus = 10000 + static_cast<int>(rng() % 1000);
    ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(at), bogus);
  }

  out.raw_text = join_ids(ids);
  if (chance(rng, spec.prose_rate)) {
    out.raw_text = "Sure! Here is the ranking you asked for:\n" +
                   out.raw_text + "\nLet me know if you need anything else.";
  }
  return out;
}

NoisyBackend::NoisyBackend(std::shared_ptr<RankBackend> inner, FaultSpec spec,
                           std::uint64_t seed)
    : inner_(std::move(inner)), spec_(spec), seed_(seed) {
  if (!inner_) throw ConfigError("noisy backend needs an inner backend");
  spec_.validate();
}

RankResponse NoisyBackend::rank_window(const RankRequest& request) {
  RankResponse response = inner_->rank_window(request);
  return corrupt(response, spec_, seed_ ^ fnv1a64(request.prompt));
}

ReplayBackend::ReplayBackend(std::shared_ptr<RankBackend> inner,
                             std::string cache_path)
    : inner_(std::move(inner)), cache_path_(std::move(cache_path)) {
  load_cache();
  if (inner_) {
    out_.open(cache_path_, std::ios::app);
    if (!out_) {
      throw ConfigError("cannot open replay cache for writing: " + cache_path_);
    }
  }
}

std::string ReplayBackend::name() const {
  return inner_ ? "replay+" + inner_->name() : "replay";
}

int ReplayBackend::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(cache_.size());
}

void ReplayBackend::load_cache() {
  std::ifstream in(cache_path_);
  if (!in) return;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
    if (entry.is_discarded()) {
      throw ValidationError("replay cache " + cache_path_ + " line " +
                            std::to_string(line_no) + " is not valid JSON");
    }
    RankRequest request;
    request.prompt = entry.at("prompt").get<std::string>();
    request.model_name = entry.at("model").get<std::string>();
    if (!entry.at("max_ids").is_null()) {
      request.max_output_ids = entry.at("max_ids").get<int>();
    }
    RankResponse response;
    response.raw_text = entry.at("raw_text").get<std::string>();
    response.input_tokens = entry.at("input_tokens").get<std::uint64_t>();
    response.output_tokens = entry.at("output_tokens").get<std::uint64_t>();
    response.latency =
        std::chrono::microseconds(entry.at("latency_us").get<std::int64_t>());
    const std::uint64_t key = request_key(request);
    cache_.emplace(key, Entry{std::move(request), std::move(response)});
  }
}

const RankResponse* ReplayBackend::find_locked(
    std::uint64_t key, const RankRequest& request) const {
  auto [begin, end] = cache_.equal_range(key);
  for (auto it = begin; it != end; ++it) {
    const RankRequest& cached = it->second.request;
    if (cached.prompt == request.prompt &&
        cached.model_name == request.model_name &&
        cached.max_output_ids == request.max_output_ids) {
      return &it->second.response;
    }
  }
  return nullptr;
}

void ReplayBackend::append_locked(const RankRequest& request,
                                  const RankResponse& response) {
  char key_hex[17];
  std::snprintf(key_hex, sizeof(key_hex), "%016llx",
                static_cast<unsigned long long>(request_key(request)));
  nlohmann::ordered_json entry;
  entry["key"] = key_hex;
  entry["model"] = request.model_name;
  if (request.max_output_ids) {
    entry["max_ids"] = *request.max_output_ids;
  } else {
    entry["max_ids"] = nullptr;
  }
  entry["prompt"] = request.prompt;
  entry["raw_text"] = response.raw_text;
  entry["input_tokens"] = response.input_tokens;
  entry["output_tokens"] = response.output_tokens;
  entry["latency_us"] = response.latency.count();
  out_ << entry.dump() << '\n';
  out_.flush();
}

RankResponse ReplayBackend::rank_window(const RankRequest& request) {
  check_request(request);
  const std::uint64_t key = request_key(request);
  std::string exact = request.prompt;
  exact += '\x1f';
  exact += request.model_name;
  exact += '\x1f';
  exact += request.max_output_ids ? std::to_string(*request.max_output_ids)
                                  : std::string("all");

  std::promise<RankResponse> promise;
  std::shared_future<RankResponse> follower;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (const RankResponse* hit = find_locked(key, request)) return *hit;
    auto it = in_flight_.find(exact);
    if (it != in_flight_.end()) {
      follower = it->second;
    } else {
      if (!inner_) {
        std::string models;
        for (const auto& [k, entry] : cache_) {
          const std::string& m = entry.request.model_name;
          if (models.find("'" + m + "'") == std::string::npos) {
            if (!models.empty()) models += ", ";
            models += "'" + m + "'";
          }
        }
        throw BackendError(
            BackendError::Kind::protocol,
            "replay cache " + cache_path_ +
                " has no entry for this request (model '" +
                request.model_name + "'" +
                (models.empty() ? std::string(")")
                                : ", cache holds " + models + ")"));
      }
      in_flight_.emplace(exact, promise.get_future().share());
    }
  }
  if (follower.valid()) return follower.get();

  try {
    RankResponse response = inner_->rank_window(request);
    ++live_calls_;
    {
      std::lock_guard<std::mutex> lock(mu_);
      cache_.emplace(key, Entry{request, response});
      append_locked(request, response);
      in_flight_.erase(exact);
    }
    promise.set_value(response);
    return response;
  } catch (...) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      in_flight_.erase(exact);
    }
    promise.set_exception(std::current_exception());
    throw;
  }
}

}  // namespace listrank
