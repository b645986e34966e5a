#include "listrank/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "listrank/parsing.hpp"

namespace listrank {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  return out;
}

[[noreturn]] void line_error(const std::string& path, int line_no,
                             const std::string& what) {
  throw ValidationError(path + " line " + std::to_string(line_no) + ": " +
                        what);
}

json parse_json_line(const std::string& path, int line_no,
                     const std::string& line) {
  json parsed = json::parse(line, nullptr, false);
  if (parsed.is_discarded()) line_error(path, line_no, "not valid JSON");
  return parsed;
}

std::string format_score(double score) {
  if (score == std::floor(score) && std::abs(score) < 1e15) {
    return std::to_string(static_cast<long long>(score));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", score);
  return buf;
}

}  // namespace

std::unordered_map<std::string, std::string> load_corpus(
    const std::string& path) {
  auto in = open_for_read(path);
  std::unordered_map<std::string, std::string> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc = parse_json_line(path, line_no, line);
    if (!doc.contains("docid") || !doc.contains("contents")) {
      line_error(path, line_no, "expected {docid, contents}");
    }
    std::string doc_id = doc["docid"].is_string()
                             ? doc["docid"].get<std::string>()
                             : doc["docid"].dump();
    if (!corpus.emplace(doc_id, doc["contents"].get<std::string>()).second) {
      line_error(path, line_no, "duplicate docid '" + doc_id + "'");
    }
  }
  return corpus;
}

std::vector<Query> load_queries(const std::string& path) {
  auto in = open_for_read(path);
  std::vector<Query> queries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      line_error(path, line_no, "expected qid<TAB>text");
    }
    try {
      queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } catch (const ValidationError& e) {
      line_error(path, line_no, e.what());
    }
  }
  return queries;
}

Qrels load_qrels(const std::string& path) {
  auto in = open_for_read(path);
  Qrels qrels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, unused, docid;
    int rel = 0;
    if (!(fields >> qid >> unused >> docid >> rel)) {
      line_error(path, line_no, "expected 'qid 0 docid rel'");
    }
    try {
      qrels.add(qid, docid, rel);
    } catch (const ValidationError& e) {
      line_error(path, line_no, e.what());
    }
  }
  return qrels;
}

std::vector<RunEntry> load_run(const std::string& path) {
  auto in = open_for_read(path);
  std::vector<RunEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream fields(line);
    RunEntry entry;
    std::string q0;
    if (!(fields >> entry.query_id >> q0 >> entry.doc_id >> entry.rank >>
          entry.score >> entry.tag)) {
      line_error(path, line_no, "expected 'qid Q0 docid rank score tag'");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void save_run(const std::string& path, std::span<const RunEntry> entries) {
  auto out = open_for_write(path);
  for (const RunEntry& e : entries) {
    out << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' '
        << format_score(e.score) << ' ' << e.tag << '\n';
  }
}

std::vector<CandidateList> assemble_candidates(
    std::span<const RunEntry> run, const std::vector<Query>& queries,
    const std::unordered_map<std::string, std::string>& corpus,
    std::optional<int> max_candidates, std::optional<int> max_body_bytes) {
  if (max_candidates && *max_candidates < 1) {
    throw ConfigError("max_candidates must be >= 1");
  }
  if (max_body_bytes && *max_body_bytes < 1) {
    throw ConfigError("max_body_bytes must be >= 1");
  }
  std::unordered_map<std::string, const Query*> query_by_id;
  for (const Query& q : queries) query_by_id.emplace(q.query_id(), &q);

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const RunEntry*>> grouped;
  for (const RunEntry& entry : run) {
    auto [it, inserted] = grouped.try_emplace(entry.query_id);
    if (inserted) order.push_back(entry.query_id);
    it->second.push_back(&entry);
  }

  std::vector<CandidateList> lists;
  lists.reserve(order.size());
  for (const std::string& qid : order) {
    auto q = query_by_id.find(qid);
    if (q == query_by_id.end()) {
      throw ValidationError("run references query '" + qid +
                            "' absent from the queries file");
    }
    auto& entries = grouped[qid];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry* a, const RunEntry* b) {
                       return a->rank < b->rank;
                     });
    if (max_candidates &&
        static_cast<int>(entries.size()) > *max_candidates) {
      entries.resize(static_cast<std::size_t>(*max_candidates));
    }
    std::vector<Passage> passages;
    passages.reserve(entries.size());
    for (const RunEntry* entry : entries) {
      auto doc = corpus.find(entry->doc_id);
      if (doc == corpus.end()) {
        throw ValidationError("run references doc '" + entry->doc_id +
                              "' absent from the corpus");
      }
      std::string body = doc->second;
      if (max_body_bytes &&
          body.size() > static_cast<std::size_t>(*max_body_bytes)) {
        body.resize(static_cast<std::size_t>(*max_body_bytes));
      }
      passages.emplace_back(entry->doc_id, std::move(body));
    }
    lists.emplace_back(*q->second, std::move(passages));
  }
  return lists;
}

std::string perturbation_to_string(const Perturbation& perturbation) {
  switch (perturbation.kind) {
    case Perturbation::Kind::none:
      return "none";
    case Perturbation::Kind::reverse:
      return "reverse";
    case Perturbation::Kind::shuffle:
      return "shuffle:" + std::to_string(perturbation.seed);
  }
  throw ValidationError("unknown perturbation kind");
}

Perturbation parse_perturbation(const std::string& text) {
  if (text == "none" || text.empty()) return Perturbation::none();
  if (text == "reverse") return Perturbation::reverse();
  if (text.rfind("shuffle:", 0) == 0) {
    const std::string seed_text = text.substr(8);
    try {
      std::size_t used = 0;
      std::uint64_t seed = std::stoull(seed_text, &used);
      if (used == seed_text.size()) return Perturbation::shuffle(seed);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("perturbation must be none, reverse, or shuffle:SEED; got '" +
                    text + "'");
}

void save_ledger(const std::string& path, const UsageLedger& ledger) {
  auto out = open_for_write(path);
  const LedgerMeta& meta = ledger.meta();
  ordered_json head;
  head["type"] = "meta";
  head["strategy"] = meta.strategy;
  head["model"] = meta.model;
  head["window"] = meta.window_size;
  head["step"] = meta.step;
  if (meta.top_k_output) {
    head["topk"] = *meta.top_k_output;
  } else {
    head["topk"] = nullptr;
  }
  head["perturbation"] = meta.perturbation;
  head["seed"] = meta.seed;
  out << head.dump() << '\n';
  for (const UsageRecord& r : ledger.records()) {
    ordered_json call;
    call["type"] = "call";
    call["query_id"] = r.query_id;
    call["pass"] = r.pass;
    call["window"] = {r.window_start, r.window_end};
    call["input_tokens"] = r.input_tokens;
    call["output_tokens"] = r.output_tokens;
    call["latency_us"] = r.latency.count();
    out << call.dump() << '\n';
  }
}

UsageLedger load_ledger(const std::string& path) {
  auto in = open_for_read(path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) {
    throw ValidationError(path + " is empty; expected a ledger meta line");
  }
  ++line_no;
  json head = parse_json_line(path, line_no, line);
  if (head.value("type", "") != "meta") {
    line_error(path, line_no, "first line must be the meta record");
  }
  LedgerMeta meta;
  meta.strategy = head.at("strategy").get<std::string>();
  meta.model = head.at("model").get<std::string>();
  meta.window_size = head.at("window").get<int>();
  meta.step = head.at("step").get<int>();
  if (!head.at("topk").is_null()) meta.top_k_output = head["topk"].get<int>();
  meta.perturbation = head.at("perturbation").get<std::string>();
  meta.seed = head.at("seed").get<std::uint64_t>();

  UsageLedger ledger(meta);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json call = parse_json_line(path, line_no, line);
    if (call.value("type", "") != "call") {
      line_error(path, line_no, "expected a call record");
    }
    UsageRecord record;
    record.query_id = call.at("query_id").get<std::string>();
    record.pass = call.at("pass").get<int>();
    record.window_start = call.at("window").at(0).get<int>();
    record.window_end = call.at("window").at(1).get<int>();
    record.input_tokens = call.at("input_tokens").get<std::uint64_t>();
    record.output_tokens = call.at("output_tokens").get<std::uint64_t>();
    record.latency =
        std::chrono::microseconds(call.at("latency_us").get<std::int64_t>());
    ledger.add(std::move(record));
  }
  return ledger;
}

namespace {

ordered_json record_to_json(const TrainingRecord& record) {
  ordered_json out;
  out["prompt"] = record.prompt;
  out["label"] = record.label.text();
  ordered_json spans = ordered_json::array();
  const auto& table = record.label.spans();
  const auto& weights = record.label.weights();
  for (std::size_t i = 0; i < table.size(); ++i) {
    ordered_json span;
    span["start"] = table[i].range.begin;
    span["end"] = table[i].range.end;
    span["kind"] = table[i].kind == LabelSpan::Kind::passage_id
                       ? "passage_id"
                       : "separator";
    span["rank"] = table[i].rank;
    span["weight"] = weights[i];
    spans.push_back(std::move(span));
  }
  out["spans"] = std::move(spans);
  out["alpha"] = record.label.alpha();
  out["meta"] = {{"teacher", record.meta.teacher},
                 {"strategy", record.meta.strategy},
                 {"seed", record.meta.seed}};
  return out;
}

}  // namespace

void save_training_records(const std::string& path,
                           std::span<const TrainingRecord> records) {
  auto out = open_for_write(path);
  for (const TrainingRecord& record : records) {
    out << record_to_json(record).dump() << '\n';
  }
}

std::vector<TrainingRecord> load_training_records(const std::string& path) {
  auto in = open_for_read(path);
  std::vector<TrainingRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed = parse_json_line(path, line_no, line);

    const std::string label_text = parsed.at("label").get<std::string>();
    const double alpha = parsed.at("alpha").get<double>();
    std::vector<int> ids;
    for (long long id : extract_bracketed_ids(label_text)) {
      ids.push_back(static_cast<int>(id));
    }
    TrainingRecord record{
        parsed.at("prompt").get<std::string>(),
        WeightedLabel(Permutation(std::move(ids)), alpha),
        Provenance{parsed.at("meta").at("teacher").get<std::string>(),
                   parsed.at("meta").at("strategy").get<std::string>(),
                   parsed.at("meta").at("seed").get<std::uint64_t>()}};

    // The span table is derived from the label, so a stored table that
    // disagrees with the regenerated one means the file was edited or
    // corrupted.
    if (record.label.text() != label_text) {
      line_error(path, line_no, "label text does not round-trip");
    }
    json stored = parsed.at("spans");
    json regenerated = record_to_json(record).at("spans");
    if (json(stored) != regenerated) {
      line_error(path, line_no, "span table does not match its label");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::unordered_map<std::string, PriceSheet> load_price_table(
    const std::string& path) {
  auto in = open_for_read(path);
  json parsed = json::parse(in, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ValidationError(path + " is not a JSON object of model prices");
  }
  std::unordered_map<std::string, PriceSheet> table;
  for (const auto& [model, entry] : parsed.items()) {
    auto price_of = [&](const char* key) {
      if (!entry.contains(key)) {
        throw ValidationError(path + ": model '" + model + "' lacks " + key);
      }
      const json& value = entry[key];
      return value.is_string() ? Money::parse(value.get<std::string>())
                               : Money::from_dollars(value.get<double>());
    };
    PriceSheet sheet{model, price_of("input_per_1k"), price_of("output_per_1k")};
    sheet.validate();
    table.emplace(model, std::move(sheet));
  }
  return table;
}

PriceSheet builtin_price(const std::string& model) {
  if (model == "gpt-4o-mini-2024-07-18") {
    return {model, Money::parse("0.00015"), Money::parse("0.00060")};
  }
  if (model == "gpt-4o-2024-08-06") {
    return {model, Money::parse("0.0025"), Money::parse("0.0100")};
  }
  throw ConfigError("no built-in prices for model '" + model +
                    "'; supply a price table file");
}

}  // namespace listrank
