#include "listrank/prompting.hpp"

#include <fstream>
#include <sstream>
#include <utility>

namespace listrank {

namespace {

constexpr const char* kDefaultTemplate =
    "You are RankLLM, an intelligent assistant that can rank passages based "
    "on their relevancy to the query.\n"
    "\n"
    "I will provide you with {num} passages, each indicated by a numerical "
    "identifier [].\n"
    "\n"
    "Rank the passages based on their relevance to the search query: "
    "{query}.\n"
    "\n"
    "[{i}] {passage}\n"
    "\n"
    "Search Query: {query}.\n"
    "\n"
    "Rank the {num} passages above based on their relevance to the search "
    "query. All the passages should be included and listed using "
    "identifiers, in descending order of relevance. The output format should "
    "be [] > [], e.g., [4] > [2]. Only respond with the ranking results, do "
    "not say any word or explain.";

void replace_all(std::string& text, std::string_view needle,
                 std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string flatten_passage_body(std::string_view body) {
  std::string out(body);
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

TokenizerHandle TokenizerHandle::heuristic() {
  return {"heuristic-4cpt", [](std::string_view text) -> std::uint64_t {
            return (text.size() + 3) / 4;
          }};
}

PromptTemplate::PromptTemplate(std::string preamble, std::string passage_line,
                               std::string postamble)
    : preamble_(std::move(preamble)),
      passage_line_(std::move(passage_line)),
      postamble_(std::move(postamble)) {
  if (passage_line_.find("{passage}") == std::string::npos)
    throw ValidationError("passage line template lacks a {passage} placeholder");
  if (passage_line_.empty() || passage_line_.back() != '\n')
    passage_line_ += '\n';
}

PromptTemplate PromptTemplate::listwise_default() {
  return from_text(kDefaultTemplate);
}

PromptTemplate PromptTemplate::from_text(const std::string& text) {
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    const bool has_newline = line_end != std::string::npos;
    if (!has_newline) line_end = text.size();
    std::string_view line(text.data() + line_start, line_end - line_start);
    if (line.find("{passage}") != std::string_view::npos) {
      std::string preamble = text.substr(0, line_start);
      std::string passage_line(line);
      std::string postamble =
          has_newline ? text.substr(line_end + 1) : std::string();
      return PromptTemplate(std::move(preamble), std::move(passage_line),
                            std::move(postamble));
    }
    if (!has_newline) break;
    line_start = line_end + 1;
  }
  throw ValidationError("template has no line containing {passage}");
}

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open template file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string PromptTemplate::render(const Query& query,
                                   std::span<const Passage> window) const {
  if (window.empty())
    throw ValidationError("cannot build a prompt for an empty window");
  const std::string num = std::to_string(window.size());

  std::string out = preamble_;
  replace_all(out, "{num}", num);
  replace_all(out, "{query}", query.body());

  for (std::size_t i = 0; i < window.size(); ++i) {
    std::string line = passage_line_;
    replace_all(line, "{i}", std::to_string(i + 1));
    replace_all(line, "{passage}", flatten_passage_body(window[i].body()));
    out += line;
  }

  std::string tail = postamble_;
  replace_all(tail, "{num}", num);
  replace_all(tail, "{query}", query.body());
  out += tail;
  return out;
}

std::string build_prompt(const Query& query, std::span<const Passage> window,
                         const PromptTemplate& tmpl) {
  return tmpl.render(query, window);
}

std::string build_prompt(const Query& query, std::span<const Passage> window) {
  return PromptTemplate::listwise_default().render(query, window);
}

std::uint64_t estimate_tokens(std::string_view text,
                              const TokenizerHandle& tokenizer) {
  return tokenizer.count(text);
}

}  // namespace listrank
