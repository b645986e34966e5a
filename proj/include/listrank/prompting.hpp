#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "listrank/core.hpp"

namespace listrank {

/// A pluggable token counter. Real model tokenizers attach here; the default
/// is a bytes/4 heuristic.
struct TokenizerHandle {
  std::string name;
  std::function<std::uint64_t(std::string_view)> count;

  /// ceil(bytes / 4); counts 0 for empty text.
  static TokenizerHandle heuristic();
};

/// The listwise ranking template. A window of m passages renders as a
/// preamble, m numbered "[i] {passage}" lines, and a postamble; {num} and
/// {query} may appear in either surrounding part.
class PromptTemplate {
 public:
  PromptTemplate(std::string preamble, std::string passage_line,
                 std::string postamble);

  static PromptTemplate listwise_default();

  /// Splits a full template text on the first line containing {passage};
  /// that line becomes the per-passage format.
  static PromptTemplate from_text(const std::string& text);
  static PromptTemplate from_file(const std::string& path);

  /// Renders the window with window-local ids 1..m. Byte-deterministic.
  /// Newlines inside passage bodies become spaces so each passage stays on
  /// its own line. Throws ValidationError on an empty window.
  std::string render(const Query& query, std::span<const Passage> window) const;

  const std::string& preamble() const { return preamble_; }
  const std::string& passage_line() const { return passage_line_; }
  const std::string& postamble() const { return postamble_; }

 private:
  std::string preamble_;
  std::string passage_line_;
  std::string postamble_;
};

/// The body exactly as render() prints it: newlines and carriage returns
/// become spaces. Anything matching passages against rendered prompts must
/// use the same form.
std::string flatten_passage_body(std::string_view body);

std::string build_prompt(const Query& query, std::span<const Passage> window,
                         const PromptTemplate& tmpl);
std::string build_prompt(const Query& query, std::span<const Passage> window);

std::uint64_t estimate_tokens(std::string_view text,
                              const TokenizerHandle& tokenizer);

}  // namespace listrank
