#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "listrank/core.hpp"
#include "listrank/prompting.hpp"

namespace listrank {

/// Half-open character range [begin, end) into a label string.
struct CharRange {
  int begin = 0;
  int end = 0;
};

struct LabelSpan {
  enum class Kind { passage_id, separator };
  CharRange range;
  Kind kind = Kind::passage_id;
  int rank = 0;  // 1-based label position for passage_id spans, 0 otherwise
};

/// Weight of the passage id sitting at label position p. Decays from 2.0
/// toward 1.0 as p grows, so early positions dominate the loss.
double rank_weight(int p);

/// Label text "[a] > [b] > ..." plus a span table that tiles the whole text.
/// Passage-id spans weigh 1 + 1/log2(p+1); the " > " separators weigh alpha.
class WeightedLabel {
 public:
  WeightedLabel(const Permutation& perm, double alpha);

  const std::string& text() const { return text_; }
  const std::vector<LabelSpan>& spans() const { return spans_; }
  const std::vector<double>& weights() const { return weights_; }
  double alpha() const { return alpha_; }

 private:
  std::string text_;
  std::vector<LabelSpan> spans_;
  std::vector<double> weights_;
  double alpha_ = 1.0;
};

std::string serialize_label(const Permutation& perm);

std::vector<double> weight_vector(const WeightedLabel& label);

/// Projects span weights onto an arbitrary tokenization of the label text.
/// Each token takes the weight of the span containing its first character,
/// so a token straddling a boundary is never split or double counted.
std::vector<double> token_weights(const WeightedLabel& label,
                                  std::span<const CharRange> tokens);

/// One scored token of a label under some external model: where it sits in
/// the text and the log-probability that model assigned it.
struct ScoredToken {
  CharRange range;
  double logprob = 0.0;
};
using TokenLogProbs = std::vector<ScoredToken>;

double standard_loss(const TokenLogProbs& lp);

double importance_loss(const TokenLogProbs& lp,
                       std::span<const double> weights);

struct Provenance {
  std::string teacher;
  std::string strategy;
  std::uint64_t seed = 0;
};

struct TrainingRecord {
  std::string prompt;
  WeightedLabel label;
  Provenance meta;
};

TrainingRecord emit_training_example(const Query& query,
                                     std::span<const Passage> candidates,
                                     const Permutation& label_perm,
                                     double alpha, const PromptTemplate& tmpl,
                                     Provenance meta);

}  // namespace listrank
