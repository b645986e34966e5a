#include "listrank/loss_weights.hpp"

#include <algorithm>
#include <cmath>

namespace listrank {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ConfigError("separator weight alpha must be in (0, 1], got " +
                      std::to_string(alpha));
  }
}

void check_token_ranges(std::string_view text,
                        std::span<const CharRange> tokens) {
  int prev_end = 0;
  for (const CharRange& t : tokens) {
    if (t.begin < prev_end || t.end <= t.begin ||
        t.end > static_cast<int>(text.size())) {
      throw ValidationError("token range [" + std::to_string(t.begin) + ", " +
                            std::to_string(t.end) +
                            ") does not align with the label text");
    }
    prev_end = t.end;
  }
}

}  // namespace

double rank_weight(int p) {
  if (p < 1) throw ValidationError("label position must be >= 1");
  return 1.0 + 1.0 / std::log2(static_cast<double>(p) + 1.0);
}

std::string serialize_label(const Permutation& perm) {
  std::string out;
  bool first = true;
  for (int id : perm.order()) {
    if (!first) out += " > ";
    out += '[';
    out += std::to_string(id);
    out += ']';
    first = false;
  }
  return out;
}

WeightedLabel::WeightedLabel(const Permutation& perm, double alpha)
    : alpha_(alpha) {
  check_alpha(alpha);
  int rank = 0;
  for (int id : perm.order()) {
    ++rank;
    if (rank > 1) {
      int start = static_cast<int>(text_.size());
      text_ += " > ";
      spans_.push_back({{start, static_cast<int>(text_.size())},
                        LabelSpan::Kind::separator,
                        0});
      weights_.push_back(alpha_);
    }
    int start = static_cast<int>(text_.size());
    text_ += '[';
    text_ += std::to_string(id);
    text_ += ']';
    spans_.push_back({{start, static_cast<int>(text_.size())},
                      LabelSpan::Kind::passage_id,
                      rank});
    weights_.push_back(rank_weight(rank));
  }
}

std::vector<double> weight_vector(const WeightedLabel& label) {
  return label.weights();
}

std::vector<double> token_weights(const WeightedLabel& label,
                                  std::span<const CharRange> tokens) {
  check_token_ranges(label.text(), tokens);
  const auto& spans = label.spans();
  const auto& weights = label.weights();
  std::vector<double> out;
  out.reserve(tokens.size());
  std::size_t s = 0;
  for (const CharRange& t : tokens) {
    while (s < spans.size() && spans[s].range.end <= t.begin) ++s;
    if (s == spans.size()) {
      throw ValidationError("token starts past the last label span");
    }
    out.push_back(weights[s]);
  }
  return out;
}

double standard_loss(const TokenLogProbs& lp) {
  double sum = 0.0;
  for (const ScoredToken& t : lp) {
    if (t.logprob > 0.0) {
      throw ValidationError("log-probabilities must be <= 0");
    }
    sum += t.logprob;
  }
  return -sum;
}

double importance_loss(const TokenLogProbs& lp,
                       std::span<const double> weights) {
  if (lp.size() != weights.size()) {
    throw ValidationError("got " + std::to_string(weights.size()) +
                          " weights for " + std::to_string(lp.size()) +
                          " tokens");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (lp[i].logprob > 0.0) {
      throw ValidationError("log-probabilities must be <= 0");
    }
    sum += weights[i] * lp[i].logprob;
  }
  return -sum;
}

TrainingRecord emit_training_example(const Query& query,
                                     std::span<const Passage> candidates,
                                     const Permutation& label_perm,
                                     double alpha, const PromptTemplate& tmpl,
                                     Provenance meta) {
  if (label_perm.size() != static_cast<int>(candidates.size())) {
    throw ValidationError("label ranks " + std::to_string(label_perm.size()) +
                          " passages but the candidate list has " +
                          std::to_string(candidates.size()));
  }
  TrainingRecord record{tmpl.render(query, candidates),
                        WeightedLabel(label_perm, alpha), std::move(meta)};
  return record;
}

}  // namespace listrank
