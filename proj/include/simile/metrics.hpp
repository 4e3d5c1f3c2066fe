#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "simile/simembed.hpp"
#include "simile/subword.hpp"
#include "simile/text.hpp"

namespace simile {

enum class CostKind { kBleu, kSimile, kHalf };
// Unit in which SimiLe's length penalty counts |r| and |h|.
enum class LengthUnit { kWords, kSubwords };

std::string_view to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view name);

struct MetricConfig {
  double alpha = 0.25;
  int max_ngram = 4;
  bool scale_hundred = false;
  LengthUnit lp_unit = LengthUnit::kWords;

  void validate() const;
};

// e^{1 - len_r/len_h}, clamped to 1 when the hypothesis is not shorter.
double brevity_penalty(std::size_t len_r, std::size_t len_h);
// e^{1 - max/min}; symmetric.
double length_penalty(std::size_t len_r, std::size_t len_h);

// Sentence BLEU with +1 on numerator and denominator for n >= 2.
double sentence_bleu_smoothed(const Tokens& r, const Tokens& h, int max_n = 4);
double corpus_bleu(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps, int max_n = 4);

// LP^alpha * sim with lengths taken from the given token sequences.
double simile(const EmbeddingTable& table, const Tokens& r, const Tokens& h, double alpha = 0.25);

double cost(CostKind kind, const EmbeddingTable& table, const Tokens& r, const Tokens& h,
            const MetricConfig& config = {});

double corpus_sim(const EmbeddingTable& table, const std::vector<Tokens>& refs,
                  const std::vector<Tokens>& hyps);

template <typename Metric>
double symmetric(Metric&& metric, const Tokens& a, const Tokens& b) {
  return 0.5 * (metric(a, b) + metric(b, a));
}

/// Word-level front end for the similarity metrics. Sentences come in as
/// whitespace words; SIM runs on subword units when a segmentation model is
/// attached, and the length penalty counts words unless configured otherwise.
class SimScorer {
 public:
  SimScorer(EmbeddingTable table, std::optional<BpeModel> bpe = std::nullopt, MetricConfig config = {});

  const EmbeddingTable& table() const { return table_; }
  const MetricConfig& config() const { return config_; }

  Tokens units(const Tokens& words) const;

  double sim(const Tokens& r, const Tokens& h) const;
  double length_penalty(const Tokens& r, const Tokens& h) const;
  double simile(const Tokens& r, const Tokens& h) const;
  double bleu(const Tokens& r, const Tokens& h) const;
  double cost(CostKind kind, const Tokens& r, const Tokens& h) const;

  double corpus_sim(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) const;
  double corpus_simile(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) const;

 private:
  EmbeddingTable table_;
  std::optional<BpeModel> bpe_;
  MetricConfig config_;
};

}  // namespace simile
