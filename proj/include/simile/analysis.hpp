#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simile/metrics.hpp"
#include "simile/riskopt.hpp"
#include "simile/text.hpp"

namespace simile {

struct Histogram {
  double bin_width = 0.02;
  std::vector<std::pair<double, std::size_t>> bins;  // (lower_edge, count)

  std::size_t total() const;
};

// Left-closed bins of `bin_width` starting at 0; values at or above the last
// edge land in the final bin.
Histogram cost_histogram(std::span<const double> costs, double bin_width = 0.02);
void write_histogram_csv(std::ostream& os, const Histogram& hist);

struct PairDiffStats {
  std::size_t total_pairs = 0;
  double distinct_fraction = 0.0;
  double mean_abs_diff_x100 = 0.0;
};

// Scores a candidate against the list's reference.
using CandidateScorer = std::function<double(const Tokens& reference, const Tokens& hypothesis)>;

inline constexpr double kDistinctScoreEps = 1e-9;

PairDiffStats nbest_pair_stats(std::span<const NBestList> lists, const CandidateScorer& scorer);
// Same statistics over precomputed per-list scores.
PairDiffStats score_pair_stats(const std::vector<std::vector<double>>& scores);

struct BucketScore {
  std::string label;
  std::size_t matches = 0;
  std::size_t ref_count = 0;
  std::size_t hyp_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  std::vector<BucketScore> frequency;
  std::vector<BucketScore> tags;  // empty when no tag map was given
};

using TagMap = std::map<std::string, std::string>;

// Labels of the frequency buckets, in report order. "0" holds hypothesis
// word types that never occur on the frequency side.
const std::vector<std::string>& frequency_bucket_labels();
std::string frequency_bucket(std::size_t count);

inline constexpr const char* kUntagged = "X";

F1Report lexical_f1(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps,
                    const std::vector<Tokens>& freq_source, const TagMap* tags = nullptr);

struct BucketDelta {
  std::string label;
  double f1_a = 0.0;
  double f1_b = 0.0;
  double delta = 0.0;
};

struct F1Delta {
  std::vector<BucketDelta> frequency;
  std::vector<BucketDelta> tags;
};

// Per-bucket F1_a - F1_b over buckets populated in both reports.
F1Delta f1_delta(const F1Report& a, const F1Report& b);
// Mean delta per bucket label across several corpora.
std::vector<std::pair<std::string, double>> average_deltas(std::span<const F1Delta> deltas, bool tags = false);

enum class Extreme { kNone, kBleuGap, kSimGap };

struct ComparisonRow {
  std::size_t index = 0;
  double bleu_a = 0.0, bleu_b = 0.0;
  double sim_a = 0.0, sim_b = 0.0;
  double delta_bleu = 0.0;  // x100
  double delta_sim = 0.0;   // x100
  double statistic = 0.0;   // |delta_bleu| - |delta_sim|
  Extreme extreme = Extreme::kNone;
};

double compare_statistic(double delta_bleu_x100, double delta_sim_x100);

// Rows sorted by descending statistic. The first `extremes` rows are flagged
// kBleuGap and the last `extremes` rows kSimGap.
std::vector<ComparisonRow> metric_compare_sort(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps_a,
                                               const std::vector<Tokens>& hyps_b, const SimScorer& scorer,
                                               std::size_t extremes = 2);

using JudgmentSet = std::vector<std::pair<double, double>>;  // (system, human)

// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
double pearson(const JudgmentSet& pairs);
double spearman(const JudgmentSet& pairs);

using CorpusMetric = std::function<double(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps)>;

struct BootstrapResult {
  std::size_t samples = 0;
  double score_a = 0.0;
  double score_b = 0.0;
  double win_a = 0.0;
  double win_b = 0.0;
  double ties = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

// Resample b draws indices from a generator seeded with seed + b.
BootstrapResult paired_bootstrap(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps_a,
                                 const std::vector<Tokens>& hyps_b, const CorpusMetric& metric,
                                 std::size_t samples = 1000, std::uint64_t seed = 1);

}  // namespace simile
