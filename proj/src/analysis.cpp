#include "simile/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_map>

#include "simile/error.hpp"

namespace simile {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DataError(std::string(what) + ": corpora are misaligned (" + std::to_string(a) + " vs " +
                    std::to_string(b) + " lines)");
}

struct Counts {
  std::size_t matches = 0, ref = 0, hyp = 0;
};

BucketScore finish(const std::string& label, const Counts& c) {
  BucketScore b{label, c.matches, c.ref, c.hyp, 0.0, 0.0, 0.0};
  if (c.hyp) b.precision = static_cast<double>(c.matches) / static_cast<double>(c.hyp);
  if (c.ref) b.recall = static_cast<double>(c.matches) / static_cast<double>(c.ref);
  if (b.precision + b.recall > 0.0) b.f1 = 2.0 * b.precision * b.recall / (b.precision + b.recall);
  return b;
}

std::vector<BucketDelta> delta_rows(const std::vector<BucketScore>& a, const std::vector<BucketScore>& b) {
  std::vector<BucketDelta> out;
  for (const auto& x : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const BucketScore& y) { return y.label == x.label; });
    if (it != b.end()) out.push_back({x.label, x.f1, it->f1, x.f1 - it->f1});
  }
  return out;
}

}  // namespace

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (const auto& [edge, count] : bins) n += count;
  return n;
}

Histogram cost_histogram(std::span<const double> costs, double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw UsageError("histogram bin width must be > 0");
  if (costs.empty()) throw DataError("cost_histogram: no values");
  const auto nbins = static_cast<std::size_t>(std::max(1.0, std::ceil(1.0 / bin_width - 1e-9)));
  Histogram h;
  h.bin_width = bin_width;
  for (std::size_t i = 0; i < nbins; ++i) h.bins.emplace_back(static_cast<double>(i) * bin_width, 0);
  for (double c : costs) {
    if (!std::isfinite(c) || c < 0.0) throw DataError("cost_histogram: cost outside [0, 1]");
    // The small offset keeps values like 0.3 / 0.1 from landing one bin low.
    auto idx = static_cast<std::size_t>(std::floor(c / bin_width + 1e-9));
    ++h.bins[std::min(idx, nbins - 1)].second;
  }
  return h;
}

void write_histogram_csv(std::ostream& os, const Histogram& hist) {
  os << "lower_edge,count\n";
  for (const auto& [edge, count] : hist.bins) os << format_double(edge) << ',' << count << '\n';
}

PairDiffStats score_pair_stats(const std::vector<std::vector<double>>& scores) {
  PairDiffStats st;
  std::size_t distinct = 0;
  double sum = 0.0;
  for (const auto& s : scores) {
    if (s.size() < 2) throw DataError("nbest_pair_stats: every n-best list needs at least 2 candidates");
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        const double d = std::abs(s[i] - s[j]);
        ++st.total_pairs;
        if (d > kDistinctScoreEps) ++distinct;
        sum += d;
      }
    }
  }
  if (st.total_pairs) {
    st.distinct_fraction = static_cast<double>(distinct) / static_cast<double>(st.total_pairs);
    st.mean_abs_diff_x100 = 100.0 * sum / static_cast<double>(st.total_pairs);
  }
  return st;
}

PairDiffStats nbest_pair_stats(std::span<const NBestList> lists, const CandidateScorer& scorer) {
  std::vector<std::vector<double>> scores;
  for (const auto& l : lists) {
    if (l.candidates.size() < 2)
      throw DataError("nbest_pair_stats: list " + std::to_string(l.index) + " has fewer than 2 candidates");
    auto& row = scores.emplace_back();
    for (const auto& c : l.candidates) row.push_back(scorer(l.reference, c.tokens));
  }
  return score_pair_stats(scores);
}

const std::vector<std::string>& frequency_bucket_labels() {
  static const std::vector<std::string> labels{"0", "1", "2-5", "6-10", "11-100", "101-1000", "1001+"};
  return labels;
}

std::string frequency_bucket(std::size_t count) {
  const auto& l = frequency_bucket_labels();
  if (count == 0) return l[0];
  if (count == 1) return l[1];
  if (count <= 5) return l[2];
  if (count <= 10) return l[3];
  if (count <= 100) return l[4];
  if (count <= 1000) return l[5];
  return l[6];
}

F1Report lexical_f1(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps,
                    const std::vector<Tokens>& freq_source, const TagMap* tags) {
  check_aligned(refs.size(), hyps.size(), "lexical_f1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : freq_source)
    for (const auto& w : s) ++freq[w];

  std::map<std::string, Counts> by_freq, by_tag;
  auto tag_of = [&](const std::string& w) -> std::string {
    auto it = tags->find(w);
    return it == tags->end() ? kUntagged : it->second;
  };
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // type -> (ref, hyp)
    for (const auto& w : refs[i]) ++counts[w].first;
    for (const auto& w : hyps[i]) ++counts[w].second;
    for (const auto& [w, c] : counts) {
      const std::size_t m = std::min(c.first, c.second);
      auto it = freq.find(w);
      auto& fb = by_freq[frequency_bucket(it == freq.end() ? 0 : it->second)];
      fb.matches += m;
      fb.ref += c.first;
      fb.hyp += c.second;
      if (tags) {
        auto& tb = by_tag[tag_of(w)];
        tb.matches += m;
        tb.ref += c.first;
        tb.hyp += c.second;
      }
    }
  }
  F1Report report;
  for (const auto& label : frequency_bucket_labels()) {
    auto it = by_freq.find(label);
    if (it != by_freq.end()) report.frequency.push_back(finish(label, it->second));
  }
  for (const auto& [label, c] : by_tag) report.tags.push_back(finish(label, c));
  return report;
}

F1Delta f1_delta(const F1Report& a, const F1Report& b) {
  if (a.tags.empty() != b.tags.empty()) throw DataError("f1_delta: reports use different bucket schemes");
  return {delta_rows(a.frequency, b.frequency), delta_rows(a.tags, b.tags)};
}

std::vector<std::pair<std::string, double>> average_deltas(std::span<const F1Delta> deltas, bool tags) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& d : deltas) {
    for (const auto& row : tags ? d.tags : d.frequency) {
      auto [it, inserted] = acc.try_emplace(row.label, 0.0, 0);
      if (inserted) order.push_back(row.label);
      it->second.first += row.delta;
      ++it->second.second;
    }
  }
  if (!tags) {
    const auto& labels = frequency_bucket_labels();
    std::sort(order.begin(), order.end(), [&](const std::string& x, const std::string& y) {
      return std::find(labels.begin(), labels.end(), x) < std::find(labels.begin(), labels.end(), y);
    });
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& label : order) {
    const auto& [sum, n] = acc[label];
    out.emplace_back(label, sum / static_cast<double>(n));
  }
  return out;
}

double compare_statistic(double delta_bleu_x100, double delta_sim_x100) {
  return std::abs(delta_bleu_x100) - std::abs(delta_sim_x100);
}

std::vector<ComparisonRow> metric_compare_sort(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps_a,
                                               const std::vector<Tokens>& hyps_b, const SimScorer& scorer,
                                               std::size_t extremes) {
  check_aligned(refs.size(), hyps_a.size(), "metric_compare_sort");
  check_aligned(refs.size(), hyps_b.size(), "metric_compare_sort");
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ComparisonRow r;
    r.index = i;
    r.bleu_a = scorer.bleu(refs[i], hyps_a[i]);
    r.bleu_b = scorer.bleu(refs[i], hyps_b[i]);
    r.sim_a = scorer.sim(refs[i], hyps_a[i]);
    r.sim_b = scorer.sim(refs[i], hyps_b[i]);
    r.delta_bleu = 100.0 * (r.bleu_a - r.bleu_b);
    r.delta_sim = 100.0 * (r.sim_a - r.sim_b);
    r.statistic = compare_statistic(r.delta_bleu, r.delta_sim);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.statistic > b.statistic; });
  const std::size_t n = rows.size();
  const std::size_t e = std::min(extremes, n / 2);
  for (std::size_t i = 0; i < e; ++i) {
    rows[i].extreme = Extreme::kBleuGap;
    rows[n - 1 - i].extreme = Extreme::kSimGap;
  }
  return rows;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_aligned(x.size(), y.size(), "pearson");
  if (x.size() < 2) throw DataError("correlation needs at least 2 pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const JudgmentSet& pairs) {
  std::vector<double> x, y;
  for (const auto& [a, b] : pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  return pearson(x, y);
}

double spearman(const JudgmentSet& pairs) {
  std::vector<double> x, y;
  for (const auto& [a, b] : pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  if (x.size() < 2) throw DataError("correlation needs at least 2 pairs");
  return pearson(average_ranks(x), average_ranks(y));
}

BootstrapResult paired_bootstrap(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps_a,
                                 const std::vector<Tokens>& hyps_b, const CorpusMetric& metric,
                                 std::size_t samples, std::uint64_t seed) {
  check_aligned(refs.size(), hyps_a.size(), "paired_bootstrap");
  check_aligned(refs.size(), hyps_b.size(), "paired_bootstrap");
  if (refs.empty()) throw DataError("paired_bootstrap: empty corpus");
  if (samples < 100) throw UsageError("paired_bootstrap: at least 100 samples are required");

  BootstrapResult res;
  res.samples = samples;
  res.score_a = metric(refs, hyps_a);
  res.score_b = metric(refs, hyps_b);

  std::size_t wins_a = 0, wins_b = 0, ties = 0;
  const std::size_t n = refs.size();
  std::vector<Tokens> r(n), a(n), b(n);
  for (std::size_t s = 0; s < samples; ++s) {
    std::mt19937_64 rng(seed + s);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      r[i] = refs[j];
      a[i] = hyps_a[j];
      b[i] = hyps_b[j];
    }
    const double sa = metric(r, a);
    const double sb = metric(r, b);
    if (sa > sb) {
      ++wins_a;
    } else if (sb > sa) {
      ++wins_b;
    } else {
      ++ties;
    }
  }
  const double total = static_cast<double>(samples);
  res.win_a = static_cast<double>(wins_a) / total;
  res.win_b = static_cast<double>(wins_b) / total;
  res.ties = static_cast<double>(ties) / total;
  if (res.score_a > res.score_b) {
    res.p_value = 1.0 - res.win_a;
  } else if (res.score_b > res.score_a) {
    res.p_value = 1.0 - res.win_b;
  } else {
    res.p_value = 1.0;
  }
  res.significant = res.p_value < kSignificanceLevel;
  return res;
}

}  // namespace simile
