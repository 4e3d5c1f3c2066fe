#include "simile/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "simile/error.hpp"

namespace simile {

namespace {

using NgramCounts = std::map<std::string, int>;

NgramCounts ngrams(const Tokens& toks, int n) {
  NgramCounts out;
  const auto len = static_cast<int>(toks.size());
  for (int i = 0; i + n <= len; ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += toks[static_cast<std::size_t>(i + k)];
    }
    ++out[key];
  }
  return out;
}

// Clipped matches and hypothesis n-gram total for one order.
std::pair<long, long> clipped(const Tokens& r, const Tokens& h, int n) {
  const auto rc = ngrams(r, n);
  const auto hc = ngrams(h, n);
  long match = 0, total = 0;
  for (const auto& [g, c] : hc) {
    total += c;
    auto it = rc.find(g);
    if (it != rc.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a == 0 || b == 0) throw DataError(std::string(what) + ": lengths must be >= 1");
}

double floored(double v) { return std::max(0.0, v); }

}  // namespace

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::kBleu:
      return "bleu";
    case CostKind::kSimile:
      return "simile";
    case CostKind::kHalf:
      return "half";
  }
  return "unknown";
}

CostKind parse_cost_kind(std::string_view name) {
  if (name == "bleu") return CostKind::kBleu;
  if (name == "simile") return CostKind::kSimile;
  if (name == "half") return CostKind::kHalf;
  throw UsageError("unknown cost kind '" + std::string(name) + "' (expected bleu, simile or half)");
}

void MetricConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be finite and >= 0");
  if (max_ngram < 1) throw UsageError("max n-gram order must be >= 1");
}

double brevity_penalty(std::size_t len_r, std::size_t len_h) {
  check_lengths(len_r, len_h, "brevity_penalty");
  if (len_h >= len_r) return 1.0;
  return std::exp(1.0 - static_cast<double>(len_r) / static_cast<double>(len_h));
}

double length_penalty(std::size_t len_r, std::size_t len_h) {
  check_lengths(len_r, len_h, "length_penalty");
  const auto hi = static_cast<double>(std::max(len_r, len_h));
  const auto lo = static_cast<double>(std::min(len_r, len_h));
  return std::exp(1.0 - hi / lo);
}

double sentence_bleu_smoothed(const Tokens& r, const Tokens& h, int max_n) {
  if (r.empty() || h.empty()) throw DataError("sentence_bleu: empty sentence");
  if (max_n < 1) throw UsageError("sentence_bleu: max_n must be >= 1");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto [match, total] = clipped(r, h, n);
    if (n == 1) {
      if (match == 0) return 0.0;
      log_sum += std::log(static_cast<double>(match) / static_cast<double>(total));
    } else {
      log_sum += std::log(static_cast<double>(match + 1) / static_cast<double>(total + 1));
    }
  }
  return brevity_penalty(r.size(), h.size()) * std::exp(log_sum / max_n);
}

double corpus_bleu(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps, int max_n) {
  if (refs.size() != hyps.size())
    throw DataError("corpus_bleu: " + std::to_string(refs.size()) + " references vs " +
                    std::to_string(hyps.size()) + " hypotheses");
  if (refs.empty()) throw DataError("corpus_bleu: empty corpus");
  std::vector<long> match(static_cast<std::size_t>(max_n), 0), total(static_cast<std::size_t>(max_n), 0);
  std::size_t ref_len = 0, hyp_len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ref_len += refs[i].size();
    hyp_len += hyps[i].size();
    for (int n = 1; n <= max_n; ++n) {
      auto [m, t] = clipped(refs[i], hyps[i], n);
      match[static_cast<std::size_t>(n - 1)] += m;
      total[static_cast<std::size_t>(n - 1)] += t;
    }
  }
  if (hyp_len == 0 || ref_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    if (match[idx] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match[idx]) / static_cast<double>(total[idx]));
  }
  return brevity_penalty(ref_len, hyp_len) * std::exp(log_sum / max_n);
}

double simile(const EmbeddingTable& table, const Tokens& r, const Tokens& h, double alpha) {
  const double s = sim(table, r, h);
  return std::pow(length_penalty(r.size(), h.size()), alpha) * s;
}

double cost(CostKind kind, const EmbeddingTable& table, const Tokens& r, const Tokens& h,
            const MetricConfig& config) {
  switch (kind) {
    case CostKind::kBleu:
      return 1.0 - sentence_bleu_smoothed(r, h, config.max_ngram);
    case CostKind::kSimile:
      return 1.0 - floored(simile(table, r, h, config.alpha));
    case CostKind::kHalf:
      return 1.0 - 0.5 * (sentence_bleu_smoothed(r, h, config.max_ngram) +
                          floored(simile(table, r, h, config.alpha)));
  }
  throw UsageError("unknown cost kind");
}

double corpus_sim(const EmbeddingTable& table, const std::vector<Tokens>& refs,
                  const std::vector<Tokens>& hyps) {
  if (refs.size() != hyps.size()) throw DataError("corpus_sim: reference/hypothesis count mismatch");
  if (refs.empty()) throw DataError("corpus_sim: empty corpus");
  double total = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) total += sim(table, refs[i], hyps[i]);
  return total / static_cast<double>(refs.size());
}

SimScorer::SimScorer(EmbeddingTable table, std::optional<BpeModel> bpe, MetricConfig config)
    : table_(std::move(table)), bpe_(std::move(bpe)), config_(config) {
  config_.validate();
}

Tokens SimScorer::units(const Tokens& words) const {
  if (!bpe_) return words;
  return segment(*bpe_, join_words(words));
}

double SimScorer::sim(const Tokens& r, const Tokens& h) const {
  return simile::sim(table_, units(r), units(h));
}

double SimScorer::length_penalty(const Tokens& r, const Tokens& h) const {
  if (config_.lp_unit == LengthUnit::kSubwords) {
    return simile::length_penalty(units(r).size(), units(h).size());
  }
  return simile::length_penalty(r.size(), h.size());
}

double SimScorer::simile(const Tokens& r, const Tokens& h) const {
  return std::pow(length_penalty(r, h), config_.alpha) * sim(r, h);
}

double SimScorer::bleu(const Tokens& r, const Tokens& h) const {
  return sentence_bleu_smoothed(r, h, config_.max_ngram);
}

double SimScorer::cost(CostKind kind, const Tokens& r, const Tokens& h) const {
  switch (kind) {
    case CostKind::kBleu:
      return 1.0 - bleu(r, h);
    case CostKind::kSimile:
      return 1.0 - floored(simile(r, h));
    case CostKind::kHalf:
      return 1.0 - 0.5 * (bleu(r, h) + floored(simile(r, h)));
  }
  throw UsageError("unknown cost kind");
}

double SimScorer::corpus_sim(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) const {
  if (refs.size() != hyps.size()) throw DataError("corpus_sim: reference/hypothesis count mismatch");
  if (refs.empty()) throw DataError("corpus_sim: empty corpus");
  double total = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) total += sim(refs[i], hyps[i]);
  return total / static_cast<double>(refs.size());
}

double SimScorer::corpus_simile(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) const {
  if (refs.size() != hyps.size()) throw DataError("corpus_simile: reference/hypothesis count mismatch");
  if (refs.empty()) throw DataError("corpus_simile: empty corpus");
  double total = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) total += simile(refs[i], hyps[i]);
  return total / static_cast<double>(refs.size());
}

}  // namespace simile
