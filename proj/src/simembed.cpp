#include "simile/simembed.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

namespace simile {

namespace {

struct Encoded {
  Vector<double> vec;
  double norm = 0.0;
};

Encoded encode_checked(const RowMatrix<double>& vectors, std::span<const int> ids, const char* side) {
  if (ids.empty()) throw DataError(std::string("empty token sequence for ") + side);
  Encoded e{mean_of_rows(vectors, ids), 0.0};
  e.norm = e.vec.norm();
  if (!(e.norm > 0.0)) throw NumericalError(std::string("zero-norm encoding for ") + side);
  return e;
}

double cos_of(const Encoded& a, const Encoded& b) { return a.vec.dot(b.vec) / (a.norm * b.norm); }

void accumulate(SparseGradient& grad, std::span<const int> ids, const Vector<double>& d_mean) {
  const double w = 1.0 / static_cast<double>(ids.size());
  for (int id : ids) {
    auto [it, inserted] = grad.try_emplace(id, Vector<double>::Zero(d_mean.size()));
    it->second += w * d_mean;
  }
}

// Hinge loss for (anchor, positive, negative); adds its gradient to `grad`
// when the hinge is active and `grad` is non-null.
double triplet_loss(const RowMatrix<double>& vectors, std::span<const int> anchor,
                    std::span<const int> positive, std::span<const int> negative, double margin,
                    SparseGradient* grad) {
  const Encoded a = encode_checked(vectors, anchor, "s");
  const Encoded p = encode_checked(vectors, positive, "s'");
  const Encoded n = encode_checked(vectors, negative, "t");
  const double loss = margin - cos_of(a, p) + cos_of(a, n);
  if (!(loss > 0.0)) return 0.0;
  if (grad) {
    accumulate(*grad, anchor, Vector<double>(cosine_grad(a.vec, n.vec) - cosine_grad(a.vec, p.vec)));
    accumulate(*grad, positive, Vector<double>(-cosine_grad(p.vec, a.vec)));
    accumulate(*grad, negative, cosine_grad(n.vec, a.vec));
  }
  return loss;
}

struct IdPair {
  TokenIds s;
  TokenIds s_prime;
};

constexpr std::size_t kNoNegative = static_cast<std::size_t>(-1);

// For each i in `members`, the index (into `members`) of the hardest
// candidate from `candidates_of`, or kNoNegative.
std::vector<std::size_t> mine(const RowMatrix<double>& vectors, const std::vector<IdPair>& pairs,
                              std::span<const std::size_t> members, bool reverse) {
  const std::size_t m = members.size();
  std::vector<Encoded> anchors, cands;
  anchors.reserve(m);
  cands.reserve(m);
  for (std::size_t idx : members) {
    const auto& p = pairs[idx];
    anchors.push_back(encode_checked(vectors, reverse ? p.s_prime : p.s, "s"));
    cands.push_back(encode_checked(vectors, reverse ? p.s : p.s_prime, "candidate"));
  }
  std::vector<std::size_t> out(m, kNoNegative);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& pi = pairs[members[i]];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const auto& cand = reverse ? pairs[members[j]].s : pairs[members[j]].s_prime;
      if (cand == pi.s || cand == pi.s_prime) continue;
      double c = cos_of(anchors[i], cands[j]);
      if (c > best) {
        best = c;
        out[i] = j;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> partition(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  // A singleton mega-batch has no candidates; fold it into its predecessor.
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

double megabatch_loss(const RowMatrix<double>& vectors, const std::vector<IdPair>& pairs,
                      std::span<const std::size_t> members, double margin, bool bidirectional,
                      std::size_t& terms) {
  double total = 0.0;
  for (int dir = 0; dir < (bidirectional ? 2 : 1); ++dir) {
    const bool rev = dir == 1;
    auto neg = mine(vectors, pairs, members, rev);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (neg[i] == kNoNegative) continue;
      const auto& p = pairs[members[i]];
      const auto& n = pairs[members[neg[i]]];
      total += rev ? triplet_loss(vectors, p.s_prime, p.s, n.s, margin, nullptr)
                   : triplet_loss(vectors, p.s, p.s_prime, n.s_prime, margin, nullptr);
      ++terms;
    }
  }
  return total;
}

double evaluation_loss(const RowMatrix<double>& vectors, const std::vector<IdPair>& pairs,
                       const SimTrainConfig& cfg) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  std::size_t terms = 0;
  for (const auto& mb : partition(order, cfg.minibatch_size * cfg.megabatch_factor))
    if (mb.size() >= 2) total += megabatch_loss(vectors, pairs, mb, cfg.margin, cfg.bidirectional, terms);
  const double mean = terms ? total / static_cast<double>(terms) : 0.0;
  if (!std::isfinite(mean)) throw NumericalError("train_sim: non-finite loss");
  return mean;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, RowMatrix<double> vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(tokens_.size()) != vectors_.rows())
    throw DataError("embedding table: token count does not match row count");
  if (!vectors_.allFinite()) throw DataError("embedding table: non-finite entries");
  auto unk = std::find(tokens_.begin(), tokens_.end(), kUnknownToken);
  if (unk == tokens_.end()) throw DataError("embedding table: missing unknown-token row");
  auto pos = unk - tokens_.begin();
  if (pos != 0) {
    std::swap(tokens_[0], tokens_[static_cast<std::size_t>(pos)]);
    vectors_.row(0).swap(vectors_.row(pos));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DataError("embedding table: duplicate token '" + tokens_[i] + "'");
  }
}

EmbeddingTable EmbeddingTable::random(const std::vector<std::string>& vocab, int dim,
                                      std::uint64_t seed, double scale) {
  if (dim < 1) throw UsageError("embedding dim must be >= 1");
  std::vector<std::string> tokens{kUnknownToken};
  for (const auto& t : vocab)
    if (t != kUnknownToken) tokens.push_back(t);
  std::sort(tokens.begin() + 1, tokens.end());
  tokens.erase(std::unique(tokens.begin() + 1, tokens.end()), tokens.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  RowMatrix<double> vectors(static_cast<Eigen::Index>(tokens.size()), dim);
  for (Eigen::Index r = 0; r < vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) vectors(r, c) = dist(rng);
  return EmbeddingTable(std::move(tokens), std::move(vectors));
}

int EmbeddingTable::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

TokenIds EmbeddingTable::ids(const Tokens& tokens) const {
  TokenIds out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void SimTrainConfig::validate() const {
  if (!(margin > 0.0 && margin < 2.0)) throw UsageError("margin must be in (0, 2)");
  if (minibatch_size < 1) throw UsageError("minibatch size must be >= 1");
  if (megabatch_factor < 1) throw UsageError("megabatch factor must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw UsageError("learning rate must be finite and non-negative");
}

Vector<double> encode(const EmbeddingTable& table, std::span<const int> ids) {
  if (ids.empty()) throw DataError("encode: empty token sequence");
  return mean_of_rows(table.vectors(), ids);
}

Vector<double> encode(const EmbeddingTable& table, const Tokens& tokens) {
  const auto ids = table.ids(tokens);
  return encode(table, std::span<const int>(ids));
}

double sim(const EmbeddingTable& table, const Tokens& r, const Tokens& h) {
  const auto ri = table.ids(r);
  const auto hi = table.ids(h);
  const Encoded a = encode_checked(table.vectors(), ri, "reference");
  const Encoded b = encode_checked(table.vectors(), hi, "hypothesis");
  return std::clamp(cos_of(a, b), -1.0, 1.0);
}

double margin_loss(const EmbeddingTable& table, const ParaphrasePair& pair, const Tokens& negative,
                   double margin) {
  if (negative == pair.s || negative == pair.s_prime)
    throw UsageError("margin_loss: negative example equals one side of the pair");
  const auto s = table.ids(pair.s), sp = table.ids(pair.s_prime), t = table.ids(negative);
  return triplet_loss(table.vectors(), s, sp, t, margin, nullptr);
}

SparseGradient margin_loss_grad(const EmbeddingTable& table, const ParaphrasePair& pair,
                                const Tokens& negative, double margin) {
  if (negative == pair.s || negative == pair.s_prime)
    throw UsageError("margin_loss_grad: negative example equals one side of the pair");
  const auto s = table.ids(pair.s), sp = table.ids(pair.s_prime), t = table.ids(negative);
  SparseGradient grad;
  triplet_loss(table.vectors(), s, sp, t, margin, &grad);
  return grad;
}

std::vector<Tokens> select_negatives(const EmbeddingTable& table,
                                     std::span<const ParaphrasePair> megabatch) {
  if (megabatch.size() < 2) throw UsageError("select_negatives: mega-batch needs at least 2 pairs");
  std::vector<IdPair> pairs;
  for (const auto& p : megabatch) pairs.push_back({table.ids(p.s), table.ids(p.s_prime)});
  std::vector<std::size_t> members(pairs.size());
  std::iota(members.begin(), members.end(), 0);
  auto neg = mine(table.vectors(), pairs, members, false);
  std::vector<Tokens> out;
  for (std::size_t i = 0; i < neg.size(); ++i) {
    if (neg[i] == kNoNegative)
      throw DataError("select_negatives: pair " + std::to_string(i) + " has no admissible negative");
    out.push_back(megabatch[neg[i]].s_prime);
  }
  return out;
}

SimTrainResult train_sim(EmbeddingTable table, const std::vector<ParaphrasePair>& pairs,
                         const SimTrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw DataError("train_sim: no training pairs");
  std::vector<IdPair> ids;
  ids.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.s.empty() || p.s_prime.empty()) throw DataError("train_sim: empty side in paraphrase pair");
    ids.push_back({table.ids(p.s), table.ids(p.s_prime)});
  }

  auto& vectors = table.vectors();
  SimTrainResult result;
  result.loss_log.push_back(evaluation_loss(vectors, ids, config));

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mega = config.minibatch_size * config.megabatch_factor;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& mb : partition(order, mega)) {
      if (mb.size() < 2) continue;
      // Negatives are mined once per mega-batch against the frozen table.
      std::vector<std::size_t> fwd = mine(vectors, ids, mb, false);
      std::vector<std::size_t> bwd;
      if (config.bidirectional) bwd = mine(vectors, ids, mb, true);

      for (std::size_t start = 0; start < mb.size(); start += config.minibatch_size) {
        const std::size_t stop = std::min(mb.size(), start + config.minibatch_size);
        SparseGradient grad;
        for (std::size_t i = start; i < stop; ++i) {
          const auto& p = ids[mb[i]];
          if (fwd[i] != kNoNegative) {
            double l = triplet_loss(vectors, p.s, p.s_prime, ids[mb[fwd[i]]].s_prime, config.margin, &grad);
            if (!std::isfinite(l)) throw NumericalError("train_sim: non-finite loss");
          }
          if (config.bidirectional && bwd[i] != kNoNegative) {
            double l = triplet_loss(vectors, p.s_prime, p.s, ids[mb[bwd[i]]].s, config.margin, &grad);
            if (!std::isfinite(l)) throw NumericalError("train_sim: non-finite loss");
          }
        }
        const double step = config.learning_rate / static_cast<double>(stop - start);
        for (const auto& [row, g] : grad) vectors.row(row) -= step * g.transpose();
      }
    }
    result.loss_log.push_back(evaluation_loss(vectors, ids, config));
  }
  result.table = std::move(table);
  return result;
}

double paraphrase_separation(const EmbeddingTable& table, const std::vector<ParaphrasePair>& pairs) {
  if (pairs.size() < 2) throw DataError("paraphrase_separation: need at least 2 pairs");
  std::vector<Vector<double>> a, b;
  for (const auto& p : pairs) {
    a.push_back(encode(table, p.s));
    b.push_back(encode(table, p.s_prime));
  }
  double matched = 0.0, mismatched = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const double c = cosine(a[i], b[j]);
      (i == j ? matched : mismatched) += c;
    }
  }
  const double n = static_cast<double>(pairs.size());
  return matched / n - mismatched / (n * (n - 1));
}

}  // namespace simile
