#include "simile/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace simile {

namespace {

std::string name(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

ToyLexModel SyntheticTask::initial_model() const { return ToyLexModel::zeros(source_vocab, target_vocab); }

SyntheticTask make_synthetic_task(const SyntheticTaskConfig& cfg) {
  if (cfg.synonyms > cfg.concepts || cfg.min_length < 1 || cfg.max_length < cfg.min_length)
    throw UsageError("synthetic task: inconsistent configuration");
  std::mt19937_64 rng(cfg.seed);
  SyntheticTask task;

  // Source ids: concepts then function words. Target ids: primary forms,
  // synonym forms, function words.
  for (std::size_t c = 0; c < cfg.concepts; ++c) task.source_vocab.push_back(name("src", c));
  for (std::size_t f = 0; f < cfg.function_words; ++f) task.source_vocab.push_back(name("fsrc", f));
  for (std::size_t c = 0; c < cfg.concepts; ++c) task.target_vocab.push_back(name("w", c));
  for (std::size_t c = 0; c < cfg.synonyms; ++c) task.target_vocab.push_back(name("v", c));
  for (std::size_t f = 0; f < cfg.function_words; ++f) task.target_vocab.push_back(name("fn", f));

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> tokens{kUnknownToken};
  tokens.insert(tokens.end(), task.target_vocab.begin(), task.target_vocab.end());
  RowMatrix<double> vectors(static_cast<Eigen::Index>(tokens.size()), cfg.dim);
  auto fill = [&](Eigen::Index row, const Vector<double>& base, double noise) {
    for (Eigen::Index d = 0; d < cfg.dim; ++d) vectors(row, d) = base(d) + noise * gauss(rng);
  };
  Vector<double> zero = Vector<double>::Zero(cfg.dim);
  fill(0, zero, 1.0);
  for (std::size_t c = 0; c < cfg.concepts; ++c) {
    Vector<double> concept_vec(cfg.dim);
    for (Eigen::Index d = 0; d < cfg.dim; ++d) concept_vec(d) = gauss(rng);
    fill(static_cast<Eigen::Index>(1 + c), concept_vec, 0.25);
    if (c < cfg.synonyms) fill(static_cast<Eigen::Index>(1 + cfg.concepts + c), concept_vec, 0.25);
  }
  for (std::size_t f = 0; f < cfg.function_words; ++f)
    fill(static_cast<Eigen::Index>(1 + cfg.concepts + cfg.synonyms + f), zero, 0.5);
  task.sim_table = EmbeddingTable(tokens, std::move(vectors));

  std::uniform_int_distribution<std::size_t> length(cfg.min_length, cfg.max_length);
  std::uniform_int_distribution<std::size_t> concept_pick(0, cfg.concepts - 1);
  std::uniform_int_distribution<std::size_t> function_pick(0, cfg.function_words ? cfg.function_words - 1 : 0);
  std::uniform_int_distribution<std::size_t> any_target(0, task.target_vocab.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto sentence_pair = [&]() {
    Example ex;
    const std::size_t n = length(rng);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t src = 0, tgt = 0;
      if (cfg.function_words && unit(rng) < 0.3) {
        const std::size_t f = function_pick(rng);
        src = cfg.concepts + f;
        tgt = cfg.concepts + cfg.synonyms + f;
      } else {
        const std::size_t c = concept_pick(rng);
        src = c;
        tgt = (c < cfg.synonyms && unit(rng) < cfg.synonym_rate) ? cfg.concepts + c : c;
      }
      if (unit(rng) < cfg.noise_rate) tgt = any_target(rng);
      ex.source.push_back(task.source_vocab[src]);
      ex.reference.push_back(task.target_vocab[tgt]);
    }
    return ex;
  };
  auto build = [&](ParallelCorpus& corpus, const char* label, std::size_t size) {
    corpus.name = label;
    for (std::size_t i = 0; i < size; ++i) {
      Example ex = sentence_pair();
      corpus.sources.push_back(std::move(ex.source));
      corpus.references.push_back(std::move(ex.reference));
    }
  };
  build(task.train, "synthetic-train", cfg.train_size);
  build(task.valid, "synthetic-valid", cfg.valid_size);
  return task;
}

std::vector<ParaphrasePair> make_synthetic_paraphrases(std::size_t pairs, std::size_t concepts, std::size_t length,
                                                       std::uint64_t seed) {
  if (concepts < length || length < 1) throw UsageError("synthetic paraphrases: need concepts >= length >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> ids(concepts);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<ParaphrasePair> out;
  for (std::size_t p = 0; p < pairs; ++p) {
    std::shuffle(ids.begin(), ids.end(), rng);
    ParaphrasePair pair;
    for (std::size_t j = 0; j < length; ++j) pair.s.push_back(name("a", ids[j]));
    std::vector<std::size_t> order(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(length));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c : order) pair.s_prime.push_back(name("b", c));
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace simile
