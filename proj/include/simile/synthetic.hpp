#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simile/data.hpp"
#include "simile/riskopt.hpp"
#include "simile/simembed.hpp"

namespace simile {

/// Small lexical translation task with synonym ambiguity on the target side.
/// Content source words map to a primary target word, some also to a
/// synonym; the SIM table places synonyms close together.
struct SyntheticTaskConfig {
  std::size_t train_size = 200;
  std::size_t valid_size = 50;
  std::size_t concepts = 16;
  std::size_t synonyms = 10;  // concepts with a second target form
  std::size_t function_words = 4;
  std::size_t min_length = 3;
  std::size_t max_length = 6;
  double synonym_rate = 0.4;
  double noise_rate = 0.05;  // reference word replaced by a random target word
  int dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 1;
};

struct SyntheticTask {
  ParallelCorpus train;
  ParallelCorpus valid;
  std::vector<std::string> source_vocab;
  std::vector<std::string> target_vocab;
  EmbeddingTable sim_table;

  ToyLexModel initial_model() const;
};

SyntheticTask make_synthetic_task(const SyntheticTaskConfig& config = {});

/// Paraphrase pairs whose two sides use disjoint surface forms of the same
/// concepts, so an untrained table scores them near zero.
std::vector<ParaphrasePair> make_synthetic_paraphrases(std::size_t pairs = 40, std::size_t concepts = 30,
                                                       std::size_t length = 5, std::uint64_t seed = 11);

}  // namespace simile
