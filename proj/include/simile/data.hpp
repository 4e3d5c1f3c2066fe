#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "simile/analysis.hpp"
#include "simile/metrics.hpp"
#include "simile/riskopt.hpp"
#include "simile/simembed.hpp"
#include "simile/text.hpp"

namespace simile {

struct ParallelCorpus {
  std::string name;
  std::vector<Tokens> sources;
  std::vector<Tokens> references;

  std::size_t size() const { return sources.size(); }
  std::vector<Example> examples() const;
};

struct FilterConfig {
  double sim_min = 0.5;
  double trigram_max = 0.2;

  void validate() const;
};

struct FilterStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t rejected_sim = 0;
  std::size_t rejected_overlap = 0;
  std::size_t rejected_both = 0;
};

struct FilterResult {
  std::vector<ParaphrasePair> kept;
  FilterStats stats;
};

// Shared distinct lowercased word trigrams over the smaller trigram set;
// 0 when either side has fewer than 3 words.
double trigram_overlap(const Tokens& a, const Tokens& b);

FilterResult paranmt_filter(const std::vector<ParaphrasePair>& pairs, const SimScorer& scorer,
                            const FilterConfig& config = {});

// One sentence per line; blank lines are errors.
std::vector<Tokens> read_sentences(std::istream& is, const std::string& what);
std::vector<Tokens> load_sentences(const std::string& path);
void save_sentences(const std::string& path, const std::vector<Tokens>& sentences);

ParallelCorpus load_parallel(const std::string& source_path, const std::string& reference_path);
void save_parallel(const std::string& source_path, const std::string& reference_path, const ParallelCorpus& corpus);

// "s<TAB>s'" per line.
std::vector<ParaphrasePair> read_pairs(std::istream& is, const std::string& what);
std::vector<ParaphrasePair> load_pairs(const std::string& path);
void save_pairs(const std::string& path, const std::vector<ParaphrasePair>& pairs);

// "sentence_index ||| hypothesis text ||| logprob" per line. Reading groups
// consecutive lines by index; costs, sources and references are not stored.
void write_nbest(std::ostream& os, const std::vector<NBestList>& lists);
std::vector<NBestList> read_nbest(std::istream& is, const std::string& what);
void save_nbest(const std::string& path, const std::vector<NBestList>& lists);
std::vector<NBestList> load_nbest(const std::string& path);

// Header "<vocab_count> <dim>", then "token v1 ... vdim" per row.
void write_embeddings(std::ostream& os, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& is, const std::string& what);
void save_embeddings(const std::string& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::string& path);

struct JudgmentRecord {
  Tokens reference;
  Tokens hypothesis;
  double human = 0.0;
};

// "reference<TAB>hypothesis<TAB>human_score" per line.
std::vector<JudgmentRecord> read_judgments(std::istream& is, const std::string& what);
std::vector<JudgmentRecord> load_judgments(const std::string& path);

// "token<TAB>tag" lines; blank lines separate sentences and are skipped. A
// token seen with several tags takes its most frequent one (first seen on ties).
TagMap read_tags(std::istream& is, const std::string& what);
TagMap load_tags(const std::string& path);

}  // namespace simile
