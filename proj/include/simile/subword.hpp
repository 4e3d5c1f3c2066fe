#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simile/text.hpp"

namespace simile {

inline constexpr std::size_t kDefaultSimVocab = 30000;
inline constexpr std::string_view kDefaultEndOfWord = "</w>";

using SymbolPair = std::pair<std::string, std::string>;

/// Greedy byte-pair-encoding model over Unicode code points.
///
/// Word-final symbols carry the end-of-word marker as a suffix, so "b" at the
/// end of a word is the symbol "b</w>" and a merge of "a" with it yields the
/// token "ab</w>". The marker must not occur inside input text.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<SymbolPair> merges, std::size_t vocab_size_target,
           std::string end_of_word_marker = std::string(kDefaultEndOfWord));

  const std::vector<SymbolPair>& merges() const { return merges_; }
  const std::map<std::string, int>& vocab() const { return vocab_; }
  const std::vector<std::string>& base_symbols() const { return base_symbols_; }
  std::size_t vocab_size_target() const { return vocab_size_target_; }
  const std::string& end_of_word_marker() const { return marker_; }

  // Registers base symbols seen in training; merge products are added by the
  // constructor.
  void add_base_symbols(const std::vector<std::string>& symbols);

  int rank(const std::string& left, const std::string& right) const;

 private:
  void index_merges();

  std::vector<SymbolPair> merges_;
  std::map<std::string, int> vocab_;
  std::vector<std::string> base_symbols_;
  std::map<SymbolPair, int> ranks_;
  std::size_t vocab_size_target_ = kDefaultSimVocab;
  std::string marker_ = std::string(kDefaultEndOfWord);
};

// Throws DataError on an empty corpus, UsageError when vocab_size is below
// the base symbol inventory.
BpeModel learn_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size,
                   std::string_view end_of_word_marker = kDefaultEndOfWord);

Tokens segment(const BpeModel& model, std::string_view sentence);

std::string detokenize(const Tokens& tokens, std::string_view end_of_word_marker = kDefaultEndOfWord);

// Text format: "bpe v1 <vocab_size> <marker>", a "base ..." symbol line, then
// "left<TAB>right" per merge.
void write_bpe(std::ostream& os, const BpeModel& model);
BpeModel read_bpe(std::istream& is);
void save_bpe(const std::string& path, const BpeModel& model);
BpeModel load_bpe(const std::string& path);

}  // namespace simile
