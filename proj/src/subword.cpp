#include "simile/subword.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "simile/error.hpp"

namespace simile {

namespace {

std::vector<std::string> word_symbols(std::string_view word, const std::string& marker) {
  auto symbols = utf8_code_points(word);
  if (!symbols.empty()) symbols.back() += marker;
  return symbols;
}

struct Word {
  std::vector<std::string> symbols;
  long count = 0;
};

}  // namespace

BpeModel::BpeModel(std::vector<SymbolPair> merges, std::size_t vocab_size_target,
                   std::string end_of_word_marker)
    : merges_(std::move(merges)),
      vocab_size_target_(vocab_size_target),
      marker_(std::move(end_of_word_marker)) {
  index_merges();
}

void BpeModel::index_merges() {
  ranks_.clear();
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto& [l, r] = merges_[i];
    ranks_.emplace(merges_[i], static_cast<int>(i));
    vocab_.emplace(l, static_cast<int>(vocab_.size()));
    vocab_.emplace(r, static_cast<int>(vocab_.size()));
    vocab_.emplace(l + r, static_cast<int>(vocab_.size()));
  }
}

void BpeModel::add_base_symbols(const std::vector<std::string>& symbols) {
  for (const auto& s : symbols) {
    base_symbols_.push_back(s);
    vocab_.emplace(s, static_cast<int>(vocab_.size()));
  }
}

int BpeModel::rank(const std::string& left, const std::string& right) const {
  auto it = ranks_.find(SymbolPair(left, right));
  return it == ranks_.end() ? -1 : it->second;
}

BpeModel learn_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size,
                   std::string_view end_of_word_marker) {
  const std::string marker(end_of_word_marker);
  if (split_words(marker) != Tokens{marker})
    throw UsageError("learn_bpe: end-of-word marker must be non-empty and contain no whitespace");
  std::map<std::string, long> word_counts;
  for (const auto& line : corpus)
    for (const auto& w : split_words(line)) ++word_counts[w];
  if (word_counts.empty()) throw DataError("learn_bpe: corpus is empty");

  std::vector<Word> words;
  std::set<std::string> inventory;
  for (const auto& [w, c] : word_counts) {
    Word word{word_symbols(w, marker), c};
    inventory.insert(word.symbols.begin(), word.symbols.end());
    words.push_back(std::move(word));
  }
  if (vocab_size < inventory.size()) {
    throw UsageError("learn_bpe: vocab_size " + std::to_string(vocab_size) +
                     " is below the character inventory size " + std::to_string(inventory.size()));
  }

  std::vector<SymbolPair> merges;
  const std::size_t budget = vocab_size - inventory.size();
  while (merges.size() < budget) {
    // Pair statistics are recounted each round; std::map gives the
    // lexicographic tie-break for free.
    std::map<SymbolPair, long> stats;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        stats[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    if (stats.empty()) break;

    const SymbolPair* best = nullptr;
    long best_count = 0;
    for (const auto& [pair, count] : stats) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    SymbolPair chosen = *best;
    const std::string merged = chosen.first + chosen.second;
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == chosen.first &&
            w.symbols[i + 1] == chosen.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
    merges.push_back(std::move(chosen));
  }

  BpeModel model(std::move(merges), vocab_size, marker);
  model.add_base_symbols(std::vector<std::string>(inventory.begin(), inventory.end()));
  return model;
}

Tokens segment(const BpeModel& model, std::string_view sentence) {
  Tokens out;
  for (const auto& word : split_words(sentence)) {
    auto symbols = word_symbols(word, model.end_of_word_marker());
    while (symbols.size() > 1) {
      int best_rank = std::numeric_limits<int>::max();
      std::size_t best_pos = 0;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        int r = model.rank(symbols[i], symbols[i + 1]);
        if (r >= 0 && r < best_rank) {
          best_rank = r;
          best_pos = i;
        }
      }
      if (best_rank == std::numeric_limits<int>::max()) break;
      const auto& [left, right] = model.merges()[static_cast<std::size_t>(best_rank)];
      std::vector<std::string> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i >= best_pos && i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(left + right);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    for (auto& s : symbols) out.push_back(std::move(s));
  }
  return out;
}

std::string detokenize(const Tokens& tokens, std::string_view end_of_word_marker) {
  std::string out;
  for (const auto& tok : tokens) {
    std::string_view t(tok);
    if (t.size() >= end_of_word_marker.size() && t.ends_with(end_of_word_marker)) {
      out.append(t.substr(0, t.size() - end_of_word_marker.size()));
      out.push_back(' ');
    } else {
      out.append(t);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void write_bpe(std::ostream& os, const BpeModel& model) {
  os << "bpe v1 " << model.vocab_size_target() << ' ' << model.end_of_word_marker() << '\n';
  os << "base";
  for (const auto& tok : model.base_symbols()) os << ' ' << tok;
  os << '\n';
  for (const auto& [l, r] : model.merges()) os << l << '\t' << r << '\n';
}

BpeModel read_bpe(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("bpe model: missing header");
  std::istringstream header(line);
  std::string magic, version;
  std::size_t vocab_size = 0;
  std::string marker;
  if (!(header >> magic >> version >> vocab_size >> marker) || magic != "bpe" || version != "v1")
    throw DataError("bpe model: line 1: expected header 'bpe v1 <vocab_size> <marker>'");
  if (!std::getline(is, line) || !line.starts_with("base"))
    throw DataError("bpe model: line 2: expected base symbol list");
  Tokens base = split_words(std::string_view(line).substr(4));
  std::vector<SymbolPair> merges;
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw DataError("bpe model: line " + std::to_string(lineno) + ": expected 'left<TAB>right'");
    merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  BpeModel model(std::move(merges), vocab_size, marker);
  model.add_base_symbols(base);
  return model;
}

void save_bpe(const std::string& path, const BpeModel& model) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  write_bpe(os, model);
}

BpeModel load_bpe(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return read_bpe(is);
}

}  // namespace simile
