#include "simile/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "simile/error.hpp"

namespace simile {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return is;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  return os;
}

[[noreturn]] void fail(const std::string& what, std::size_t lineno, const std::string& msg) {
  throw DataError(what + ": line " + std::to_string(lineno) + ": " + msg);
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::set<std::string> trigrams(const Tokens& words) {
  std::set<std::string> out;
  for (std::size_t i = 0; i + 3 <= words.size(); ++i)
    out.insert(ascii_lower(words[i]) + '\x1f' + ascii_lower(words[i + 1]) + '\x1f' + ascii_lower(words[i + 2]));
  return out;
}

}  // namespace

std::vector<Example> ParallelCorpus::examples() const {
  std::vector<Example> out;
  for (std::size_t i = 0; i < sources.size(); ++i) out.push_back({sources[i], references[i]});
  return out;
}

void FilterConfig::validate() const {
  if (!(sim_min >= -1.0 && sim_min <= 1.0)) throw UsageError("sim threshold must be in [-1, 1]");
  if (!(trigram_max >= 0.0 && trigram_max <= 1.0)) throw UsageError("trigram threshold must be in [0, 1]");
}

double trigram_overlap(const Tokens& a, const Tokens& b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  const auto ta = trigrams(a), tb = trigrams(b);
  std::size_t shared = 0;
  for (const auto& t : ta) shared += tb.count(t);
  return static_cast<double>(shared) / static_cast<double>(std::min(ta.size(), tb.size()));
}

FilterResult paranmt_filter(const std::vector<ParaphrasePair>& pairs, const SimScorer& scorer,
                            const FilterConfig& config) {
  config.validate();
  FilterResult res;
  res.stats.input = pairs.size();
  for (const auto& p : pairs) {
    const bool sim_ok = scorer.sim(p.s, p.s_prime) >= config.sim_min;
    const bool overlap_ok = trigram_overlap(p.s, p.s_prime) <= config.trigram_max;
    if (sim_ok && overlap_ok) {
      res.kept.push_back(p);
      ++res.stats.kept;
    } else if (!sim_ok && !overlap_ok) {
      ++res.stats.rejected_both;
    } else if (!sim_ok) {
      ++res.stats.rejected_sim;
    } else {
      ++res.stats.rejected_overlap;
    }
  }
  return res;
}

std::vector<Tokens> read_sentences(std::istream& is, const std::string& what) {
  std::vector<Tokens> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    auto words = split_words(line);
    if (words.empty()) fail(what, lineno, "empty sentence");
    out.push_back(std::move(words));
  }
  return out;
}

std::vector<Tokens> load_sentences(const std::string& path) {
  auto is = open_in(path);
  return read_sentences(is, path);
}

void save_sentences(const std::string& path, const std::vector<Tokens>& sentences) {
  auto os = open_out(path);
  for (const auto& s : sentences) os << join_words(s) << '\n';
}

ParallelCorpus load_parallel(const std::string& source_path, const std::string& reference_path) {
  ParallelCorpus c;
  c.name = source_path;
  c.sources = load_sentences(source_path);
  c.references = load_sentences(reference_path);
  if (c.sources.size() != c.references.size())
    throw DataError("parallel corpus misaligned: " + source_path + " has " + std::to_string(c.sources.size()) +
                    " lines, " + reference_path + " has " + std::to_string(c.references.size()));
  return c;
}

void save_parallel(const std::string& source_path, const std::string& reference_path, const ParallelCorpus& corpus) {
  save_sentences(source_path, corpus.sources);
  save_sentences(reference_path, corpus.references);
}

std::vector<ParaphrasePair> read_pairs(std::istream& is, const std::string& what) {
  std::vector<ParaphrasePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    auto fields = split_tabs(line);
    if (fields.size() != 2) fail(what, lineno, "expected 's<TAB>s''");
    ParaphrasePair p{split_words(fields[0]), split_words(fields[1])};
    if (p.s.empty() || p.s_prime.empty()) fail(what, lineno, "empty side in paraphrase pair");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ParaphrasePair> load_pairs(const std::string& path) {
  auto is = open_in(path);
  return read_pairs(is, path);
}

void save_pairs(const std::string& path, const std::vector<ParaphrasePair>& pairs) {
  auto os = open_out(path);
  for (const auto& p : pairs) os << join_words(p.s) << '\t' << join_words(p.s_prime) << '\n';
}

void write_nbest(std::ostream& os, const std::vector<NBestList>& lists) {
  for (const auto& l : lists)
    for (const auto& c : l.candidates)
      os << l.index << " ||| " << join_words(c.tokens) << " ||| " << format_double(c.logprob) << '\n';
}

std::vector<NBestList> read_nbest(std::istream& is, const std::string& what) {
  std::vector<NBestList> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto first = line.find(" ||| ");
    auto second = first == std::string::npos ? std::string::npos : line.find(" ||| ", first + 5);
    if (second == std::string::npos) fail(what, lineno, "expected 'index ||| hypothesis ||| logprob'");
    const std::string idx_s = normalize_whitespace(line.substr(0, first));
    const std::string hyp = line.substr(first + 5, second - first - 5);
    const std::string lp_s = normalize_whitespace(line.substr(second + 5));
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(idx_s, &used);
      if (used != idx_s.size() || idx_s.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument(idx_s);
    } catch (const std::exception&) {
      fail(what, lineno, "bad sentence index '" + idx_s + "'");
    }
    double lp = 0.0;
    if (!parse_double(lp_s, lp)) fail(what, lineno, "bad logprob '" + lp_s + "'");
    if (out.empty() || out.back().index != index) {
      out.emplace_back();
      out.back().index = index;
    }
    out.back().candidates.push_back({split_words(hyp), lp, 0.0});
  }
  return out;
}

void save_nbest(const std::string& path, const std::vector<NBestList>& lists) {
  auto os = open_out(path);
  write_nbest(os, lists);
}

std::vector<NBestList> load_nbest(const std::string& path) {
  auto is = open_in(path);
  return read_nbest(is, path);
}

void write_embeddings(std::ostream& os, const EmbeddingTable& table) {
  os << table.size() << ' ' << table.dim() << '\n';
  const auto& v = table.vectors();
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.tokens()[i];
    for (Eigen::Index c = 0; c < v.cols(); ++c) os << ' ' << format_double(v(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
}

EmbeddingTable read_embeddings(std::istream& is, const std::string& what) {
  std::string line;
  if (!std::getline(is, line)) fail(what, 1, "missing header '<vocab_count> <dim>'");
  auto header = split_words(line);
  long count = 0, dim = 0;
  try {
    if (header.size() != 2) throw std::invalid_argument(line);
    count = std::stol(header[0]);
    dim = std::stol(header[1]);
  } catch (const std::exception&) {
    fail(what, 1, "bad header '" + line + "'");
  }
  if (count < 1 || dim < 1) fail(what, 1, "vocab count and dim must be >= 1");
  std::vector<std::string> tokens;
  RowMatrix<double> vectors(count, dim);
  for (long r = 0; r < count; ++r) {
    const auto lineno = static_cast<std::size_t>(r + 2);
    if (!std::getline(is, line)) fail(what, lineno, "missing row");
    strip_cr(line);
    auto fields = split_words(line);
    if (static_cast<long>(fields.size()) != dim + 1) fail(what, lineno, "expected token and " + std::to_string(dim) + " values");
    tokens.push_back(fields[0]);
    for (long c = 0; c < dim; ++c)
      if (!parse_double(fields[static_cast<std::size_t>(c + 1)], vectors(r, c))) fail(what, lineno, "bad number");
  }
  return EmbeddingTable(std::move(tokens), std::move(vectors));
}

void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  auto os = open_out(path);
  write_embeddings(os, table);
}

EmbeddingTable load_embeddings(const std::string& path) {
  auto is = open_in(path);
  return read_embeddings(is, path);
}

std::vector<JudgmentRecord> read_judgments(std::istream& is, const std::string& what) {
  std::vector<JudgmentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    auto fields = split_tabs(line);
    if (fields.size() != 3) fail(what, lineno, "expected 'reference<TAB>hypothesis<TAB>score'");
    JudgmentRecord rec{split_words(fields[0]), split_words(fields[1]), 0.0};
    if (rec.reference.empty() || rec.hypothesis.empty()) fail(what, lineno, "empty sentence");
    if (!parse_double(normalize_whitespace(fields[2]), rec.human) || !std::isfinite(rec.human))
      fail(what, lineno, "non-numeric score '" + fields[2] + "'");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<JudgmentRecord> load_judgments(const std::string& path) {
  auto is = open_in(path);
  return read_judgments(is, path);
}

TagMap read_tags(std::istream& is, const std::string& what) {
  std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    if (normalize_whitespace(line).empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) fail(what, lineno, "expected 'token<TAB>tag'");
    auto& tags = seen[fields[0]];
    auto it = std::find_if(tags.begin(), tags.end(), [&](const auto& t) { return t.first == fields[1]; });
    if (it == tags.end()) {
      tags.emplace_back(fields[1], 1);
    } else {
      ++it->second;
    }
  }
  TagMap out;
  for (const auto& [tok, tags] : seen) {
    const auto* best = &tags.front();
    for (const auto& t : tags)
      if (t.second > best->second) best = &t;
    out[tok] = best->first;
  }
  return out;
}

TagMap load_tags(const std::string& path) {
  auto is = open_in(path);
  return read_tags(is, path);
}

}  // namespace simile
