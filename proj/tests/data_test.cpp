#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "simile/data.hpp"
#include "simile/error.hpp"

using namespace simile;
using namespace simile::testing;

namespace {

Tokens words(const char* s) { return split_words(s); }

std::string line_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(TrigramOverlap, Examples) {
  EXPECT_EQ(trigram_overlap(words("a b c d"), words("a b c d")), 1.0);
  EXPECT_EQ(trigram_overlap(words("a b c d"), words("a b c")), 1.0);
  EXPECT_EQ(trigram_overlap(words("a b c d"), words("x y z")), 0.0);
  EXPECT_EQ(trigram_overlap(words("The Cat sat"), words("the cat SAT")), 1.0);
  EXPECT_EQ(trigram_overlap(words("a b"), words("a b")), 0.0);
}

TEST(ParanmtFilter, Rules) {
  // s and s' share no trigram; their encodings sit at cosine 0.7.
  auto t = table_from({kUnknownToken, "p", "q", "r", "x", "y", "z"},
                      {{0, 0, 1}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0.7, std::sqrt(0.51), 0},
                       {0.7, std::sqrt(0.51), 0}, {0.7, std::sqrt(0.51), 0}});
  SimScorer scorer(t);
  ParaphrasePair constructed{words("p q r p"), words("x y z x")};
  ASSERT_NEAR(scorer.sim(constructed.s, constructed.s_prime), 0.7, 1e-12);
  ParaphrasePair identical{words("p q r"), words("p q r")};
  auto u = table_from({kUnknownToken, "p", "w"}, {{0, 1}, {1, 0}, {0.1, std::sqrt(0.99)}});
  SimScorer low(u);
  ParaphrasePair unrelated{words("p"), words("w")};
  ASSERT_NEAR(low.sim(unrelated.s, unrelated.s_prime), 0.1, 1e-12);

  auto res = paranmt_filter({constructed, identical}, scorer);
  ASSERT_EQ(res.kept.size(), 1u);
  EXPECT_EQ(res.kept[0].s, constructed.s);
  EXPECT_EQ(res.stats.rejected_overlap, 1u);
  auto res2 = paranmt_filter({unrelated}, low);
  EXPECT_EQ(res2.stats.rejected_sim, 1u);
  EXPECT_EQ(res2.stats.kept, 0u);
  FilterConfig bad;
  bad.trigram_max = 2.0;
  EXPECT_THROW(paranmt_filter({}, scorer, bad), UsageError);
}

TEST(Sentences, RoundTripAndErrors) {
  auto dir = scratch_dir("sentences");
  std::vector<Tokens> s{words("a b c"), words("d"), words("é ü")};
  save_sentences((dir / "s.txt").string(), s);
  EXPECT_EQ(load_sentences((dir / "s.txt").string()), s);
  std::istringstream blank("a b\n\nc\n");
  EXPECT_NE(line_error([&] { read_sentences(blank, "x"); }).find("line 2"), std::string::npos);
  EXPECT_NE(line_error([&] { load_sentences((dir / "missing.txt").string()); }).find("missing.txt"),
            std::string::npos);
}

TEST(Parallel, RoundTripAndMisalignment) {
  auto dir = scratch_dir("parallel");
  ParallelCorpus c{"x", {words("s0 s1"), words("s2")}, {words("t0 t1"), words("t2")}};
  save_parallel((dir / "a.src").string(), (dir / "a.ref").string(), c);
  auto back = load_parallel((dir / "a.src").string(), (dir / "a.ref").string());
  EXPECT_EQ(back.sources, c.sources);
  EXPECT_EQ(back.references, c.references);
  save_sentences((dir / "b.ref").string(), {words("t0")});
  EXPECT_THROW(load_parallel((dir / "a.src").string(), (dir / "b.ref").string()), DataError);
}

TEST(Pairs, RoundTripAndErrors) {
  auto dir = scratch_dir("pairs");
  std::vector<ParaphrasePair> pairs{{words("a b"), words("c d e")}, {words("f"), words("g")}};
  save_pairs((dir / "p.tsv").string(), pairs);
  auto back = load_pairs((dir / "p.tsv").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].s, pairs[0].s);
  EXPECT_EQ(back[1].s_prime, pairs[1].s_prime);
  std::istringstream bad("a\tb\nno tab here\n");
  EXPECT_NE(line_error([&] { read_pairs(bad, "x"); }).find("line 2"), std::string::npos);
}

TEST(NBestFile, RoundTrip) {
  std::vector<NBestList> lists(2);
  lists[0].index = 0;
  lists[0].candidates = {{words("a b"), -0.1, 0}, {words("a c"), -1.0 / 3.0, 0}};
  lists[1].index = 4;
  lists[1].candidates = {{words("x"), -2.5e-17, 0}};
  std::stringstream ss;
  write_nbest(ss, lists);
  auto back = read_nbest(ss, "n");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].index, lists[i].index);
    ASSERT_EQ(back[i].candidates.size(), lists[i].candidates.size());
    for (std::size_t j = 0; j < back[i].candidates.size(); ++j) {
      EXPECT_EQ(back[i].candidates[j].tokens, lists[i].candidates[j].tokens);
      EXPECT_EQ(back[i].candidates[j].logprob, lists[i].candidates[j].logprob);
    }
  }
  std::istringstream bad("0 ||| a ||| -1\n-1 ||| b ||| -2\n");
  EXPECT_NE(line_error([&] { read_nbest(bad, "n"); }).find("line 2"), std::string::npos);
  std::istringstream bad_lp("0 ||| a ||| nope\n");
  EXPECT_NE(line_error([&] { read_nbest(bad_lp, "n"); }).find("line 1"), std::string::npos);
}

TEST(EmbeddingFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  auto t = gaussian_table(12, 7, rng);
  t.vectors()(3, 2) = 1e-300;
  t.vectors()(4, 1) = -0.1;
  std::stringstream ss;
  write_embeddings(ss, t);
  auto back = read_embeddings(ss, "e");
  EXPECT_EQ(back.tokens(), t.tokens());
  EXPECT_EQ(back.vectors(), t.vectors());
  std::istringstream bad("2 2\n<unk> 0 0\na 1\n");
  EXPECT_NE(line_error([&] { read_embeddings(bad, "e"); }).find("line 3"), std::string::npos);
}

TEST(Judgments, ParseAndErrors) {
  std::istringstream ok("a b\ta c\t3.5\nx\ty\t-1\n");
  auto j = read_judgments(ok, "j");
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].hypothesis, words("a c"));
  EXPECT_EQ(j[1].human, -1.0);
  std::istringstream bad("a\tb\t1\na\tb\tgood\n");
  EXPECT_NE(line_error([&] { read_judgments(bad, "j"); }).find("line 2"), std::string::npos);
}

TEST(Tags, MostFrequentTagWins) {
  std::istringstream is("run\tVB\ndog\tNN\n\nrun\tNN\nrun\tNN\nlead\tVB\nlead\tNN\n");
  auto tags = read_tags(is, "t");
  EXPECT_EQ(tags.at("run"), "NN");
  EXPECT_EQ(tags.at("dog"), "NN");
  EXPECT_EQ(tags.at("lead"), "VB");
}
