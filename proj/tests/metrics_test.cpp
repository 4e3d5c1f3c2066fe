#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "simile/error.hpp"
#include "simile/metrics.hpp"
#include "simile/subword.hpp"

using namespace simile;
using namespace simile::testing;

namespace {

Tokens words(const char* s) { return split_words(s); }

// "a" at angle 0 and "b" at cosine 0.8 from it.
EmbeddingTable two_word_table() { return table_from({kUnknownToken, "a", "b"}, {{0, 1}, {1, 0}, {0.8, 0.6}}); }

}  // namespace

TEST(BrevityPenalty, Examples) {
  EXPECT_EQ(brevity_penalty(5, 5), 1.0);
  EXPECT_NEAR(brevity_penalty(6, 3), std::exp(-1.0), 1e-15);
  EXPECT_EQ(brevity_penalty(3, 6), 1.0);
  EXPECT_THROW(brevity_penalty(0, 3), DataError);
  EXPECT_THROW(brevity_penalty(3, 0), DataError);
}

TEST(LengthPenalty, Examples) {
  EXPECT_EQ(length_penalty(7, 7), 1.0);
  EXPECT_NEAR(length_penalty(8, 4), std::exp(-1.0), 1e-12);
  EXPECT_EQ(length_penalty(4, 8), length_penalty(8, 4));
  EXPECT_THROW(length_penalty(0, 1), DataError);
  for (std::size_t r = 1; r < 30; ++r)
    for (std::size_t h = 1; h < 30; ++h) {
      EXPECT_GT(length_penalty(r, h), 0.0);
      EXPECT_LE(length_penalty(r, h), 1.0);
    }
}

TEST(SentenceBleu, Examples) {
  EXPECT_EQ(sentence_bleu_smoothed(words("the cat sat on the mat"), words("the cat sat on the mat")), 1.0);
  EXPECT_NEAR(sentence_bleu_smoothed(words("the cat sat"), words("the cat")), std::exp(-0.5), 1e-9);
  EXPECT_EQ(sentence_bleu_smoothed(words("the cat sat"), words("a dog ran")), 0.0);
  EXPECT_THROW(sentence_bleu_smoothed({}, words("a")), DataError);
  EXPECT_THROW(sentence_bleu_smoothed(words("a"), {}), DataError);
}

TEST(SentenceBleu, SmoothingOfHigherOrders) {
  // r = "a b", h = "a b c": p1 = 2/3, p2 = (1+1)/(2+1), p3 = (0+1)/(1+1), p4 = 1 (empty level), BP = 1.
  const double expected = std::pow(2.0 / 3 * 2.0 / 3 * 0.5 * 1.0, 0.25);
  EXPECT_NEAR(sentence_bleu_smoothed(words("a b"), words("a b c")), expected, 1e-12);
}

TEST(CorpusBleu, Examples) {
  auto refs = std::vector<Tokens>{words("a b c d e"), words("f g h")};
  EXPECT_EQ(corpus_bleu(refs, refs), 1.0);
  EXPECT_EQ(corpus_bleu({words("a b c")}, {words("c b a")}), 0.0);
  // Hand counts: 1-grams 6/7, 2-grams 4/5, 3-grams 2/3, 4-grams 1/2; r = 8, c = 7.
  auto hyps = std::vector<Tokens>{words("a b c d x"), words("f g")};
  const double expected = std::exp(1.0 - 8.0 / 7.0) * std::pow(6.0 / 7 * 4.0 / 5 * 2.0 / 3 * 1.0 / 2, 0.25);
  EXPECT_NEAR(corpus_bleu(refs, hyps), expected, 1e-12);
  EXPECT_THROW(corpus_bleu(refs, {hyps[0]}), DataError);
}

TEST(Simile, Examples) {
  auto t = two_word_table();
  Tokens r8(8, "a"), h4(4, "b");
  const double v = simile::simile(t, r8, h4, 0.25);
  EXPECT_NEAR(v, std::pow(std::exp(-1.0), 0.25) * 0.8, 1e-12);
  EXPECT_NEAR(v, 0.6230, 1e-4);
  EXPECT_NEAR(simile::simile(t, words("a b a"), words("a b a")), 1.0, 1e-12);
}

TEST(Simile, EqualLengthReducesToSim) {
  std::mt19937_64 rng(21);
  auto t = gaussian_table(10, 8, rng);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = len(rng);
    auto r = random_sentence(10, n, n, rng), h = random_sentence(10, n, n, rng);
    ASSERT_EQ(simile::simile(t, r, h), sim(t, r, h));
  }
}

TEST(Cost, IdenticalSentencesCostNothing) {
  auto t = two_word_table();
  for (auto kind : {CostKind::kBleu, CostKind::kSimile, CostKind::kHalf})
    EXPECT_NEAR(cost(kind, t, words("a b a b"), words("a b a b")), 0.0, 1e-12);
}

TEST(Cost, HalfCostFixture) {
  // "the cat sat" vs "the cat": BLEU e^-0.5 and a table tuned so that
  // simile = e^{-0.125} * sim = 0.6230.
  const double c = 0.6230 / std::exp(-0.125);
  const double y = std::sqrt(4.0 / (c * c) - 4.0);
  auto t = table_from({kUnknownToken, "the", "cat", "sat"}, {{0, 0}, {1, 0}, {1, 0}, {0, y}});
  EXPECT_NEAR(simile::simile(t, words("the cat sat"), words("the cat")), 0.6230, 1e-12);
  EXPECT_NEAR(cost(CostKind::kHalf, t, words("the cat sat"), words("the cat")), 0.3853, 1e-4);
  EXPECT_NEAR(cost(CostKind::kHalf, t, words("the cat sat"), words("the cat")),
              0.5 * (cost(CostKind::kBleu, t, words("the cat sat"), words("the cat")) +
                     cost(CostKind::kSimile, t, words("the cat sat"), words("the cat"))),
              1e-15);
}

TEST(Cost, NegativeSimileIsFloored) {
  auto t = table_from({kUnknownToken, "a", "b"}, {{0, 1}, {1, 0}, {-1, 0.1}});
  ASSERT_LT(simile::simile(t, words("a"), words("b")), 0.0);
  EXPECT_EQ(cost(CostKind::kSimile, t, words("a"), words("b")), 1.0);
}

TEST(Symmetric, BleuHandComputed) {
  auto bleu = [](const Tokens& a, const Tokens& b) { return sentence_bleu_smoothed(a, b); };
  const double forward = std::exp(-0.5);
  const double backward = std::pow(2.0 / 3 * 2.0 / 3 * 0.5, 0.25);
  EXPECT_NEAR(symmetric(bleu, words("a b c"), words("a b")), 0.5 * (forward + backward), 1e-12);
  EXPECT_EQ(symmetric(bleu, words("a b c"), words("a b c")), 1.0);
}

TEST(CorpusSim, Mean) {
  auto t = table_from({kUnknownToken, "a", "b", "c"}, {{0, 1}, {1, 0}, {0.4, std::sqrt(0.84)}, {0.8, 0.6}});
  std::vector<Tokens> refs{{"a"}, {"a"}}, hyps{{"b"}, {"c"}};
  EXPECT_NEAR(corpus_sim(t, refs, hyps), 0.6, 1e-12);
  EXPECT_NEAR(corpus_sim(t, {refs[1], refs[0]}, {hyps[1], hyps[0]}), 0.6, 1e-12);
  EXPECT_NEAR(corpus_sim(t, refs, refs), 1.0, 1e-12);
  EXPECT_THROW(corpus_sim(t, refs, {hyps[0]}), DataError);
}

TEST(SimScorer, SubwordUnits) {
  BpeModel bpe({{"a", "b</w>"}}, 10);
  auto t = table_from({kUnknownToken, "ab</w>", "c", "d</w>"}, {{0, 1}, {1, 0}, {1, 1}, {0.5, 0.5}});
  MetricConfig cfg;
  cfg.lp_unit = LengthUnit::kSubwords;
  SimScorer scorer(t, bpe, cfg);
  EXPECT_EQ(scorer.units(words("ab cd")), (Tokens{"ab</w>", "c", "d</w>"}));
  // two words but three subwords vs one
  EXPECT_NEAR(scorer.length_penalty(words("ab cd"), words("ab")), std::exp(1.0 - 3.0), 1e-12);
  SimScorer word_lp(t, bpe, MetricConfig{});
  EXPECT_NEAR(word_lp.length_penalty(words("ab cd"), words("ab")), std::exp(1.0 - 2.0), 1e-12);
  EXPECT_NEAR(word_lp.sim(words("ab"), words("ab")), 1.0, 1e-12);
}

TEST(CostKind, Parse) {
  EXPECT_EQ(parse_cost_kind("half"), CostKind::kHalf);
  EXPECT_EQ(to_string(parse_cost_kind("simile")), "simile");
  EXPECT_THROW(parse_cost_kind("meteor"), UsageError);
}
