#include "slab/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "metrics_oracle.hpp"

namespace slab::metrics {
namespace {

template <typename F>
void expect_error(Errc code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// a=0 b=1 c=2 d=3 e=4
const Sequence kAbcd{0, 1, 2, 3};
const Sequence kAbce{0, 1, 2, 4};

TEST(SentenceBleu, SmoothedHigherOrderExample) {
  const std::vector<Sequence> refs{kAbce};
  const double expected = std::pow(3.0 / 4 * 2.0 / 3 * 1.0 / 2 * 0.1, 0.25);
  EXPECT_NEAR(sentence_bleu(kAbcd, refs), expected, 1e-15);
  EXPECT_NEAR(sentence_bleu(kAbcd, refs), 0.397635364384, 1e-12);
}

TEST(SentenceBleu, IdenticalIsOneAndDisjointIsZero) {
  const std::vector<Sequence> refs{kAbce, kAbcd};
  EXPECT_EQ(sentence_bleu(kAbcd, refs), 1.0);
  const std::vector<Sequence> other{{7, 8, 9}};
  EXPECT_EQ(sentence_bleu(kAbcd, other), 0.0);
}

TEST(SentenceBleu, ClipsAgainstMaxReferenceCount) {
  // "a a a a" against {"a a b", "a b"}: unigram matches clip to 2 of 4.
  const Sequence cand{0, 0, 0, 0};
  const std::vector<Sequence> refs{{0, 0, 1}, {0, 1}};
  BleuParams p;
  p.max_n = 1;
  // closest reference is shorter, so no brevity penalty
  EXPECT_EQ(sentence_bleu(cand, refs, p), 0.5);
}

TEST(SentenceBleu, BrevityPenaltyUsesClosestShorterOnTies) {
  const Sequence cand{0, 1};
  // lengths 1 and 3 are both at distance 1; the shorter (no penalty) wins
  const std::vector<Sequence> refs{{0}, {0, 1, 2}};
  BleuParams p;
  p.max_n = 1;
  EXPECT_EQ(sentence_bleu(cand, refs, p), 1.0);
  const std::vector<Sequence> longer{{0, 1, 2, 3}};
  EXPECT_NEAR(sentence_bleu(cand, longer, p), std::exp(1.0 - 4.0 / 2.0), 1e-15);
}

TEST(SentenceBleu, ShortCandidateUsesAvailableOrders) {
  const Sequence cand{0, 1};
  const std::vector<Sequence> refs{{0, 1}};
  EXPECT_EQ(sentence_bleu(cand, refs), 1.0);
}

TEST(SentenceBleu, Errors) {
  const std::vector<Sequence> refs{kAbcd};
  const Sequence empty;
  expect_error(Errc::EmptyInput, [&] { sentence_bleu(empty, refs); });
  const std::vector<Sequence> none;
  expect_error(Errc::EmptyInput, [&] { sentence_bleu(kAbcd, none); });
  BleuParams p;
  p.max_n = 5;
  expect_error(Errc::ConfigError, [&] { sentence_bleu(kAbcd, refs, p); });
}

TEST(CorpusBleu, Boundaries) {
  const std::vector<Sequence> refs{kAbcd, kAbce, {1, 2, 3}};
  const std::vector<Sequence> copies{kAbce, kAbcd};
  EXPECT_EQ(corpus_bleu(copies, refs), 1.0);
  const std::vector<Sequence> disjoint{{7, 8}, {9, 9, 9, 8}};
  EXPECT_EQ(corpus_bleu(disjoint, refs), 0.0);
  const std::vector<Sequence> empty;
  expect_error(Errc::EmptyInput, [&] { corpus_bleu(empty, refs); });
  expect_error(Errc::EmptyInput, [&] { corpus_bleu(copies, empty); });
}

TEST(SelfBleu, Boundaries) {
  const std::vector<Sequence> same(5, kAbcd);
  EXPECT_EQ(self_bleu(same), 1.0);
  const std::vector<Sequence> disjoint{{0, 1, 2}, {3, 4}, {5, 6, 7, 8}};
  EXPECT_EQ(self_bleu(disjoint), 0.0);
  const std::vector<Sequence> one{kAbcd};
  expect_error(Errc::EmptyInput, [&] { self_bleu(one); });
}

TEST(SelfBleu, DropsWhenDisjointSentenceAdded) {
  std::vector<Sequence> batch{kAbcd, kAbce, {0, 1, 3, 2}};
  const double before = self_bleu(batch);
  batch.push_back({9, 8, 7, 6, 5});
  const double after = self_bleu(batch);
  EXPECT_LT(after, before);
  EXPECT_GE(after, 0.0);
  EXPECT_LE(before, 1.0);
}

TEST(NgramEntropy, Examples) {
  const std::vector<Sequence> single{{4, 4, 4, 4}};
  EXPECT_EQ(ngram_entropy(single, 2), 0.0);
  const std::vector<Sequence> alternating{{0, 1, 0, 1, 0}};
  EXPECT_NEAR(ngram_entropy(alternating, 2), std::log(2.0), 1e-15);
  const std::vector<Sequence> distinct{{0, 1, 2, 3, 4, 5, 6}};
  EXPECT_NEAR(ngram_entropy(distinct, 3), std::log(5.0), 1e-15);
  const auto stats = ngram_stats(alternating, 2);
  EXPECT_EQ(stats.total, 4u);
  EXPECT_EQ(stats.distinct, 2u);
}

TEST(NgramEntropy, Errors) {
  const std::vector<Sequence> short_only{{0, 1}, {2}};
  expect_error(Errc::NoNgrams, [&] { ngram_entropy(short_only, 3); });
  const std::vector<Sequence> none;
  expect_error(Errc::NoNgrams, [&] { ngram_entropy(none, 3); });
}

TEST(NgramEntropy, GrowsWithNewNgramsAtMatchedFrequency) {
  std::vector<Sequence> batch{{0, 1, 2, 0, 1, 2}};
  const double before = ngram_entropy(batch, 2);
  batch.push_back({5, 6, 7, 5, 6, 7});
  EXPECT_GE(ngram_entropy(batch, 2), before);
}

std::vector<Sequence> random_batch(std::mt19937_64& gen, std::size_t max_sentences,
                                   std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> count(2, max_sentences), len(1, max_len);
  std::uniform_int_distribution<TokenId> tok(0, vocab - 1);
  std::vector<Sequence> batch(count(gen));
  for (auto& s : batch) {
    s.resize(len(gen));
    for (auto& t : s) t = tok(gen);
  }
  return batch;
}

TEST(Oracle, RandomToyBatchesMatchBruteForce) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int vocab = 3 + trial % 5;
    const auto gen_batch = random_batch(gen, 10, 12, vocab);
    const auto refs = random_batch(gen, 10, 12, vocab);
    for (std::size_t max_n = 1; max_n <= 4; ++max_n) {
      BleuParams p;
      p.max_n = max_n;
      EXPECT_NEAR(corpus_bleu(gen_batch, refs, p), testing::oracle_corpus_bleu(gen_batch, refs, max_n, 0.1),
                  1e-12);
      EXPECT_NEAR(self_bleu(gen_batch, p), testing::oracle_self_bleu(gen_batch, max_n, 0.1), 1e-12);
    }
    for (std::size_t n = 1; n <= 3; ++n) {
      EXPECT_NEAR(ngram_entropy(gen_batch, n), testing::oracle_ngram_entropy(gen_batch, n), 1e-12);
    }
  }
}

TEST(Invariance, BatchOrderDoesNotMatter) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_batch(gen, 10, 12, 4);
    auto r = random_batch(gen, 10, 12, 4);
    const double bleu = corpus_bleu(g, r);
    const double self = self_bleu(g);
    const double ent = ngram_entropy(g, 2);
    std::shuffle(g.begin(), g.end(), gen);
    std::shuffle(r.begin(), r.end(), gen);
    EXPECT_NEAR(corpus_bleu(g, r), bleu, 1e-15);
    EXPECT_NEAR(self_bleu(g), self, 1e-15);
    EXPECT_EQ(ngram_entropy(g, 2), ent);
  }
}

TEST(Invariance, ThreadCountDoesNotChangeScores) {
  std::mt19937_64 gen(9);
  auto g = random_batch(gen, 200, 30, 20);
  auto r = random_batch(gen, 200, 30, 20);
  BleuParams one, many;
  many.threads = 8;
  EXPECT_EQ(corpus_bleu(g, r, one), corpus_bleu(g, r, many));
  EXPECT_EQ(self_bleu(g, one), self_bleu(g, many));
}

}  // namespace
}  // namespace slab::metrics
