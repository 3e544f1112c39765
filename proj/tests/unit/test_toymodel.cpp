#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "tokaudit/errors.hpp"
#include "tokaudit/rng.hpp"
#include "tokaudit/toymodel.hpp"

using namespace tokaudit;
using tokaudit::testing::seq_of;
using tokaudit::testing::small_model;

TEST(NextTokenDist, Deterministic) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 6);
  const TokenSeq prefix{{0, 2, 1}};
  const NextTokenDist d1 = next_token_dist(spec, "hello", prefix);
  const NextTokenDist d2 = next_token_dist(spec, "hello", prefix);
  EXPECT_EQ(d1.probs, d2.probs);
  EXPECT_EQ(d1.log_probs, d2.log_probs);
  EXPECT_NE(next_token_dist(spec, "hellp", prefix).probs, d1.probs);
}

TEST(NextTokenDist, PointMassOnEosAtMaxLen) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 3);
  const NextTokenDist d = next_token_dist(spec, "p", TokenSeq{{0, 1, 2}});
  const TokenId eos = spec.vocabulary().eos_id();
  for (TokenId t = 0; t < spec.vocabulary().size(); ++t) EXPECT_EQ(d.probs[t], t == eos ? 1.0 : 0.0);
  EXPECT_THROW(next_token_dist(spec, "p", TokenSeq{{0, 1, 2, 0}}), DomainError);
}

TEST(NextTokenDist, SumsToOne) {
  const ModelSpec spec = small_model({"a", "b", "ab", "ba", "bb"}, 10, 3, 0.7, 0.2);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    TokenSeq prefix;
    const auto n = rng.uniform_index(spec.max_len);
    for (std::uint64_t j = 0; j < n; ++j) prefix.ids.push_back(rng.uniform_index(5));
    const NextTokenDist d = next_token_dist(spec, std::to_string(i), prefix);
    EXPECT_NEAR(std::accumulate(d.probs.begin(), d.probs.end(), 0.0), 1.0, 1e-12);
    for (std::size_t t = 0; t < d.probs.size(); ++t) {
      EXPECT_NEAR(std::exp(d.log_probs[t]), d.probs[t], 1e-15);
    }
  }
}

TEST(SampleSequence, LargeEosBoostGivesShortOutputs) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 16, 7, 1.0, 50.0);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) EXPECT_LE(sample_sequence(spec, "q", rng).len(), 1u);
}

TEST(SampleSequence, FirstTokenFrequenciesMatchDistribution) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 8);
  const NextTokenDist d = next_token_dist(spec, "freq", TokenSeq{});
  const int n = 100'000;
  std::vector<int> counts(spec.vocabulary().size(), 0);
  Rng rng(3);
  for (int i = 0; i < n; ++i) {
    const TokenSeq s = sample_sequence(spec, "freq", rng);
    ++counts[s.empty() ? spec.vocabulary().eos_id() : s.ids[0]];
  }
  for (std::size_t t = 0; t < counts.size(); ++t) {
    const double p = d.probs[t];
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(counts[t] / double(n), p, 4 * se) << "token " << t;
  }
}

TEST(SampleSequence, SameSeedSameSequence) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 16);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    EXPECT_EQ(sample_sequence(spec, "x", r1), sample_sequence(spec, "x", r2));
  }
}

TEST(SequenceLogProb, EmptySequenceIsEos) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 4);
  const NextTokenDist d = next_token_dist(spec, "z", TokenSeq{});
  EXPECT_DOUBLE_EQ(sequence_log_prob(spec, "z", TokenSeq{}), d.log_probs[spec.vocabulary().eos_id()]);
}

TEST(SequenceLogProb, TotalMassOverAllSequencesIsOne) {
  const ModelSpec spec = small_model({"a", "b", "c"}, 3);
  double total = std::exp(sequence_log_prob(spec, "m", TokenSeq{}));
  for (TokenId x = 0; x < 3; ++x) {
    total += std::exp(sequence_log_prob(spec, "m", TokenSeq{{x}}));
    for (TokenId y = 0; y < 3; ++y) {
      total += std::exp(sequence_log_prob(spec, "m", TokenSeq{{x, y}}));
      for (TokenId z = 0; z < 3; ++z) {
        total += std::exp(sequence_log_prob(spec, "m", TokenSeq{{x, y, z}}));
      }
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(SequenceLogProb, TermByTerm) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 6);
  const TokenSeq seq{{2, 0, 1, 1}};
  double expected = 0.0;
  TokenSeq prefix;
  for (TokenId t : seq.ids) {
    expected += next_token_dist(spec, "tt", prefix).log_probs[t];
    prefix.ids.push_back(t);
  }
  expected += next_token_dist(spec, "tt", prefix).log_probs[spec.vocabulary().eos_id()];
  EXPECT_NEAR(sequence_log_prob(spec, "tt", seq), expected, 1e-12);
}

TEST(Constrained, UniqueTokenization) {
  const ModelSpec spec = small_model({"a", "b"}, 8);
  Rng rng(4);
  const ConstrainedSample s1 = sample_constrained(spec, "u", "abba", rng);
  const ConstrainedSample s2 = sample_constrained(spec, "u", "abba", rng);
  EXPECT_EQ(s1.seq, (TokenSeq{{0, 1, 1, 0}}));
  EXPECT_EQ(s1.log_weight, s2.log_weight);
}

TEST(Constrained, RejectsUnreachableTargets) {
  const ModelSpec spec = small_model({"a", "b"}, 3);
  EXPECT_THROW(ConstrainedSampler(spec, "u", "abab"), DomainError);
  EXPECT_THROW(ConstrainedSampler(spec, "u", "abc"), DomainError);
}

TEST(Constrained, PathFrequenciesMatchMaskedProducts) {
  const ModelSpec spec = small_model({"a", "b", "ab"}, 8);
  const Vocabulary& v = spec.vocabulary();
  // Step 0 admits "a" and "ab"; after "a" only "b" fits; after a full match
  // only EOS. So the masked probability of [ab] is p(ab) / (p(a) + p(ab)).
  const NextTokenDist d0 = next_token_dist(spec, "pp", TokenSeq{});
  const double q_ab = d0.probs[2] / (d0.probs[0] + d0.probs[2]);
  const int n = 100'000;
  int hits = 0;
  Rng rng(5);
  const ConstrainedSampler sampler(spec, "pp", "ab");
  for (int i = 0; i < n; ++i) {
    const ConstrainedSample s = sampler.sample(rng);
    if (s.seq == seq_of({"ab"}, v)) {
      ++hits;
    } else {
      ASSERT_EQ(s.seq, seq_of({"a", "b"}, v));
    }
  }
  EXPECT_NEAR(hits / double(n), q_ab, 4 * std::sqrt(q_ab * (1 - q_ab) / n));
}

TEST(Constrained, WeightIdentity) {
  const ModelSpec spec = small_model({"a", "b", "ab", "ba", "aba"}, 8, 9, 0.8, 0.1);
  const Vocabulary& v = spec.vocabulary();
  const ConstrainedSampler sampler(spec, "wi", "abababa");
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const ConstrainedSample s = sampler.sample(rng);
    ASSERT_EQ(str_of(s.seq, v), "abababa");
    double sum_log_z = 0.0;
    double masked_log_prob = 0.0;
    TokenSeq prefix;
    for (std::size_t j = 0; j <= s.seq.len(); ++j) {
      const auto step = sampler.masked_step(prefix);
      const TokenId chosen = j < s.seq.len() ? s.seq.ids[j] : v.eos_id();
      sum_log_z += step.log_z;
      masked_log_prob += std::log(step.probs[chosen]);
      if (j < s.seq.len()) prefix.ids.push_back(chosen);
    }
    EXPECT_NEAR(s.log_weight, sum_log_z, 1e-9);
    EXPECT_NEAR(s.log_weight, sequence_log_prob(spec, "wi", s.seq) - masked_log_prob, 1e-9);
  }
}
