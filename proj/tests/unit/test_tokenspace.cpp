#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "tokaudit/errors.hpp"
#include "tokaudit/tokenspace.hpp"

using namespace tokaudit;
using tokaudit::testing::seq_of;

namespace {

Vocabulary abab() { return Vocabulary({"a", "b", "ab"}); }

// Test-side oracle: every way of cutting `s` into vocabulary strings, found by
// trying all 2^(n-1) cut masks.
std::set<std::vector<std::string>> partitions(const std::string& s, const Vocabulary& v) {
  std::set<std::vector<std::string>> out;
  if (s.empty()) {
    out.insert({});
    return out;
  }
  const std::size_t cuts = s.size() - 1;
  for (std::uint64_t mask = 0; mask < (1ULL << cuts); ++mask) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i < cuts; ++i) {
      if (mask & (1ULL << i)) {
        parts.push_back(s.substr(start, i + 1 - start));
        start = i + 1;
      }
    }
    parts.push_back(s.substr(start));
    if (std::all_of(parts.begin(), parts.end(), [&](const auto& p) { return v.find(p); })) {
      out.insert(parts);
    }
  }
  return out;
}

std::string random_string(std::mt19937& g, const std::string& alphabet, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[g() % alphabet.size()];
  return s;
}

Vocabulary random_vocab(std::mt19937& g, std::size_t extra) {
  std::set<std::string> tokens = {"a", "b", "c"};
  while (tokens.size() < 3 + extra) tokens.insert(random_string(g, "abc", 2 + g() % 3));
  return Vocabulary(std::vector<std::string>(tokens.begin(), tokens.end()));
}

}  // namespace

TEST(Vocabulary, EosIsLastIdWithEmptyString) {
  const Vocabulary v = abab();
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.eos_id(), 3u);
  EXPECT_EQ(v.str(v.eos_id()), "");
  EXPECT_EQ(v.str(2), "ab");
  EXPECT_EQ(v.find("ab"), TokenId{2});
  EXPECT_FALSE(v.find("ba"));
}

TEST(Vocabulary, RejectsBadTables) {
  EXPECT_THROW(Vocabulary({"a", ""}), DomainError);
  EXPECT_THROW(Vocabulary({"a", "a"}), DomainError);
  EXPECT_THROW(Vocabulary({"a", "ab"}), DomainError);  // no "b"
  EXPECT_THROW(Vocabulary(std::vector<std::string>{}), DomainError);
}

TEST(StrOf, Examples) {
  const Vocabulary tang({"T", "a", "n", "g", "i", "e", "r", ",", " ", "M", "o", "c", "Tang",
                         "ier", " Morocco"});
  const TokenSeq s = seq_of({"Tang", "ier", ",", " Morocco"}, tang);
  EXPECT_EQ(str_of(s, tang), "Tangier, Morocco");
  EXPECT_EQ(s.len(), 4u);

  const Vocabulary v = abab();
  EXPECT_EQ(str_of(TokenSeq{}, v), "");
  EXPECT_EQ(str_of(seq_of({"a", "b"}, v), v), "ab");
}

TEST(StrOf, InvalidIdNamesPosition) {
  const Vocabulary v = abab();
  try {
    str_of(TokenSeq{{0, 9}}, v);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  EXPECT_THROW(str_of(TokenSeq{{v.eos_id()}}, v), DomainError);
}

TEST(IsStringPrefix, Examples) {
  const Vocabulary tang({"T", "a", "n", "g", "i", "e", "r", ",", " ", "M", "o", "c", "Tang",
                         "ier", " Morocco"});
  EXPECT_TRUE(is_string_prefix(seq_of({"Tang"}, tang), *tang.find("ier"), "Tangier, Morocco",
                               tang));
  const Vocabulary v = abab();
  EXPECT_FALSE(is_string_prefix(seq_of({"ab"}, v), *v.find("a"), "ab", v));
  EXPECT_TRUE(is_string_prefix(TokenSeq{}, *v.find("a"), "ab", v));
}

TEST(ValidSplits, Examples) {
  const Vocabulary v = abab();
  const TokenId a = 0, b = 1;
  EXPECT_EQ(valid_splits(seq_of({"ab"}, v), v), (std::vector<Split>{{0, a, b}}));
  EXPECT_TRUE(valid_splits(seq_of({"a"}, v), v).empty());
  EXPECT_EQ(valid_splits(seq_of({"ab", "ab"}, v), v),
            (std::vector<Split>{{0, a, b}, {1, a, b}}));
}

TEST(ValidSplits, SoundAndCompleteOnRandomVocabs) {
  std::mt19937 g(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Vocabulary v = random_vocab(g, 5 + g() % 22);  // at most 30 tokens
    TokenSeq seq;
    for (int i = 0; i < 5; ++i) seq.ids.push_back(g() % (v.size() - 1));
    const std::vector<Split> splits = valid_splits(seq, v);

    std::set<Split> expected;
    for (std::size_t pos = 0; pos < seq.len(); ++pos) {
      const std::string& s = v.str(seq.ids[pos]);
      for (std::size_t cut = 1; cut < s.size(); ++cut) {
        auto left = v.find(s.substr(0, cut));
        auto right = v.find(s.substr(cut));
        if (left && right) expected.insert({pos, *left, *right});
      }
    }
    EXPECT_EQ(std::set<Split>(splits.begin(), splits.end()), expected);
    EXPECT_TRUE(std::is_sorted(splits.begin(), splits.end()));
    for (const Split& sp : splits) {
      const TokenSeq after = apply_split(seq, sp);
      EXPECT_EQ(str_of(after, v), str_of(seq, v));
      EXPECT_EQ(after.len(), seq.len() + 1);
    }
  }
}

TEST(Tokenizations, Examples) {
  const Vocabulary v = abab();
  const auto ab = enumerate_tokenizations("ab", v, 100);
  EXPECT_EQ(std::set<TokenSeq>(ab.begin(), ab.end()),
            (std::set<TokenSeq>{seq_of({"ab"}, v), seq_of({"a", "b"}, v)}));
  EXPECT_EQ(enumerate_tokenizations("", v, 100), (std::vector<TokenSeq>{TokenSeq{}}));
  EXPECT_EQ(enumerate_tokenizations("ba", v, 100), (std::vector<TokenSeq>{seq_of({"b", "a"}, v)}));
}

TEST(Tokenizations, MatchCutMaskOracleAndCount) {
  std::mt19937 g(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Vocabulary v = random_vocab(g, 4 + g() % 8);
    const std::string target = random_string(g, "abc", 1 + g() % 12);
    const auto found = enumerate_tokenizations(target, v, 1'000'000);
    std::set<std::vector<std::string>> as_strings;
    for (const TokenSeq& t : found) {
      std::vector<std::string> parts;
      for (TokenId id : t.ids) parts.push_back(v.str(id));
      as_strings.insert(parts);
    }
    EXPECT_EQ(as_strings.size(), found.size());
    EXPECT_EQ(as_strings, partitions(target, v));
    EXPECT_EQ(count_tokenizations(target, v), static_cast<double>(found.size()));

    const std::size_t limit = 1 + target.size() / 2;
    const auto bounded = enumerate_tokenizations(target, v, 1'000'000, limit);
    const auto n_bounded = std::count_if(found.begin(), found.end(),
                                         [&](const TokenSeq& t) { return t.len() <= limit; });
    EXPECT_EQ(static_cast<std::ptrdiff_t>(bounded.size()), n_bounded);
    EXPECT_EQ(count_tokenizations(target, v, limit), static_cast<double>(n_bounded));

    const auto fewest = min_tokens_to_complete(target, v);
    ASSERT_EQ(fewest.size(), target.size() + 1);
    std::size_t best = kNoLimit;
    for (const TokenSeq& t : found) best = std::min(best, t.len());
    EXPECT_EQ(fewest[0], best);
    EXPECT_EQ(fewest[target.size()], 0u);
  }
}

TEST(Tokenizations, CapRaisesResourceError) {
  const Vocabulary v({"a", "aa"});
  // "aaaaaaaaaa" has Fibonacci(11) = 89 tokenizations.
  EXPECT_EQ(count_tokenizations("aaaaaaaaaa", v), 89.0);
  try {
    enumerate_tokenizations("aaaaaaaaaa", v, 50);
    FAIL();
  } catch (const ResourceError& e) {
    EXPECT_EQ(e.partial_count(), 50u);
  }
  EXPECT_THROW(enumerate_tokenizations("a", v, 0), DomainError);
}
