#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tokaudit {

using TokenId = std::uint32_t;

// Ordered token ids, never containing the end-of-sequence marker.
struct TokenSeq {
  std::vector<TokenId> ids;

  std::size_t len() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
  friend auto operator<=>(const TokenSeq&, const TokenSeq&) = default;
};

// Immutable token table. Ids 0..N-2 are the tokens given at construction, in
// order; id N-1 is the end-of-sequence marker, whose string is empty.
//
// Construction enforces that every character occurring in any token also
// exists as a single-character token, so any string over the alphabet can be
// spelled one character at a time.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return strings_.size(); }
  TokenId eos_id() const noexcept { return static_cast<TokenId>(strings_.size() - 1); }
  bool is_valid(TokenId id) const noexcept { return id < strings_.size(); }

  const std::string& str(TokenId id) const;
  std::optional<TokenId> find(std::string_view s) const;

  std::size_t max_token_chars() const noexcept { return max_token_chars_; }
  const std::string& alphabet() const noexcept { return alphabet_; }

  // Non-EOS token strings in id order.
  std::vector<std::string> token_strings() const;

  // Ids of tokens whose string occurs in `target` starting at `pos`, ascending.
  std::vector<TokenId> matches_at(std::string_view target, std::size_t pos) const;

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, TokenId> index_;
  std::string alphabet_;
  std::size_t max_token_chars_ = 0;
};

// One way of replacing seq[position] by two tokens spelling the same string.
struct Split {
  std::size_t position;
  TokenId first;
  TokenId second;

  friend bool operator==(const Split&, const Split&) = default;
  friend auto operator<=>(const Split&, const Split&) = default;
};

std::string str_of(const TokenSeq& seq, const Vocabulary& vocab);

// True iff str(seq) + str(next) is a prefix of target. Assumes str(seq) already
// is one.
bool is_string_prefix(const TokenSeq& seq, TokenId next, std::string_view target,
                      const Vocabulary& vocab);

// Same relation when the caller already knows |str(seq)|.
bool extends_prefix(std::size_t matched_chars, TokenId next, std::string_view target,
                    const Vocabulary& vocab);

// All two-token splits of every position, ordered by (position, first, second).
std::vector<Split> valid_splits(const TokenSeq& seq, const Vocabulary& vocab);

TokenSeq apply_split(const TokenSeq& seq, const Split& split);

inline constexpr std::size_t kNoLimit = std::numeric_limits<std::size_t>::max();

// Every token sequence spelling `target` (with at most max_tokens tokens), in
// depth-first order over ascending token ids. Throws ResourceError past cap.
std::vector<TokenSeq> enumerate_tokenizations(std::string_view target,
                                              const Vocabulary& vocab,
                                              std::size_t cap,
                                              std::size_t max_tokens = kNoLimit);

// Number of tokenizations of `target` with at most max_tokens tokens, by
// dynamic programming over (character position, tokens used).
double count_tokenizations(std::string_view target, const Vocabulary& vocab,
                           std::size_t max_tokens = kNoLimit);

// result[pos] = fewest tokens spelling target[pos..]; kNoLimit if impossible.
// result has target.size() + 1 entries and result[target.size()] = 0.
std::vector<std::size_t> min_tokens_to_complete(std::string_view target,
                                                 const Vocabulary& vocab);

}  // namespace tokaudit
