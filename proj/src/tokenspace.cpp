#include "tokaudit/tokenspace.hpp"

#include <algorithm>
#include <set>

#include "tokaudit/errors.hpp"

namespace tokaudit {

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.empty()) throw DomainError("vocabulary has no tokens");
  std::set<char> chars;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& s = tokens[i];
    if (s.empty()) {
      throw DomainError("token " + std::to_string(i) + " has an empty string");
    }
    if (!index_.emplace(s, static_cast<TokenId>(i)).second) {
      throw DomainError("duplicate token string \"" + s + "\" at id " + std::to_string(i));
    }
    chars.insert(s.begin(), s.end());
    max_token_chars_ = std::max(max_token_chars_, s.size());
  }
  for (char c : chars) {
    if (!index_.contains(std::string(1, c))) {
      throw DomainError(std::string("character '") + c +
                        "' occurs in a token but is not itself a token");
    }
  }
  alphabet_.assign(chars.begin(), chars.end());
  strings_ = std::move(tokens);
  strings_.emplace_back();  // EOS
}

const std::string& Vocabulary::str(TokenId id) const {
  if (!is_valid(id)) throw DomainError("token id " + std::to_string(id) + " out of range");
  return strings_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view s) const {
  if (s.empty()) return std::nullopt;
  auto it = index_.find(std::string(s));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::token_strings() const {
  return {strings_.begin(), strings_.end() - 1};
}

std::vector<TokenId> Vocabulary::matches_at(std::string_view target, std::size_t pos) const {
  std::vector<TokenId> out;
  if (pos >= target.size()) return out;
  const std::size_t longest = std::min(max_token_chars_, target.size() - pos);
  for (std::size_t n = 1; n <= longest; ++n) {
    if (auto id = find(target.substr(pos, n))) out.push_back(*id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string str_of(const TokenSeq& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const TokenId id = seq.ids[i];
    if (!vocab.is_valid(id) || id == vocab.eos_id()) {
      throw DomainError("invalid token id " + std::to_string(id) + " at position " +
                        std::to_string(i));
    }
    out += vocab.str(id);
  }
  return out;
}

bool extends_prefix(std::size_t matched_chars, TokenId next, std::string_view target,
                    const Vocabulary& vocab) {
  if (next == vocab.eos_id() || !vocab.is_valid(next)) return false;
  const std::string& piece = vocab.str(next);
  if (matched_chars + piece.size() > target.size()) return false;
  return target.compare(matched_chars, piece.size(), piece) == 0;
}

bool is_string_prefix(const TokenSeq& seq, TokenId next, std::string_view target,
                      const Vocabulary& vocab) {
  return extends_prefix(str_of(seq, vocab).size(), next, target, vocab);
}

std::vector<Split> valid_splits(const TokenSeq& seq, const Vocabulary& vocab) {
  std::vector<Split> out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const std::string& s = vocab.str(seq.ids[i]);
    const std::size_t first_of_position = out.size();
    for (std::size_t cut = 1; cut < s.size(); ++cut) {
      auto left = vocab.find(std::string_view(s).substr(0, cut));
      auto right = vocab.find(std::string_view(s).substr(cut));
      if (left && right) out.push_back({i, *left, *right});
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first_of_position), out.end());
  }
  return out;
}

TokenSeq apply_split(const TokenSeq& seq, const Split& split) {
  TokenSeq out;
  out.ids.reserve(seq.ids.size() + 1);
  out.ids.insert(out.ids.end(), seq.ids.begin(),
                 seq.ids.begin() + static_cast<std::ptrdiff_t>(split.position));
  out.ids.push_back(split.first);
  out.ids.push_back(split.second);
  out.ids.insert(out.ids.end(),
                 seq.ids.begin() + static_cast<std::ptrdiff_t>(split.position) + 1,
                 seq.ids.end());
  return out;
}

namespace {

struct TokenizationWalk {
  std::string_view target;
  const Vocabulary& vocab;
  std::size_t cap;
  std::size_t max_tokens;
  std::vector<TokenSeq> found;
  TokenSeq current;

  void visit(std::size_t pos) {
    if (pos == target.size()) {
      if (found.size() == cap) {
        throw ResourceError("tokenization count exceeds cap " + std::to_string(cap),
                            found.size());
      }
      found.push_back(current);
      return;
    }
    if (current.len() == max_tokens) return;
    for (TokenId id : vocab.matches_at(target, pos)) {
      current.ids.push_back(id);
      visit(pos + vocab.str(id).size());
      current.ids.pop_back();
    }
  }
};

}  // namespace

std::vector<TokenSeq> enumerate_tokenizations(std::string_view target,
                                              const Vocabulary& vocab, std::size_t cap,
                                              std::size_t max_tokens) {
  if (cap < 1) throw DomainError("enumeration cap must be at least 1");
  TokenizationWalk walk{target, vocab, cap, max_tokens, {}, {}};
  walk.visit(0);
  return std::move(walk.found);
}

double count_tokenizations(std::string_view target, const Vocabulary& vocab,
                           std::size_t max_tokens) {
  const std::size_t n = target.size();
  // Any tokenization uses at most n tokens.
  const std::size_t budget = std::min(max_tokens, n);
  // ways[pos][k]: tokenizations of target[pos..] using exactly k tokens.
  std::vector<std::vector<double>> ways(n + 1, std::vector<double>(budget + 1, 0.0));
  ways[n][0] = 1.0;
  for (std::size_t pos = n; pos-- > 0;) {
    for (TokenId id : vocab.matches_at(target, pos)) {
      const std::size_t next = pos + vocab.str(id).size();
      for (std::size_t k = 1; k <= budget; ++k) ways[pos][k] += ways[next][k - 1];
    }
  }
  double total = 0.0;
  for (double w : ways[0]) total += w;
  return total;
}

std::vector<std::size_t> min_tokens_to_complete(std::string_view target,
                                                const Vocabulary& vocab) {
  const std::size_t n = target.size();
  std::vector<std::size_t> best(n + 1, kNoLimit);
  best[n] = 0;
  for (std::size_t pos = n; pos-- > 0;) {
    for (TokenId id : vocab.matches_at(target, pos)) {
      const std::size_t rest = best[pos + vocab.str(id).size()];
      if (rest != kNoLimit) best[pos] = std::min(best[pos], rest + 1);
    }
  }
  return best;
}

}  // namespace tokaudit
