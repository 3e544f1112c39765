#include "tokaudit/policies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "tokaudit/errors.hpp"

namespace tokaudit {

void PolicySpec::validate() const {
  if (kind == Kind::kHeuristic && !(p > 0.0 && p < 1.0)) {
    throw DomainError("top-p threshold must lie in (0, 1)");
  }
}

std::string_view to_string(PolicySpec::Kind kind) {
  switch (kind) {
    case PolicySpec::Kind::kFaithful:
      return "faithful";
    case PolicySpec::Kind::kRandom:
      return "random";
    case PolicySpec::Kind::kHeuristic:
      return "heuristic";
  }
  return "unknown";
}

PolicySpec::Kind policy_kind_from_string(std::string_view name) {
  if (name == "faithful") return PolicySpec::Kind::kFaithful;
  if (name == "random") return PolicySpec::Kind::kRandom;
  if (name == "heuristic") return PolicySpec::Kind::kHeuristic;
  throw InputError("unknown policy \"" + std::string(name) + "\"");
}

std::string PolicySpec::describe() const {
  switch (kind) {
    case Kind::kFaithful:
      return "faithful";
    case Kind::kRandom:
      return "random(m=" + std::to_string(m) + ")";
    case Kind::kHeuristic:
      return "heuristic(m=" + std::to_string(m) + ", p=" + std::to_string(p) + ")";
  }
  return {};
}

bool TopPSet::contains(TokenId id) const {
  return std::find(members.begin(), members.end(), id) != members.end();
}

TopPSet top_p_set(std::span<const double> probs, double p) {
  std::vector<TokenId> order(probs.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return probs[a] > probs[b]; });
  TopPSet set;
  double mass = 0.0;
  for (TokenId id : order) {
    set.members.push_back(id);
    mass += probs[id];
    if (mass >= p) break;
  }
  return set;
}

TopPSet top_p_set(const NextTokenDist& dist, double p) { return top_p_set(dist.probs, p); }

TokenSeq random_split_policy(const TokenSeq& generated, std::size_t m, const Vocabulary& vocab,
                             Rng& rng) {
  TokenSeq reported = generated;
  for (std::size_t iter = 0; iter < m; ++iter) {
    const std::vector<Split> splits = valid_splits(reported, vocab);
    if (splits.empty()) break;
    reported = apply_split(reported, splits[rng.uniform_index(splits.size())]);
  }
  return reported;
}

namespace {

// Pair spelling str(token) that maximizes min(id1, id2); ties go to the
// lexicographically smallest (id1, id2).
std::optional<std::pair<TokenId, TokenId>> best_pair(TokenId token, const Vocabulary& vocab) {
  std::optional<std::pair<TokenId, TokenId>> best;
  for (const Split& s : valid_splits(TokenSeq{{token}}, vocab)) {
    if (!best || std::min(s.first, s.second) > std::min(best->first, best->second)) {
      best = std::pair{s.first, s.second};
    }
  }
  return best;
}

bool passes_top_p(const TokenSeq& seq, double p, const ModelSpec& spec,
                  std::string_view prompt) {
  if (seq.len() > spec.max_len) return false;
  const std::uint64_t digest = prompt_digest(prompt);
  const std::span<const TokenId> ids(seq.ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!top_p_set(next_token_dist(spec, digest, ids.first(i)), p).contains(ids[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace

TokenSeq heuristic_split_policy(const TokenSeq& generated, std::size_t m, double p,
                                const ModelSpec& spec, std::string_view prompt) {
  const Vocabulary& vocab = spec.vocabulary();
  TokenSeq modified = generated;
  for (std::size_t iter = 0; iter < m && !modified.empty(); ++iter) {
    const auto top = std::max_element(modified.ids.begin(), modified.ids.end());
    if (vocab.str(*top).size() == 1) break;
    const auto pair = best_pair(*top, vocab);
    if (!pair) break;
    const auto position = static_cast<std::size_t>(top - modified.ids.begin());
    modified = apply_split(modified, {position, pair->first, pair->second});
  }
  if (modified == generated) return generated;
  return passes_top_p(modified, p, spec, prompt) ? modified : generated;
}

TokenSeq apply_policy(const PolicySpec& policy, const ModelSpec& spec, std::string_view prompt,
                      const TokenSeq& generated, Rng& rng) {
  switch (policy.kind) {
    case PolicySpec::Kind::kFaithful:
      return generated;
    case PolicySpec::Kind::kRandom:
      return random_split_policy(generated, policy.m, spec.vocabulary(), rng);
    case PolicySpec::Kind::kHeuristic:
      return heuristic_split_policy(generated, policy.m, policy.p, spec, prompt);
  }
  return generated;
}

namespace {

class SplitLattice {
 public:
  SplitLattice(const Vocabulary& vocab, std::size_t max_states)
      : vocab_(vocab), max_states_(max_states) {}

  double expected_splits(const TokenSeq& seq, std::size_t remaining) {
    if (remaining == 0) return 0.0;
    auto key = std::pair{seq.ids, remaining};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (memo_.size() >= max_states_) {
      throw ResourceError("split lattice exceeds " + std::to_string(max_states_) + " states",
                          memo_.size());
    }
    const std::vector<Split> splits = valid_splits(seq, vocab_);
    double value = 0.0;
    if (!splits.empty()) {
      double sum = 0.0;
      for (const Split& s : splits) sum += expected_splits(apply_split(seq, s), remaining - 1);
      value = 1.0 + sum / static_cast<double>(splits.size());
    }
    memo_.emplace(std::move(key), value);
    return value;
  }

 private:
  const Vocabulary& vocab_;
  std::size_t max_states_;
  std::map<std::pair<std::vector<TokenId>, std::size_t>, double> memo_;
};

}  // namespace

double random_policy_expected_splits(const TokenSeq& generated, std::size_t m,
                                     const Vocabulary& vocab, std::size_t max_states) {
  return SplitLattice(vocab, max_states).expected_splits(generated, m);
}

DeltaValue delta_pi(const PolicySpec& policy, const ModelSpec& spec, std::string_view prompt,
                    const TokenSeq& generated, const DeltaOptions& options) {
  switch (policy.kind) {
    case PolicySpec::Kind::kFaithful:
      return {};
    case PolicySpec::Kind::kHeuristic: {
      const TokenSeq reported = heuristic_split_policy(generated, policy.m, policy.p, spec, prompt);
      return {static_cast<double>(reported.len() - generated.len()), 0.0, true};
    }
    case PolicySpec::Kind::kRandom:
      try {
        return {random_policy_expected_splits(generated, policy.m, spec.vocabulary(),
                                              options.max_lattice_states),
                0.0, true};
      } catch (const ResourceError&) {
        if (!options.allow_monte_carlo || options.mc_draws < 2) throw;
      }
      {
        Rng rng(options.mc_seed);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < options.mc_draws; ++i) {
          const TokenSeq reported =
              random_split_policy(generated, policy.m, spec.vocabulary(), rng);
          const auto d = static_cast<double>(reported.len() - generated.len());
          sum += d;
          sum_sq += d * d;
        }
        const auto n = static_cast<double>(options.mc_draws);
        const double mean = sum / n;
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        return {mean, std::sqrt(var / n), false};
      }
  }
  return {};
}

}  // namespace tokaudit
