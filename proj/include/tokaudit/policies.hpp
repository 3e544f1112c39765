#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tokaudit/rng.hpp"
#include "tokaudit/tokenspace.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

// How a provider turns the generated tokens into the reported ones. Every
// policy preserves the string and never shortens the sequence.
struct PolicySpec {
  enum class Kind { kFaithful, kRandom, kHeuristic };

  Kind kind = Kind::kFaithful;
  std::size_t m = 0;  // split budget
  double p = 0.9;     // top-p threshold, heuristic only

  static PolicySpec faithful() { return {}; }
  static PolicySpec random(std::size_t m) { return {Kind::kRandom, m, 0.9}; }
  static PolicySpec heuristic(std::size_t m, double p) { return {Kind::kHeuristic, m, p}; }

  void validate() const;
  std::string describe() const;
};

std::string_view to_string(PolicySpec::Kind kind);
PolicySpec::Kind policy_kind_from_string(std::string_view name);

// Smallest set of ids reaching cumulative probability p, taken in descending
// probability with ties broken by ascending id. Returned in that order.
struct TopPSet {
  std::vector<TokenId> members;

  bool contains(TokenId id) const;
};

TopPSet top_p_set(const NextTokenDist& dist, double p);
TopPSet top_p_set(std::span<const double> probs, double p);

TokenSeq random_split_policy(const TokenSeq& generated, std::size_t m, const Vocabulary& vocab,
                             Rng& rng);

TokenSeq heuristic_split_policy(const TokenSeq& generated, std::size_t m, double p,
                                const ModelSpec& spec, std::string_view prompt);

TokenSeq apply_policy(const PolicySpec& policy, const ModelSpec& spec, std::string_view prompt,
                      const TokenSeq& generated, Rng& rng);

struct DeltaOptions {
  std::size_t max_lattice_states = 10'000;
  // Monte Carlo fallback for random(m) when the split lattice is too large.
  bool allow_monte_carlo = true;
  std::size_t mc_draws = 10'000;
  std::uint64_t mc_seed = 0;
};

struct DeltaValue {
  double value = 0.0;
  double std_error = 0.0;  // zero when exact
  bool exact = true;
};

// Expected number of extra reported tokens, len(reported) - len(generated),
// over the policy's own randomness.
DeltaValue delta_pi(const PolicySpec& policy, const ModelSpec& spec, std::string_view prompt,
                    const TokenSeq& generated, const DeltaOptions& options = {});

// Exact expected number of successful splits of random(m), by recursion over
// the split lattice with memoization. Throws ResourceError past max_states.
double random_policy_expected_splits(const TokenSeq& generated, std::size_t m,
                                     const Vocabulary& vocab, std::size_t max_states);

}  // namespace tokaudit
