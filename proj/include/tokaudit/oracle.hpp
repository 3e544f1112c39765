#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tokaudit/corpus.hpp"
#include "tokaudit/estimator.hpp"
#include "tokaudit/policies.hpp"
#include "tokaudit/rng.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

// Exact computations by exhaustive enumeration, usable only at toy scale.
// Every routine throws ResourceError rather than silently truncating.

inline constexpr std::size_t kDefaultEnumerationCap = 100'000;

struct EnumeratedDistribution {
  std::vector<std::pair<TokenSeq, double>> entries;  // (sequence, log-probability)
  double total_mass = 0.0;
};

// Walks the generation tree of the model for one prompt, down to max_len.
EnumeratedDistribution enumerate_output_distribution(const ModelSpec& spec,
                                                     std::string_view prompt,
                                                     std::size_t cap = kDefaultEnumerationCap);

// Expected token count among the model's outputs spelling `target`.
double conditional_expected_length(const ModelSpec& spec, std::string_view prompt,
                                   std::string_view target,
                                   std::size_t cap = kDefaultEnumerationCap);

// Expected extra reported tokens per output, averaged uniformly over the
// corpus. Exact: random(m) goes through the split-lattice recursion.
double exact_intensity(const PolicySpec& policy, const ModelSpec& spec,
                       const PromptCorpus& prompts, std::size_t cap = kDefaultEnumerationCap,
                       std::size_t max_lattice_states = 10'000);

struct EvidenceMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;   // unbiased sample variance
  double std_error = 0.0;  // of the mean
  double min_evidence = 0.0;
  double max_evidence = 0.0;
  double lambda0 = 0.0;
  double b_minus = 0.0;  // min of 1 + lambda0 * E over the draws
  double b_plus = 0.0;   // max of 1 + lambda0 * E over the draws
};

// Monte Carlo moments of the evidence seen by an audit step under `policy`.
EvidenceMoments evidence_moments(const PolicySpec& policy, const ModelSpec& spec,
                                 const PromptCorpus& prompts, const TruncationDist& trunc,
                                 std::size_t n, double lambda0, Rng& rng);

// Total-variation distance between an enumerated distribution and the
// empirical distribution of `draws`.
double total_variation(const EnumeratedDistribution& dist, std::span<const TokenSeq> draws);

}  // namespace tokaudit
