#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tokaudit/rng.hpp"
#include "tokaudit/tokenspace.hpp"

namespace tokaudit {

// Stand-in for the provider's language model: logits are a keyed hash of
// (seed, prompt, last context_window token ids), so every distribution is
// reproducible and every expectation can be enumerated exactly.
struct ModelSpec {
  std::uint64_t seed = 0;
  std::shared_ptr<const Vocabulary> vocab;
  std::size_t context_window = 2;
  double temperature = 1.0;
  double eos_boost = 0.05;
  std::size_t max_len = 16;

  // Throws DomainError unless temperature > 0, max_len >= 1 and vocab is set.
  void validate() const;
  const Vocabulary& vocabulary() const { return *vocab; }
};

// Hashed logits are uniform on [-kLogitHalfRange, kLogitHalfRange] before
// the EOS boost and temperature are applied.
inline constexpr double kLogitHalfRange = 2.0;

struct NextTokenDist {
  std::vector<double> probs;      // indexed by token id, EOS included
  std::vector<double> log_probs;  // log(probs), computed directly from logits
};

std::uint64_t prompt_digest(std::string_view prompt) noexcept;

NextTokenDist next_token_dist(const ModelSpec& spec, std::string_view prompt,
                              const TokenSeq& prefix);
NextTokenDist next_token_dist(const ModelSpec& spec, std::uint64_t digest,
                              std::span<const TokenId> prefix);

// Samples until EOS; the returned sequence excludes EOS.
TokenSeq sample_sequence(const ModelSpec& spec, std::string_view prompt, Rng& rng);

// Sum of per-step log-probabilities, including the terminating EOS.
double sequence_log_prob(const ModelSpec& spec, std::string_view prompt, const TokenSeq& seq);

struct ConstrainedSample {
  TokenSeq seq;
  // log P(seq, EOS | prompt) - log Pmasked(seq, EOS | prompt) = sum of log Z.
  double log_weight = 0.0;
};

// Draws token sequences spelling a fixed target, one token at a time, from the
// model's next-token distribution restricted to tokens that keep the partial
// string a prefix of the target. EOS is admitted only once the target is
// complete. Tokens after which the target can no longer be finished within
// max_len are masked as well, so a path never dead-ends.
class ConstrainedSampler {
 public:
  // Throws DomainError if no tokenization of target fits in max_len tokens.
  ConstrainedSampler(const ModelSpec& spec, std::string_view prompt, std::string target);

  ConstrainedSample sample(Rng& rng) const;

  // Masked, renormalized distribution after `prefix` (which must spell a
  // prefix of the target), plus the log normalizer.
  struct MaskedStep {
    std::vector<double> probs;
    double log_z = 0.0;
  };
  MaskedStep masked_step(const TokenSeq& prefix) const;

  const std::string& target() const noexcept { return target_; }

 private:
  bool admissible(std::size_t matched_chars, std::size_t length, TokenId id) const;
  MaskedStep masked_step(std::span<const TokenId> prefix, std::size_t matched_chars) const;

  ModelSpec spec_;
  std::uint64_t digest_;
  std::string target_;
  std::vector<std::size_t> min_to_complete_;
};

ConstrainedSample sample_constrained(const ModelSpec& spec, std::string_view prompt,
                                     std::string_view target, Rng& rng);

}  // namespace tokaudit
