#include "tokaudit/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tokaudit/errors.hpp"

namespace tokaudit {

namespace {

constexpr std::uint64_t kMissingContext = 0xC0FFEE0DDF00DULL;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double hashed_unit(std::uint64_t key) noexcept {
  return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
}

}  // namespace

void ModelSpec::validate() const {
  if (!vocab) throw DomainError("model has no vocabulary");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("temperature must be positive");
  }
  if (!(eos_boost >= 0.0) || !std::isfinite(eos_boost)) {
    throw DomainError("eos_boost must be nonnegative");
  }
  if (max_len < 1) throw DomainError("max_len must be at least 1");
}

std::uint64_t prompt_digest(std::string_view prompt) noexcept {
  // FNV-1a
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

NextTokenDist next_token_dist(const ModelSpec& spec, std::uint64_t digest,
                              std::span<const TokenId> prefix) {
  const Vocabulary& vocab = spec.vocabulary();
  const std::size_t n = vocab.size();
  const TokenId eos = vocab.eos_id();
  if (prefix.size() > spec.max_len) {
    throw DomainError("prefix length " + std::to_string(prefix.size()) +
                      " exceeds max_len " + std::to_string(spec.max_len));
  }

  NextTokenDist dist;
  if (prefix.size() == spec.max_len) {
    dist.probs.assign(n, 0.0);
    dist.log_probs.assign(n, kNegInf);
    dist.probs[eos] = 1.0;
    dist.log_probs[eos] = 0.0;
    return dist;
  }

  std::uint64_t context = mix64(spec.seed ^ mix64(digest));
  for (std::size_t j = 0; j < spec.context_window; ++j) {
    const std::uint64_t slot = j < prefix.size()
                                   ? static_cast<std::uint64_t>(prefix[prefix.size() - 1 - j])
                                   : kMissingContext;
    context = mix64(context ^ (slot + 1));
  }

  std::vector<double> scaled(n);
  for (TokenId t = 0; t < n; ++t) {
    double logit = kLogitHalfRange * (2.0 * hashed_unit(context ^ mix64(t + 0x5EEDULL)) - 1.0);
    if (t == eos) logit += spec.eos_boost * static_cast<double>(prefix.size());
    scaled[t] = logit / spec.temperature;
  }
  const double top = *std::max_element(scaled.begin(), scaled.end());
  double sum = 0.0;
  for (double s : scaled) sum += std::exp(s - top);
  const double log_norm = top + std::log(sum);

  dist.log_probs.resize(n);
  dist.probs.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    dist.log_probs[t] = scaled[t] - log_norm;
    dist.probs[t] = std::exp(dist.log_probs[t]);
  }
  return dist;
}

NextTokenDist next_token_dist(const ModelSpec& spec, std::string_view prompt,
                              const TokenSeq& prefix) {
  return next_token_dist(spec, prompt_digest(prompt), prefix.ids);
}

TokenSeq sample_sequence(const ModelSpec& spec, std::string_view prompt, Rng& rng) {
  const std::uint64_t digest = prompt_digest(prompt);
  const TokenId eos = spec.vocabulary().eos_id();
  TokenSeq seq;
  for (;;) {
    const NextTokenDist dist = next_token_dist(spec, digest, seq.ids);
    const auto t = static_cast<TokenId>(rng.categorical(dist.probs));
    if (t == eos) return seq;
    seq.ids.push_back(t);
  }
}

double sequence_log_prob(const ModelSpec& spec, std::string_view prompt, const TokenSeq& seq) {
  if (seq.len() > spec.max_len) {
    throw DomainError("sequence length " + std::to_string(seq.len()) + " exceeds max_len");
  }
  const std::uint64_t digest = prompt_digest(prompt);
  const std::span<const TokenId> ids(seq.ids);
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    total += next_token_dist(spec, digest, ids.first(i)).log_probs[ids[i]];
  }
  total += next_token_dist(spec, digest, ids).log_probs[spec.vocabulary().eos_id()];
  return total;
}

ConstrainedSampler::ConstrainedSampler(const ModelSpec& spec, std::string_view prompt,
                                       std::string target)
    : spec_(spec),
      digest_(prompt_digest(prompt)),
      target_(std::move(target)),
      min_to_complete_(min_tokens_to_complete(target_, spec.vocabulary())) {
  if (min_to_complete_[0] == kNoLimit) {
    throw DomainError("target \"" + target_ + "\" has no tokenization");
  }
  if (min_to_complete_[0] > spec_.max_len) {
    throw DomainError("target \"" + target_ + "\" needs " +
                      std::to_string(min_to_complete_[0]) + " tokens, above max_len " +
                      std::to_string(spec_.max_len));
  }
}

bool ConstrainedSampler::admissible(std::size_t matched_chars, std::size_t length,
                                    TokenId id) const {
  const Vocabulary& vocab = spec_.vocabulary();
  if (id == vocab.eos_id()) return matched_chars == target_.size();
  if (!extends_prefix(matched_chars, id, target_, vocab)) return false;
  const std::size_t rest = min_to_complete_[matched_chars + vocab.str(id).size()];
  return rest != kNoLimit && length + 1 + rest <= spec_.max_len;
}

ConstrainedSampler::MaskedStep ConstrainedSampler::masked_step(
    std::span<const TokenId> prefix, std::size_t matched_chars) const {
  const NextTokenDist dist = next_token_dist(spec_, digest_, prefix);
  const std::size_t n = dist.probs.size();

  MaskedStep step;
  step.probs.assign(n, 0.0);
  double top = kNegInf;
  for (TokenId t = 0; t < n; ++t) {
    if (admissible(matched_chars, prefix.size(), t)) top = std::max(top, dist.log_probs[t]);
  }
  if (top == kNegInf) {
    throw InvariantViolation("masked distribution is empty after " +
                             std::to_string(matched_chars) + " characters of \"" + target_ +
                             "\"");
  }
  double sum = 0.0;
  for (TokenId t = 0; t < n; ++t) {
    if (admissible(matched_chars, prefix.size(), t)) sum += std::exp(dist.log_probs[t] - top);
  }
  step.log_z = top + std::log(sum);
  for (TokenId t = 0; t < n; ++t) {
    if (admissible(matched_chars, prefix.size(), t)) {
      step.probs[t] = std::exp(dist.log_probs[t] - step.log_z);
    }
  }
  return step;
}

ConstrainedSampler::MaskedStep ConstrainedSampler::masked_step(const TokenSeq& prefix) const {
  const std::string spelled = str_of(prefix, spec_.vocabulary());
  if (target_.compare(0, spelled.size(), spelled) != 0 || spelled.size() > target_.size()) {
    throw DomainError("prefix \"" + spelled + "\" does not spell a prefix of the target");
  }
  return masked_step(prefix.ids, spelled.size());
}

ConstrainedSample ConstrainedSampler::sample(Rng& rng) const {
  const Vocabulary& vocab = spec_.vocabulary();
  ConstrainedSample out;
  std::size_t matched = 0;
  for (;;) {
    const MaskedStep step = masked_step(out.seq.ids, matched);
    out.log_weight += step.log_z;
    const auto t = static_cast<TokenId>(rng.categorical(step.probs));
    if (t == vocab.eos_id()) return out;
    out.seq.ids.push_back(t);
    matched += vocab.str(t).size();
  }
}

ConstrainedSample sample_constrained(const ModelSpec& spec, std::string_view prompt,
                                     std::string_view target, Rng& rng) {
  return ConstrainedSampler(spec, prompt, std::string(target)).sample(rng);
}

}  // namespace tokaudit
