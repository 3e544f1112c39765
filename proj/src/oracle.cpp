#include "tokaudit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "tokaudit/audit.hpp"
#include "tokaudit/errors.hpp"

namespace tokaudit {

namespace {

struct OutputTreeWalk {
  const ModelSpec& spec;
  std::uint64_t digest;
  std::size_t cap;
  EnumeratedDistribution out;
  TokenSeq current;

  void visit(double log_prob) {
    const NextTokenDist dist = next_token_dist(spec, digest, current.ids);
    const TokenId eos = spec.vocabulary().eos_id();
    if (out.entries.size() == cap) {
      throw ResourceError("output distribution exceeds cap " + std::to_string(cap),
                          out.entries.size());
    }
    out.entries.emplace_back(current, log_prob + dist.log_probs[eos]);
    if (current.len() == spec.max_len) return;
    for (TokenId t = 0; t < eos; ++t) {
      current.ids.push_back(t);
      visit(log_prob + dist.log_probs[t]);
      current.ids.pop_back();
    }
  }
};

double log_sum_exp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - top);
  return top + std::log(sum);
}

}  // namespace

EnumeratedDistribution enumerate_output_distribution(const ModelSpec& spec,
                                                     std::string_view prompt, std::size_t cap) {
  spec.validate();
  OutputTreeWalk walk{spec, prompt_digest(prompt), cap, {}, {}};
  walk.visit(0.0);
  std::vector<double> logs;
  logs.reserve(walk.out.entries.size());
  for (const auto& [seq, lp] : walk.out.entries) logs.push_back(lp);
  walk.out.total_mass = std::exp(log_sum_exp(logs));
  return std::move(walk.out);
}

double conditional_expected_length(const ModelSpec& spec, std::string_view prompt,
                                   std::string_view target, std::size_t cap) {
  const std::vector<TokenSeq> tokenizations =
      enumerate_tokenizations(target, spec.vocabulary(), cap, spec.max_len);
  if (tokenizations.empty()) {
    throw DomainError("target \"" + std::string(target) + "\" has no tokenization within max_len");
  }
  std::vector<double> log_probs;
  log_probs.reserve(tokenizations.size());
  for (const TokenSeq& t : tokenizations) log_probs.push_back(sequence_log_prob(spec, prompt, t));
  const double log_norm = log_sum_exp(log_probs);
  double mean = 0.0;
  for (std::size_t i = 0; i < tokenizations.size(); ++i) {
    mean += std::exp(log_probs[i] - log_norm) * static_cast<double>(tokenizations[i].len());
  }
  return mean;
}

double exact_intensity(const PolicySpec& policy, const ModelSpec& spec,
                       const PromptCorpus& prompts, std::size_t cap,
                       std::size_t max_lattice_states) {
  if (prompts.empty()) throw DomainError("prompt corpus is empty");
  policy.validate();
  if (policy.kind == PolicySpec::Kind::kFaithful) return 0.0;

  DeltaOptions options;
  options.max_lattice_states = max_lattice_states;
  options.allow_monte_carlo = false;
  double total = 0.0;
  for (const std::string& prompt : prompts.prompts) {
    const EnumeratedDistribution dist = enumerate_output_distribution(spec, prompt, cap);
    double per_prompt = 0.0;
    for (const auto& [seq, lp] : dist.entries) {
      const double delta = delta_pi(policy, spec, prompt, seq, options).value;
      if (delta != 0.0) per_prompt += std::exp(lp) * delta;
    }
    total += per_prompt;
  }
  return total / static_cast<double>(prompts.size());
}

EvidenceMoments evidence_moments(const PolicySpec& policy, const ModelSpec& spec,
                                 const PromptCorpus& prompts, const TruncationDist& trunc,
                                 std::size_t n, double lambda0, Rng& rng) {
  if (n < 2) throw DomainError("evidence_moments needs n >= 2");
  if (prompts.empty()) throw DomainError("prompt corpus is empty");
  EvidenceMoments m;
  m.n = n;
  m.lambda0 = lambda0;
  m.min_evidence = std::numeric_limits<double>::infinity();
  m.max_evidence = -std::numeric_limits<double>::infinity();
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& prompt = prompts.prompts[rng.uniform_index(prompts.size())];
    const TokenSeq generated = sample_sequence(spec, prompt, rng);
    const TokenSeq reported = apply_policy(policy, spec, prompt, generated, rng);
    const LengthEstimate est =
        estimate_length(spec, prompt, str_of(reported, spec.vocabulary()), trunc, rng);
    const double e = evidence(reported, est);
    m.min_evidence = std::min(m.min_evidence, e);
    m.max_evidence = std::max(m.max_evidence, e);
    const double delta = e - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (e - mean);
  }
  m.mean = mean;
  m.variance = m2 / static_cast<double>(n - 1);
  m.std_error = std::sqrt(m.variance / static_cast<double>(n));
  m.b_minus = 1.0 + lambda0 * m.min_evidence;
  m.b_plus = 1.0 + lambda0 * m.max_evidence;
  return m;
}

double total_variation(const EnumeratedDistribution& dist, std::span<const TokenSeq> draws) {
  std::map<TokenSeq, double> empirical;
  for (const TokenSeq& s : draws) empirical[s] += 1.0;
  const auto n = static_cast<double>(draws.size());
  double tv = 0.0;
  for (const auto& [seq, lp] : dist.entries) {
    double freq = 0.0;
    if (auto it = empirical.find(seq); it != empirical.end()) {
      freq = it->second / n;
      empirical.erase(it);
    }
    tv += std::abs(std::exp(lp) - freq);
  }
  for (const auto& [seq, count] : empirical) tv += count / n;
  return 0.5 * tv;
}

}  // namespace tokaudit
