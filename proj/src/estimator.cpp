#include "tokaudit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tokaudit/errors.hpp"

namespace tokaudit {

TruncationDist TruncationDist::poisson(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("poisson rate must be positive");
  return {Kind::kPoisson, rate};
}

TruncationDist TruncationDist::geometric(double success_prob) {
  if (!(success_prob > 0.0 && success_prob < 1.0)) {
    throw DomainError("geometric success probability must lie in (0, 1)");
  }
  return {Kind::kGeometric, success_prob};
}

TruncationDist TruncationDist::deterministic(std::size_t k0) {
  if (k0 < 1) throw DomainError("deterministic truncation needs k0 >= 1");
  return {Kind::kDeterministic, static_cast<double>(k0)};
}

double TruncationDist::pmf(std::size_t k) const {
  const auto kd = static_cast<double>(k);
  switch (kind_) {
    case Kind::kPoisson:
      return std::exp(kd * std::log(param_) - param_ - std::lgamma(kd + 1.0));
    case Kind::kGeometric:
      return param_ * std::pow(1.0 - param_, kd);
    case Kind::kDeterministic:
      return kd == param_ ? 1.0 : 0.0;
  }
  return 0.0;
}

double TruncationDist::survival(std::size_t k) const {
  if (k < 1) throw DomainError("survival is defined for k >= 1");
  switch (kind_) {
    case Kind::kPoisson: {
      // Tail sum from pmf(k) upward; no cancellation against the head.
      double term = pmf(k);
      double sum = 0.0;
      for (std::size_t j = k;; ++j) {
        sum += term;
        term *= param_ / static_cast<double>(j + 1);
        if (static_cast<double>(j) > param_ && term <= sum * 1e-18) break;
        if (term == 0.0) break;
      }
      return std::min(sum, 1.0);
    }
    case Kind::kGeometric:
      return std::pow(1.0 - param_, static_cast<double>(k));
    case Kind::kDeterministic:
      return static_cast<double>(k) <= param_ ? 1.0 : 0.0;
  }
  return 0.0;
}

std::size_t TruncationDist::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::kPoisson: {
      // Inversion along the pmf recurrence.
      const double u = rng.uniform();
      double p = std::exp(-param_);
      double cdf = p;
      std::size_t k = 0;
      while (u >= cdf && p > 0.0) {
        ++k;
        p *= param_ / static_cast<double>(k);
        cdf += p;
      }
      return k;
    }
    case Kind::kGeometric: {
      const double u = rng.uniform();
      return static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log1p(-param_)));
    }
    case Kind::kDeterministic:
      return static_cast<std::size_t>(param_);
  }
  return 0;
}

std::string TruncationDist::describe() const {
  switch (kind_) {
    case Kind::kPoisson:
      return "poisson(" + std::to_string(param_) + ")";
    case Kind::kGeometric:
      return "geometric(" + std::to_string(param_) + ")";
    case Kind::kDeterministic:
      return "deterministic(" + std::to_string(static_cast<std::size_t>(param_)) + ")";
  }
  return {};
}

double survival(const TruncationDist& dist, std::size_t k) { return dist.survival(k); }

double weighted_running_mean(std::span<const ConstrainedSample> samples, std::size_t k) {
  if (k < 1 || k > samples.size()) throw DomainError("k must lie in [1, number of samples]");
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) shift = std::max(shift, samples[j].log_weight);
  double weight_sum = 0.0;
  double weighted_len = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = std::exp(samples[j].log_weight - shift);
    weight_sum += w;
    weighted_len += w * static_cast<double>(samples[j].seq.len());
  }
  if (!(weight_sum > 0.0)) throw InvariantViolation("importance weights sum to zero");
  return weighted_len / weight_sum;
}

LengthEstimate estimate_length(const ModelSpec& spec, std::string_view prompt,
                               std::string_view target, const TruncationDist& trunc,
                               Rng& rng) {
  const ConstrainedSampler sampler(spec, prompt, std::string(target));
  LengthEstimate est;
  est.k_used = trunc.sample(rng);
  est.samples.reserve(est.k_used);

  // Running sums rescaled whenever a new maximum log-weight appears.
  double shift = -std::numeric_limits<double>::infinity();
  double weight_sum = 0.0;
  double weighted_len = 0.0;
  double previous = 0.0;  // R_0
  for (std::size_t k = 1; k <= est.k_used; ++k) {
    ConstrainedSample s = sampler.sample(rng);
    if (s.log_weight > shift) {
      const double rescale = std::exp(shift - s.log_weight);
      weight_sum *= rescale;
      weighted_len *= rescale;
      shift = s.log_weight;
    }
    const double w = std::exp(s.log_weight - shift);
    weight_sum += w;
    weighted_len += w * static_cast<double>(s.seq.len());
    const double current = weighted_len / weight_sum;
    est.value += (current - previous) / trunc.survival(k);
    previous = current;
    est.samples.push_back(std::move(s));
  }
  return est;
}

}  // namespace tokaudit
