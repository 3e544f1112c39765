#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokaudit/rng.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

// Distribution of the number K of constrained samples drawn per estimate.
// Poisson and geometric are supported on {0, 1, 2, ...}; geometric counts
// failures before the first success.
class TruncationDist {
 public:
  enum class Kind { kPoisson, kGeometric, kDeterministic };

  static TruncationDist poisson(double rate);
  static TruncationDist geometric(double success_prob);
  static TruncationDist deterministic(std::size_t k0);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }

  // P(K = k).
  double pmf(std::size_t k) const;
  // P(K >= k), k >= 1.
  double survival(std::size_t k) const;
  std::size_t sample(Rng& rng) const;

  std::string describe() const;

 private:
  TruncationDist(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_;
};

double survival(const TruncationDist& dist, std::size_t k);

struct LengthEstimate {
  double value = 0.0;
  std::size_t k_used = 0;
  std::vector<ConstrainedSample> samples;
};

// Importance-weighted mean length of the first k samples, with weights
// exp(log_weight) shifted so the largest maps to 1.
double weighted_running_mean(std::span<const ConstrainedSample> samples, std::size_t k);

// Unbiased estimate of the expected token count of the model's tokenizations
// of `target`, conditional on the model producing that string:
//   sum_{k=1..K} (R_k - R_{k-1}) / P(K >= k),  K ~ trunc,
// where R_k is the weighted running mean over the first k constrained samples.
LengthEstimate estimate_length(const ModelSpec& spec, std::string_view prompt,
                               std::string_view target, const TruncationDist& trunc,
                               Rng& rng);

}  // namespace tokaudit
