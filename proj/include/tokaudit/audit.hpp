#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokaudit/corpus.hpp"
#include "tokaudit/estimator.hpp"
#include "tokaudit/policies.hpp"
#include "tokaudit/rng.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

// Betting fraction for step i >= 1: constant lambda0 or lambda0 / i.
struct LambdaSchedule {
  enum class Kind { kConstant, kDecreasing };

  Kind kind = Kind::kConstant;
  double lambda0 = 0.1;

  static LambdaSchedule constant(double lambda0);
  static LambdaSchedule decreasing(double lambda0);

  double at(std::size_t step) const;
  std::string describe() const;
};

struct EvidenceRecord {
  std::size_t step = 0;
  std::size_t prompt_id = 0;
  std::uint64_t prompt_digest = 0;
  std::size_t reported_len = 0;
  double estimate = 0.0;
  double evidence = 0.0;
  double lambda = 0.0;
  double factor = 1.0;
  double log_wealth = 0.0;  // after this step
  bool crossed = false;     // wealth above 1/alpha after this step
};

// log_wealth is authoritative; wealth() is derived for export.
struct WealthState {
  std::size_t step = 0;
  double log_wealth = 0.0;
  std::vector<EvidenceRecord> history;
  std::optional<EvidenceRecord> anomaly;  // nonpositive factor, not applied

  double wealth() const { return std::exp(log_wealth); }
};

// Reported length minus the estimated expected tokenization length.
double evidence(const TokenSeq& reported, const LengthEstimate& estimate);

// Multiplies wealth by 1 + lambda_{step+1} * e. A nonpositive factor is not
// applied: the returned state carries it in `anomaly` and the caller decides.
// `context` supplies the descriptive fields of the appended record.
WealthState update_wealth(const WealthState& state, double e, const LambdaSchedule& schedule,
                          EvidenceRecord context = {});

struct AnomalyMode {
  enum class Kind { kAbort, kClamp };

  Kind kind = Kind::kAbort;
  double epsilon = 1e-12;

  static AnomalyMode abort() { return {}; }
  static AnomalyMode clamp(double epsilon = 1e-12) { return {Kind::kClamp, epsilon}; }
};

struct AuditSettings {
  LambdaSchedule schedule;
  double alpha = 0.05;
  TruncationDist trunc = TruncationDist::poisson(7.0);
  std::size_t max_steps = 100;
  AnomalyMode anomaly_mode;

  void validate() const;
};

struct AuditOutcome {
  bool flagged = false;
  std::optional<std::size_t> tau;  // empty when censored or aborted
  std::size_t steps = 0;
  std::vector<EvidenceRecord> trajectory;
  double final_log_wealth = 0.0;
  std::optional<EvidenceRecord> anomaly;
  bool clamped = false;

  double final_wealth() const { return std::exp(final_log_wealth); }
};

// Sequential audit of a provider running `policy` on top of `spec`. Each step
// draws a prompt uniformly, lets the provider generate and report, estimates
// the expected tokenization length of the reported string, and bets on the
// difference. Stops at the first step whose wealth exceeds 1/alpha, at
// max_steps, or (in abort mode) at the first nonpositive factor.
AuditOutcome run_audit(const ModelSpec& spec, const PolicySpec& policy,
                       const PromptCorpus& prompts, const AuditSettings& settings, Rng& rng);

struct Calibration {
  double lambda = 0.0;
  double lambda_max = 0.0;
  double min_evidence = 0.0;
  std::vector<double> holdout_evidence;
};

// lambda_max = 1 / (-min E) when some E < 0, otherwise cap; returns
// safety * lambda_max.
Calibration lambda_from_evidence(std::span<const double> holdout_evidence, double safety,
                                 double cap);

// Draws n_holdout evidence values from a faithful provider on `holdout`
// prompts and calibrates lambda from them.
Calibration calibrate_lambda(const ModelSpec& spec, const PromptCorpus& holdout,
                             const TruncationDist& trunc, std::size_t n_holdout, double safety,
                             double cap, Rng& rng);

// Upper bound on the expected detection time under a constant schedule:
//   (log(1/alpha) + log b_plus) / (log(1 + lambda0 * intensity) - var_e * lambda0^2 / (2 b_minus^2))
// Empty when the denominator is not positive, i.e. the growth condition fails.
std::optional<double> detection_time_bound(double lambda0, double alpha, double intensity,
                                            double var_e, double b_minus, double b_plus);

}  // namespace tokaudit
