#include "tokaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tokaudit/errors.hpp"

namespace tokaudit {

LambdaSchedule LambdaSchedule::constant(double lambda0) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw DomainError("lambda0 must be positive");
  return {Kind::kConstant, lambda0};
}

LambdaSchedule LambdaSchedule::decreasing(double lambda0) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw DomainError("lambda0 must be positive");
  return {Kind::kDecreasing, lambda0};
}

double LambdaSchedule::at(std::size_t step) const {
  if (step < 1) throw DomainError("lambda schedule starts at step 1");
  return kind == Kind::kConstant ? lambda0 : lambda0 / static_cast<double>(step);
}

std::string LambdaSchedule::describe() const {
  return (kind == Kind::kConstant ? "constant(" : "decreasing(") + std::to_string(lambda0) + ")";
}

double evidence(const TokenSeq& reported, const LengthEstimate& estimate) {
  return static_cast<double>(reported.len()) - estimate.value;
}

WealthState update_wealth(const WealthState& state, double e, const LambdaSchedule& schedule,
                          EvidenceRecord context) {
  WealthState next = state;
  context.step = state.step + 1;
  context.evidence = e;
  context.lambda = schedule.at(context.step);
  context.factor = 1.0 + context.lambda * e;
  if (!(context.factor > 0.0)) {
    context.log_wealth = state.log_wealth;
    next.anomaly = context;
    return next;
  }
  next.step = context.step;
  next.log_wealth = state.log_wealth + std::log(context.factor);
  context.log_wealth = next.log_wealth;
  next.history.push_back(context);
  return next;
}

void AuditSettings::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (max_steps < 1) throw DomainError("max_steps must be at least 1");
  if (!(schedule.lambda0 > 0.0)) throw DomainError("lambda0 must be positive");
  if (anomaly_mode.kind == AnomalyMode::Kind::kClamp && !(anomaly_mode.epsilon > 0.0)) {
    throw DomainError("clamp epsilon must be positive");
  }
}

AuditOutcome run_audit(const ModelSpec& spec, const PolicySpec& policy,
                       const PromptCorpus& prompts, const AuditSettings& settings, Rng& rng) {
  if (prompts.empty()) throw DomainError("prompt corpus is empty");
  settings.validate();
  policy.validate();
  const double log_threshold = -std::log(settings.alpha);
  const Vocabulary& vocab = spec.vocabulary();

  AuditOutcome outcome;
  WealthState state;
  for (std::size_t i = 1; i <= settings.max_steps; ++i) {
    EvidenceRecord context;
    context.prompt_id = static_cast<std::size_t>(rng.uniform_index(prompts.size()));
    const std::string& prompt = prompts.prompts[context.prompt_id];
    context.prompt_digest = prompt_digest(prompt);

    const TokenSeq generated = sample_sequence(spec, prompt, rng);
    const TokenSeq reported = apply_policy(policy, spec, prompt, generated, rng);
    context.reported_len = reported.len();

    LengthEstimate estimate;
    try {
      estimate = estimate_length(spec, prompt, str_of(reported, vocab), settings.trunc, rng);
    } catch (const DomainError& e) {
      throw DomainError("audit step " + std::to_string(i) + ": " + e.what());
    } catch (const InvariantViolation& e) {
      throw InvariantViolation("audit step " + std::to_string(i) + ": " + e.what());
    }
    context.estimate = estimate.value;
    const double e = evidence(reported, estimate);

    state = update_wealth(state, e, settings.schedule, context);
    if (state.anomaly) {
      outcome.anomaly = state.anomaly;
      if (settings.anomaly_mode.kind == AnomalyMode::Kind::kAbort) break;
      // Clamp: apply epsilon in place of the nonpositive factor.
      EvidenceRecord clamped = *state.anomaly;
      clamped.factor = settings.anomaly_mode.epsilon;
      state.anomaly.reset();
      state.step = clamped.step;
      state.log_wealth += std::log(clamped.factor);
      clamped.log_wealth = state.log_wealth;
      state.history.push_back(clamped);
      outcome.clamped = true;
    }

    EvidenceRecord& last = state.history.back();
    last.crossed = state.log_wealth > log_threshold;
    if (last.crossed) {
      outcome.flagged = true;
      outcome.tau = i;
      break;
    }
  }
  outcome.steps = state.step;
  outcome.final_log_wealth = state.log_wealth;
  outcome.trajectory = std::move(state.history);
  return outcome;
}

Calibration lambda_from_evidence(std::span<const double> holdout_evidence, double safety,
                                 double cap) {
  if (holdout_evidence.empty()) throw DomainError("no holdout evidence");
  if (!(safety > 0.0 && safety <= 1.0)) throw DomainError("safety must lie in (0, 1]");
  if (!(cap > 0.0)) throw DomainError("lambda cap must be positive");
  Calibration cal;
  cal.holdout_evidence.assign(holdout_evidence.begin(), holdout_evidence.end());
  cal.min_evidence = *std::min_element(holdout_evidence.begin(), holdout_evidence.end());
  cal.lambda_max = cal.min_evidence < 0.0 ? 1.0 / -cal.min_evidence : cap;
  cal.lambda = safety * cal.lambda_max;
  return cal;
}

Calibration calibrate_lambda(const ModelSpec& spec, const PromptCorpus& holdout,
                             const TruncationDist& trunc, std::size_t n_holdout, double safety,
                             double cap, Rng& rng) {
  if (n_holdout < 1) throw DomainError("n_holdout must be at least 1");
  if (holdout.empty()) throw DomainError("holdout corpus is empty");
  std::vector<double> values;
  values.reserve(n_holdout);
  for (std::size_t i = 0; i < n_holdout; ++i) {
    const std::string& prompt = holdout.prompts[rng.uniform_index(holdout.size())];
    const TokenSeq generated = sample_sequence(spec, prompt, rng);
    const LengthEstimate est =
        estimate_length(spec, prompt, str_of(generated, spec.vocabulary()), trunc, rng);
    values.push_back(evidence(generated, est));
  }
  return lambda_from_evidence(values, safety, cap);
}

std::optional<double> detection_time_bound(double lambda0, double alpha, double intensity,
                                           double var_e, double b_minus, double b_plus) {
  if (!(lambda0 > 0.0)) throw DomainError("lambda0 must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(b_minus > 0.0)) throw DomainError("b_minus must be positive");
  if (!(b_plus > b_minus)) throw DomainError("b_plus must exceed b_minus");
  if (!(var_e >= 0.0)) throw DomainError("variance must be nonnegative");
  if (!(1.0 + lambda0 * intensity > 0.0)) return std::nullopt;
  const double growth = std::log1p(lambda0 * intensity);
  const double penalty = var_e * lambda0 * lambda0 / (2.0 * b_minus * b_minus);
  if (!(growth > penalty)) return std::nullopt;
  return (std::log(1.0 / alpha) + std::log(b_plus)) / (growth - penalty);
}

}  // namespace tokaudit
