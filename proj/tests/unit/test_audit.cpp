#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "tokaudit/audit.hpp"
#include "tokaudit/errors.hpp"

using namespace tokaudit;
using tokaudit::testing::small_model;

namespace {

LengthEstimate estimate_of(double v) {
  LengthEstimate e;
  e.value = v;
  return e;
}

}  // namespace

TEST(Evidence, Examples) {
  EXPECT_EQ(evidence(TokenSeq{{0, 0, 0, 0}}, estimate_of(4.0)), 0.0);
  EXPECT_EQ(evidence(TokenSeq{std::vector<TokenId>(7, 0)}, estimate_of(4.0)), 3.0);
}

TEST(Evidence, UniqueTokenizationFaithfulIsZero) {
  const ModelSpec spec = small_model({"a", "b"}, 8);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const TokenSeq gen = sample_sequence(spec, "z", rng);
    const LengthEstimate est =
        estimate_length(spec, "z", str_of(gen, spec.vocabulary()), TruncationDist::deterministic(2), rng);
    EXPECT_EQ(evidence(gen, est), 0.0);
  }
}

TEST(LambdaSchedule, Values) {
  EXPECT_EQ(LambdaSchedule::constant(0.2).at(7), 0.2);
  EXPECT_DOUBLE_EQ(LambdaSchedule::decreasing(0.2).at(4), 0.05);
  EXPECT_THROW(LambdaSchedule::constant(0.2).at(0), DomainError);
  EXPECT_THROW(LambdaSchedule::constant(0.0), DomainError);
}

TEST(UpdateWealth, Examples) {
  const auto sched = LambdaSchedule::constant(0.07);
  const WealthState start;
  const WealthState same = update_wealth(start, 0.0, sched);
  EXPECT_EQ(same.log_wealth, 0.0);
  EXPECT_EQ(same.step, 1u);

  const WealthState up = update_wealth(start, 3.0, sched);
  EXPECT_NEAR(up.wealth(), 1.21, 1e-12);
  ASSERT_EQ(up.history.size(), 1u);
  EXPECT_NEAR(up.history[0].factor, 1.21, 1e-12);
  EXPECT_EQ(up.history[0].lambda, 0.07);

  const auto half = LambdaSchedule::constant(0.5);
  const WealthState zero = update_wealth(up, -2.0, half);
  ASSERT_TRUE(zero.anomaly);
  EXPECT_EQ(zero.anomaly->factor, 0.0);
  EXPECT_EQ(zero.log_wealth, up.log_wealth);
  EXPECT_EQ(zero.history.size(), 1u);
}

TEST(UpdateWealth, LogWealthAccumulates) {
  const auto sched = LambdaSchedule::decreasing(0.3);
  WealthState s;
  double expected = 0.0;
  const double es[] = {1.0, -0.5, 2.0, 0.25, -1.5};
  for (std::size_t i = 0; i < 5; ++i) {
    s = update_wealth(s, es[i], sched);
    expected += std::log1p(0.3 / static_cast<double>(i + 1) * es[i]);
    EXPECT_NEAR(s.log_wealth, expected, 1e-14);
    EXPECT_EQ(s.history.back().step, i + 1);
  }
}

TEST(Calibration, Examples) {
  const std::vector<double> mixed = {-2.0, 1.0, 3.0};
  const Calibration c = lambda_from_evidence(mixed, 0.9, 1.0);
  EXPECT_DOUBLE_EQ(c.lambda_max, 0.5);
  EXPECT_DOUBLE_EQ(c.lambda, 0.45);

  const std::vector<double> positive = {0.0, 1.0, 3.0};
  EXPECT_DOUBLE_EQ(lambda_from_evidence(positive, 0.9, 2.0).lambda, 1.8);
  EXPECT_THROW(lambda_from_evidence(std::vector<double>{}, 0.9, 1.0), DomainError);
}

TEST(DetectionTimeBound, Examples) {
  const auto b = detection_time_bound(0.1, 0.05, 3.0, 1.0, 0.5, 2.0);
  ASSERT_TRUE(b);
  // (log 20 + log 2) / (log 1.3 - 0.02)
  EXPECT_NEAR(*b, (std::log(20.0) + std::log(2.0)) / (std::log(1.3) - 0.02), 1e-12);
  EXPECT_NEAR(*b, 15.220393, 1e-6);

  EXPECT_FALSE(detection_time_bound(0.1, 0.05, 0.0, 1.0, 0.5, 2.0));
  EXPECT_THROW(detection_time_bound(0.1, 0.05, 1.0, 1.0, 0.0, 2.0), DomainError);
  EXPECT_THROW(detection_time_bound(0.0, 0.05, 1.0, 1.0, 0.5, 2.0), DomainError);
}

TEST(DetectionTimeBound, DecreasingInIntensity) {
  for (double var : {0.0, 0.5, 2.0}) {
    double last = std::numeric_limits<double>::infinity();
    for (double intensity = 1.0; intensity <= 10.0; intensity += 0.5) {
      const auto b = detection_time_bound(0.1, 0.05, intensity, var, 0.5, 2.0);
      if (!b) continue;
      EXPECT_LT(*b, last);
      last = *b;
    }
    EXPECT_TRUE(std::isfinite(last));
  }
}

TEST(RunAudit, TinyAlphaIsCensored) {
  const ModelSpec spec = small_model({"a", "b", "ab", "ba"}, 8, 7, 0.5);
  const PromptCorpus prompts = PromptCorpus::from_prompts({"one", "two"});
  AuditSettings s;
  s.schedule = LambdaSchedule::constant(0.1);
  s.alpha = 1e-9;
  s.max_steps = 5;
  Rng rng(2);
  const AuditOutcome out = run_audit(spec, PolicySpec::faithful(), prompts, s, rng);
  EXPECT_FALSE(out.flagged);
  EXPECT_FALSE(out.tau);
  if (!out.anomaly) EXPECT_EQ(out.steps, 5u);
}

TEST(RunAudit, TrajectoryIsConsistent) {
  const ModelSpec spec = small_model({"a", "b", "ab", "ba"}, 8, 7, 0.5);
  const PromptCorpus prompts = PromptCorpus::from_prompts({"one", "two", "three"});
  AuditSettings s;
  s.schedule = LambdaSchedule::constant(0.2);
  s.max_steps = 100;
  s.anomaly_mode = AnomalyMode::clamp(1e-6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const AuditOutcome out = run_audit(spec, PolicySpec::random(2), prompts, s, rng);
    double lw = 0.0;
    for (std::size_t i = 0; i < out.trajectory.size(); ++i) {
      const EvidenceRecord& r = out.trajectory[i];
      EXPECT_EQ(r.step, i + 1);
      EXPECT_LT(r.prompt_id, prompts.size());
      lw += std::log(r.factor);
      EXPECT_NEAR(r.log_wealth, lw, 1e-9);
      EXPECT_EQ(r.crossed, r.log_wealth > -std::log(s.alpha));
    }
    EXPECT_EQ(out.final_log_wealth, out.trajectory.empty() ? 0.0 : out.trajectory.back().log_wealth);
    if (out.flagged) EXPECT_EQ(*out.tau, out.trajectory.size());
  }
}

TEST(AuditSettings, Validation) {
  AuditSettings s;
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), DomainError);
  s.alpha = 0.05;
  s.max_steps = 0;
  EXPECT_THROW(s.validate(), DomainError);
}
