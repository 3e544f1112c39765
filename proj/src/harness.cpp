#include "tokaudit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "tokaudit/errors.hpp"

namespace tokaudit {

using nlohmann::json;

ReplicationRow ReplicationRow::from_outcome(std::size_t index, const AuditOutcome& outcome) {
  ReplicationRow row;
  row.index = index;
  row.flagged = outcome.flagged;
  row.tau = outcome.tau;
  row.steps = outcome.steps;
  row.final_log_wealth = outcome.final_log_wealth;
  row.anomaly = outcome.anomaly;
  row.clamped = outcome.clamped;
  return row;
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (phat + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double quantile(std::vector<double> values, double level) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void aggregate(ReplicationSummary& s) {
  s.flagged = s.censored = s.anomalies = s.clamped = s.errors = 0;
  std::vector<double> taus;
  for (const ReplicationRow& row : s.rows) {
    if (row.error) {
      ++s.errors;
      continue;
    }
    if (row.flagged) {
      ++s.flagged;
      taus.push_back(static_cast<double>(*row.tau));
    } else if (!row.anomaly || row.clamped) {
      ++s.censored;
    }
    if (row.anomaly) ++s.anomalies;
    if (row.clamped) ++s.clamped;
  }
  const std::size_t n = s.rows.size() - s.errors;
  s.flag_rate = n == 0 ? 0.0 : static_cast<double>(s.flagged) / static_cast<double>(n);
  s.flag_rate_ci = wilson_interval(s.flagged, n);
  s.tau_quantiles.clear();
  if (!taus.empty()) {
    for (double level : kTauQuantileLevels) s.tau_quantiles.push_back(quantile(taus, level));
  }
}

ResolvedSchedule resolve_schedule(const RunConfig& config, const PromptCorpus& audit_prompts) {
  if (config.schedule.mode != ScheduleConfig::Mode::kCalibrate) {
    return {config.schedule.lambda0, std::nullopt};
  }
  const PromptCorpus holdout = load_corpus(config.holdout_path);
  if (!disjoint(holdout, audit_prompts)) {
    throw InputError("holdout prompts overlap the audit prompts");
  }
  Rng rng = Rng::derive(config.master_seed, kCalibrationStream);
  Calibration cal = calibrate_lambda(config.model, holdout, config.trunc,
                                     config.schedule.n_holdout, config.schedule.safety,
                                     config.schedule.cap, rng);
  const double lambda = cal.lambda;
  return {lambda, std::move(cal)};
}

ReplicationSummary run_replications(const RunConfig& config) {
  return run_replications(config, nullptr);
}

ReplicationSummary run_replications(const RunConfig& config,
                                    std::vector<AuditOutcome>* outcomes_out) {
  config.validate();
  const PromptCorpus prompts = load_corpus(config.prompts_path);
  ResolvedSchedule resolved = resolve_schedule(config, prompts);
  const AuditSettings settings = config.audit_settings(resolved.lambda0);

  const std::size_t n = config.replications;
  std::vector<AuditOutcome> outcomes(n);
  ReplicationSummary summary;
  summary.rows.resize(n);
  summary.lambda0 = resolved.lambda0;
  summary.calibration = std::move(resolved.calibration);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      Rng rng = Rng::derive(config.master_seed, r);
      try {
        outcomes[r] = run_audit(config.model, config.policy, prompts, settings, rng);
        summary.rows[r] = ReplicationRow::from_outcome(r, outcomes[r]);
      } catch (const std::exception& e) {
        summary.rows[r].index = r;
        summary.rows[r].error = e.what();
      }
    }
  };
  const std::size_t threads = std::min(config.threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  aggregate(summary);

  if (config.output_dir) {
    for (std::size_t r = 0; r < n; ++r) {
      write_text(*config.output_dir / fmt::format("trajectory_{}.csv", r),
                 trajectory_csv(outcomes[r]));
    }
    write_text(*config.output_dir / "summary.json", summary_to_json(summary).dump(2) + "\n");
  }
  if (outcomes_out) *outcomes_out = std::move(outcomes);
  return summary;
}

std::string trajectory_csv(const AuditOutcome& outcome) {
  std::string out = "step,prompt_id,reported_len,estimate,evidence,lambda,factor,log_wealth,wealth,flagged\n";
  for (const EvidenceRecord& r : outcome.trajectory) {
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.step,
                       r.prompt_id, r.reported_len, r.estimate, r.evidence, r.lambda, r.factor,
                       r.log_wealth, std::exp(r.log_wealth), r.crossed ? 1 : 0);
  }
  return out;
}

json record_to_json(const EvidenceRecord& r) {
  return {{"step", r.step},         {"prompt_id", r.prompt_id},
          {"reported_len", r.reported_len}, {"estimate", r.estimate},
          {"evidence", r.evidence}, {"lambda", r.lambda},
          {"factor", r.factor}};
}

json summary_to_json(const ReplicationSummary& s) {
  json rows = json::array();
  for (const ReplicationRow& row : s.rows) {
    json j;
    j["replication"] = row.index;
    if (row.error) {
      j["error"] = *row.error;
      rows.push_back(std::move(j));
      continue;
    }
    j["flagged"] = row.flagged;
    j["tau"] = row.tau ? json(*row.tau) : json("censored");
    j["steps"] = row.steps;
    j["final_log_wealth"] = row.final_log_wealth;
    j["final_wealth"] = std::exp(row.final_log_wealth);
    j["anomaly"] = row.anomaly ? record_to_json(*row.anomaly) : json(nullptr);
    j["clamped"] = row.clamped;
    rows.push_back(std::move(j));
  }

  json quantiles = json::object();
  for (std::size_t i = 0; i < s.tau_quantiles.size(); ++i) {
    quantiles[fmt::format("q{:g}", 100.0 * kTauQuantileLevels[i])] = s.tau_quantiles[i];
  }
  json out;
  out["lambda0"] = s.lambda0;
  if (s.calibration) {
    out["calibration"] = {{"lambda", s.calibration->lambda},
                          {"lambda_max", s.calibration->lambda_max},
                          {"min_evidence", s.calibration->min_evidence},
                          {"n_holdout", s.calibration->holdout_evidence.size()}};
  }
  out["replications"] = s.rows.size();
  out["flagged"] = s.flagged;
  out["flag_rate"] = s.flag_rate;
  out["flag_rate_ci95"] = {s.flag_rate_ci.low, s.flag_rate_ci.high};
  out["tau_quantiles"] = std::move(quantiles);
  out["censored"] = s.censored;
  out["anomalies"] = s.anomalies;
  out["clamped"] = s.clamped;
  out["errors"] = s.errors;
  out["rows"] = std::move(rows);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

}  // namespace tokaudit
