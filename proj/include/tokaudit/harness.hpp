#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokaudit/audit.hpp"
#include "tokaudit/config.hpp"

namespace tokaudit {

// Stream index reserved for lambda calibration. Replication r uses stream r.
inline constexpr std::uint64_t kCalibrationStream = 0xCA11'B4A7'E000'0000ULL;

struct ReplicationRow {
  std::size_t index = 0;
  bool flagged = false;
  std::optional<std::size_t> tau;
  std::size_t steps = 0;
  double final_log_wealth = 0.0;
  std::optional<EvidenceRecord> anomaly;
  bool clamped = false;
  std::optional<std::string> error;

  static ReplicationRow from_outcome(std::size_t index, const AuditOutcome& outcome);
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct ReplicationSummary {
  std::vector<ReplicationRow> rows;
  double lambda0 = 0.0;
  std::optional<Calibration> calibration;

  std::size_t flagged = 0;
  double flag_rate = 0.0;
  Interval flag_rate_ci;              // Wilson, 95%
  std::vector<double> tau_quantiles;  // at kTauQuantileLevels, flagged rows only
  std::size_t censored = 0;
  std::size_t anomalies = 0;
  std::size_t clamped = 0;
  std::size_t errors = 0;
};

inline constexpr double kTauQuantileLevels[] = {0.1, 0.25, 0.5, 0.75, 0.9};

Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

// Linear interpolation between order statistics. Empty input gives NaN.
double quantile(std::vector<double> values, double level);

// Recomputes every aggregate from the rows.
void aggregate(ReplicationSummary& summary);

// Lambda for a constant or decreasing schedule, or the calibrated one.
struct ResolvedSchedule {
  double lambda0 = 0.0;
  std::optional<Calibration> calibration;
};
ResolvedSchedule resolve_schedule(const RunConfig& config, const PromptCorpus& audit_prompts);

// Runs all replications, writes trajectory_<r>.csv and summary.json when an
// output directory is configured. Per-replication errors are recorded in the
// rows; config and input errors throw.
ReplicationSummary run_replications(const RunConfig& config);

// Also hands back the outcomes, for callers that want the trajectories.
ReplicationSummary run_replications(const RunConfig& config, std::vector<AuditOutcome>* outcomes);

std::string trajectory_csv(const AuditOutcome& outcome);
nlohmann::json summary_to_json(const ReplicationSummary& summary);
nlohmann::json record_to_json(const EvidenceRecord& record);

// Writes text to path, creating parent directories. Throws InputError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tokaudit
