#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tokaudit/audit.hpp"
#include "tokaudit/corpus.hpp"
#include "tokaudit/estimator.hpp"
#include "tokaudit/policies.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

inline constexpr int kConfigSchemaVersion = 1;

// Either a fixed schedule or an instruction to calibrate a constant lambda on
// held-out prompts before the audits start.
struct ScheduleConfig {
  enum class Mode { kConstant, kDecreasing, kCalibrate };

  Mode mode = Mode::kCalibrate;
  double lambda0 = 0.1;
  std::size_t n_holdout = 400;
  double safety = 0.9;
  double cap = 1.0;
};

struct RunConfig {
  ModelSpec model;
  PolicySpec policy;
  ScheduleConfig schedule;
  double alpha = 0.05;
  TruncationDist trunc = TruncationDist::poisson(7.0);
  std::size_t max_steps = 100;
  std::size_t replications = 150;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  AnomalyMode anomaly_mode;
  std::filesystem::path prompts_path;
  std::filesystem::path holdout_path;
  std::optional<std::filesystem::path> output_dir;

  // Throws InputError describing the first invalid field.
  void validate() const;
  AuditSettings audit_settings(double lambda0) const;
};

// Bundled defaults: the shipped vocabulary and prompt files.
RunConfig default_config();

Vocabulary load_vocabulary(const std::filesystem::path& path);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

// Missing keys keep their defaults. Relative paths resolve against base_dir.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);

// Printed by `token-audit schema`.
nlohmann::json config_schema();

ScheduleConfig::Mode schedule_mode_from_string(const std::string& name);
TruncationDist truncation_from_json(const nlohmann::json& j);
nlohmann::json truncation_to_json(const TruncationDist& trunc);

}  // namespace tokaudit
