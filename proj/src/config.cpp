#include "tokaudit/config.hpp"

#include <fstream>

#include "tokaudit/errors.hpp"

namespace tokaudit {

using nlohmann::json;

namespace {

std::filesystem::path data_dir() { return TOKAUDIT_DATA_DIR; }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config field \"") + key + "\": " + e.what());
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string schedule_mode_name(ScheduleConfig::Mode mode) {
  switch (mode) {
    case ScheduleConfig::Mode::kConstant:
      return "constant";
    case ScheduleConfig::Mode::kDecreasing:
      return "decreasing";
    case ScheduleConfig::Mode::kCalibrate:
      return "calibrate";
  }
  return {};
}

}  // namespace

ScheduleConfig::Mode schedule_mode_from_string(const std::string& name) {
  if (name == "constant") return ScheduleConfig::Mode::kConstant;
  if (name == "decreasing") return ScheduleConfig::Mode::kDecreasing;
  if (name == "calibrate") return ScheduleConfig::Mode::kCalibrate;
  throw InputError("unknown schedule \"" + name + "\"");
}

Vocabulary vocabulary_from_json(const json& j) {
  if (!j.is_object() || !j.contains("tokens") || !j.at("tokens").is_array()) {
    throw InputError("vocabulary needs a \"tokens\" array");
  }
  try {
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw InputError(std::string("vocabulary tokens: ") + e.what());
  } catch (const DomainError& e) {
    throw InputError(std::string("vocabulary: ") + e.what());
  }
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  return vocabulary_from_json(read_json(path));
}

TruncationDist truncation_from_json(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "poisson");
  try {
    if (kind == "poisson") return TruncationDist::poisson(get_or<double>(j, "parameter", 7.0));
    if (kind == "geometric") return TruncationDist::geometric(get_or<double>(j, "parameter", 0.125));
    if (kind == "deterministic") {
      return TruncationDist::deterministic(
          static_cast<std::size_t>(get_or<double>(j, "parameter", 7.0)));
    }
  } catch (const DomainError& e) {
    throw InputError(std::string("truncation: ") + e.what());
  }
  throw InputError("unknown truncation kind \"" + kind + "\"");
}

json truncation_to_json(const TruncationDist& trunc) {
  switch (trunc.kind()) {
    case TruncationDist::Kind::kPoisson:
      return {{"kind", "poisson"}, {"parameter", trunc.parameter()}};
    case TruncationDist::Kind::kGeometric:
      return {{"kind", "geometric"}, {"parameter", trunc.parameter()}};
    case TruncationDist::Kind::kDeterministic:
      return {{"kind", "deterministic"}, {"parameter", trunc.parameter()}};
  }
  return {};
}

RunConfig default_config() {
  RunConfig c;
  c.model.seed = 7;
  c.model.vocab = std::make_shared<const Vocabulary>(load_vocabulary(data_dir() / "vocab.json"));
  c.model.context_window = 2;
  c.model.temperature = 1.0;
  c.model.eos_boost = 0.05;
  c.model.max_len = 16;
  c.prompts_path = data_dir() / "prompts.txt";
  c.holdout_path = data_dir() / "holdout_prompts.txt";
  return c;
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  const int version = get_or<int>(j, "schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) {
    throw InputError("unsupported schema_version " + std::to_string(version));
  }
  RunConfig c = default_config();

  if (j.contains("model")) {
    const json& m = j.at("model");
    c.model.seed = get_or<std::uint64_t>(m, "seed", c.model.seed);
    c.model.context_window = get_or<std::size_t>(m, "context_window", c.model.context_window);
    c.model.temperature = get_or<double>(m, "temperature", c.model.temperature);
    c.model.eos_boost = get_or<double>(m, "eos_boost", c.model.eos_boost);
    c.model.max_len = get_or<std::size_t>(m, "max_len", c.model.max_len);
    if (m.contains("vocab")) {
      c.model.vocab = std::make_shared<const Vocabulary>(vocabulary_from_json(m.at("vocab")));
    } else if (m.contains("vocab_path")) {
      c.model.vocab = std::make_shared<const Vocabulary>(
          load_vocabulary(resolve(base_dir, m.at("vocab_path").get<std::string>())));
    }
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    c.policy.kind = policy_kind_from_string(get_or<std::string>(p, "kind", "faithful"));
    c.policy.m = get_or<std::size_t>(p, "m", c.policy.m);
    c.policy.p = get_or<double>(p, "p", c.policy.p);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    c.schedule.mode = schedule_mode_from_string(get_or<std::string>(s, "kind", "calibrate"));
    c.schedule.lambda0 = get_or<double>(s, "lambda0", c.schedule.lambda0);
    c.schedule.n_holdout = get_or<std::size_t>(s, "n_holdout", c.schedule.n_holdout);
    c.schedule.safety = get_or<double>(s, "safety", c.schedule.safety);
    c.schedule.cap = get_or<double>(s, "cap", c.schedule.cap);
  }
  c.alpha = get_or<double>(j, "alpha", c.alpha);
  if (j.contains("truncation")) c.trunc = truncation_from_json(j.at("truncation"));
  c.max_steps = get_or<std::size_t>(j, "max_steps", c.max_steps);
  c.replications = get_or<std::size_t>(j, "replications", c.replications);
  c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed);
  c.threads = get_or<std::size_t>(j, "threads", c.threads);
  if (j.contains("anomaly_mode")) {
    const json& a = j.at("anomaly_mode");
    const auto kind = get_or<std::string>(a, "kind", "abort");
    if (kind == "abort") {
      c.anomaly_mode = AnomalyMode::abort();
    } else if (kind == "clamp") {
      c.anomaly_mode = AnomalyMode::clamp(get_or<double>(a, "epsilon", 1e-12));
    } else {
      throw InputError("unknown anomaly_mode \"" + kind + "\"");
    }
  }
  if (j.contains("prompts")) c.prompts_path = resolve(base_dir, j.at("prompts").get<std::string>());
  if (j.contains("holdout_prompts")) {
    c.holdout_path = resolve(base_dir, j.at("holdout_prompts").get<std::string>());
  }
  if (j.contains("output_dir") && !j.at("output_dir").is_null()) {
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

void RunConfig::validate() const {
  try {
    model.validate();
    policy.validate();
    audit_settings(schedule.mode == ScheduleConfig::Mode::kCalibrate ? 1.0 : schedule.lambda0)
        .validate();
  } catch (const DomainError& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  if (replications < 1) throw InputError("invalid config: replications must be at least 1");
  if (threads < 1) throw InputError("invalid config: threads must be at least 1");
  if (schedule.mode == ScheduleConfig::Mode::kCalibrate) {
    if (schedule.n_holdout < 1) throw InputError("invalid config: n_holdout must be at least 1");
    if (!(schedule.safety > 0.0 && schedule.safety <= 1.0)) {
      throw InputError("invalid config: safety must lie in (0, 1]");
    }
    if (!(schedule.cap > 0.0)) throw InputError("invalid config: cap must be positive");
  }
}

AuditSettings RunConfig::audit_settings(double lambda0) const {
  AuditSettings s;
  s.schedule = schedule.mode == ScheduleConfig::Mode::kDecreasing
                   ? LambdaSchedule{LambdaSchedule::Kind::kDecreasing, lambda0}
                   : LambdaSchedule{LambdaSchedule::Kind::kConstant, lambda0};
  s.alpha = alpha;
  s.trunc = trunc;
  s.max_steps = max_steps;
  s.anomaly_mode = anomaly_mode;
  return s;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["model"] = {{"seed", c.model.seed},
                {"vocab", {{"tokens", c.model.vocabulary().token_strings()}}},
                {"context_window", c.model.context_window},
                {"temperature", c.model.temperature},
                {"eos_boost", c.model.eos_boost},
                {"max_len", c.model.max_len}};
  j["policy"] = {{"kind", std::string(to_string(c.policy.kind))},
                 {"m", c.policy.m},
                 {"p", c.policy.p}};
  j["schedule"] = {{"kind", schedule_mode_name(c.schedule.mode)},
                   {"lambda0", c.schedule.lambda0},
                   {"n_holdout", c.schedule.n_holdout},
                   {"safety", c.schedule.safety},
                   {"cap", c.schedule.cap}};
  j["alpha"] = c.alpha;
  j["truncation"] = truncation_to_json(c.trunc);
  j["max_steps"] = c.max_steps;
  j["replications"] = c.replications;
  j["master_seed"] = c.master_seed;
  j["threads"] = c.threads;
  j["anomaly_mode"] = {
      {"kind", c.anomaly_mode.kind == AnomalyMode::Kind::kAbort ? "abort" : "clamp"},
      {"epsilon", c.anomaly_mode.epsilon}};
  j["prompts"] = c.prompts_path.string();
  j["holdout_prompts"] = c.holdout_path.string();
  j["output_dir"] = c.output_dir ? json(c.output_dir->string()) : json(nullptr);
  return j;
}

json config_schema() {
  return json::parse(R"json({
  "schema_version": 1,
  "fields": {
    "model.seed": "uint64, default 7",
    "model.vocab": "object {\"tokens\": [string, ...]}; EOS is implicit and gets the last id",
    "model.vocab_path": "path to a vocabulary JSON file (used when model.vocab is absent)",
    "model.context_window": "count, default 2",
    "model.temperature": "positive real, default 1.0",
    "model.eos_boost": "nonnegative real, default 0.05",
    "model.max_len": "count >= 1, default 16",
    "policy.kind": "faithful | random | heuristic, default faithful",
    "policy.m": "split budget, default 0",
    "policy.p": "top-p threshold in (0,1), default 0.9",
    "schedule.kind": "constant | decreasing | calibrate, default calibrate",
    "schedule.lambda0": "positive real, used by constant and decreasing, default 0.1",
    "schedule.n_holdout": "holdout draws for calibrate, default 400",
    "schedule.safety": "fraction of lambda_max, default 0.9",
    "schedule.cap": "lambda_max when no holdout evidence is negative, default 1.0",
    "alpha": "false positive bound in (0,1), default 0.05",
    "truncation.kind": "poisson | geometric | deterministic, default poisson",
    "truncation.parameter": "rate | success probability | k0, default 7",
    "max_steps": "default 100",
    "replications": "default 150",
    "master_seed": "uint64, default 1; TOKEN_AUDIT_SEED overrides",
    "threads": "worker threads for replicate, default 1",
    "anomaly_mode.kind": "abort | clamp, default abort",
    "anomaly_mode.epsilon": "clamp value, default 1e-12",
    "prompts": "audit prompt file, one per line",
    "holdout_prompts": "calibration prompt file, disjoint from prompts",
    "output_dir": "directory for trajectory_<r>.csv, summary.json, oracle.json"
  }
})json");
}

}  // namespace tokaudit
