// token-audit: command-line front end for the audit library.
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tokaudit/errors.hpp"
#include "tokaudit/harness.hpp"
#include "tokaudit/oracle.hpp"

namespace {

using namespace tokaudit;
using nlohmann::json;

constexpr int kExitInput = 1;
constexpr int kExitInvariant = 2;

struct Overrides {
  std::string config_path;
  std::optional<double> alpha;
  std::optional<std::string> policy;
  std::optional<std::size_t> m;
  std::optional<double> p;
  std::optional<double> lambda;
  std::optional<std::string> schedule;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> anomaly_mode;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Config file (JSON)");
  cmd->add_option("--alpha", o.alpha, "False positive bound");
  cmd->add_option("--policy", o.policy, "faithful | random | heuristic");
  cmd->add_option("--m", o.m, "Split budget");
  cmd->add_option("--p", o.p, "Top-p threshold for the heuristic policy");
  cmd->add_option("--lambda", o.lambda, "Betting fraction; implies a constant schedule");
  cmd->add_option("--schedule", o.schedule, "constant | decreasing | calibrate");
  cmd->add_option("--max-steps", o.max_steps, "Steps per audit");
  cmd->add_option("--replications", o.replications, "Number of audits");
  cmd->add_option("--seed", o.seed, "Master seed (overrides TOKEN_AUDIT_SEED)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--anomaly-mode", o.anomaly_mode, "abort | clamp | clamp:EPS");
  cmd->add_option("--threads", o.threads, "Worker threads for replicate");
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_floating_point_v<T>) {
      value = std::stod(text, &used);
    } else {
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw InputError(fmt::format("{}: cannot parse \"{}\"", what, text));
  }
}

RunConfig build_config(const Overrides& o) {
  RunConfig c = o.config_path.empty()
                    ? load_config(std::filesystem::path(TOKAUDIT_DATA_DIR) / "default_config.json")
                    : load_config(o.config_path);
  if (const char* env = std::getenv("TOKEN_AUDIT_SEED"); env && *env) {
    c.master_seed = parse_number<std::uint64_t>(env, "TOKEN_AUDIT_SEED");
  }
  if (o.seed) c.master_seed = *o.seed;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.policy) c.policy.kind = policy_kind_from_string(*o.policy);
  if (o.m) c.policy.m = *o.m;
  if (o.p) c.policy.p = *o.p;
  if (o.schedule) c.schedule.mode = schedule_mode_from_string(*o.schedule);
  if (o.lambda) {
    c.schedule.lambda0 = *o.lambda;
    if (!o.schedule) c.schedule.mode = ScheduleConfig::Mode::kConstant;
  }
  if (o.max_steps) c.max_steps = *o.max_steps;
  if (o.replications) c.replications = *o.replications;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.output_dir = *o.out;
  if (o.anomaly_mode) {
    const std::string& mode = *o.anomaly_mode;
    if (mode == "abort") {
      c.anomaly_mode = AnomalyMode::abort();
    } else if (mode == "clamp") {
      c.anomaly_mode = AnomalyMode::clamp();
    } else if (mode.rfind("clamp:", 0) == 0) {
      c.anomaly_mode = AnomalyMode::clamp(parse_number<double>(mode.substr(6), "--anomaly-mode"));
    } else {
      throw InputError("unknown anomaly mode \"" + mode + "\"");
    }
  }
  c.validate();
  return c;
}

void print_summary(const ReplicationSummary& s) {
  std::cout << summary_to_json(s).dump(2) << "\n";
}

int cmd_audit(const RunConfig& config) {
  const PromptCorpus prompts = load_corpus(config.prompts_path);
  const ResolvedSchedule resolved = resolve_schedule(config, prompts);
  Rng rng = Rng::derive(config.master_seed, 0);
  const AuditOutcome outcome =
      run_audit(config.model, config.policy, prompts, config.audit_settings(resolved.lambda0), rng);
  const std::string csv = trajectory_csv(outcome);
  std::cout << csv;
  if (config.output_dir) write_text(*config.output_dir / "trajectory_0.csv", csv);
  std::cout << fmt::format("# lambda0={:.6g} flagged={} tau={} steps={} final_wealth={:.6g}{}\n",
                           resolved.lambda0, outcome.flagged,
                           outcome.tau ? std::to_string(*outcome.tau) : "censored", outcome.steps,
                           outcome.final_wealth(), outcome.anomaly ? " anomaly" : "");
  return 0;
}

int cmd_replicate(const RunConfig& config) {
  print_summary(run_replications(config));
  return 0;
}

void print_calibration(const Calibration& cal) {
  double mean = 0.0;
  for (double e : cal.holdout_evidence) mean += e;
  const auto n = static_cast<double>(cal.holdout_evidence.size());
  mean /= n;
  double var = 0.0;
  for (double e : cal.holdout_evidence) var += (e - mean) * (e - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  std::cout << fmt::format("lambda {:g}\n", cal.lambda);
  std::cout << fmt::format("lambda_max {:g}\n", cal.lambda_max);
  std::cout << fmt::format("holdout n={} mean={:.6g} sd={:.6g} min={:.6g}\n",
                           cal.holdout_evidence.size(), mean, std::sqrt(var), cal.min_evidence);
}

int cmd_calibrate(const RunConfig& config, const std::string& evidence_list) {
  if (!evidence_list.empty()) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= evidence_list.size()) {
      const std::size_t comma = std::min(evidence_list.find(',', start), evidence_list.size());
      values.push_back(parse_number<double>(evidence_list.substr(start, comma - start),
                                            "--evidence"));
      start = comma + 1;
    }
    print_calibration(
        lambda_from_evidence(values, config.schedule.safety, config.schedule.cap));
    return 0;
  }
  RunConfig c = config;
  c.schedule.mode = ScheduleConfig::Mode::kCalibrate;
  const ResolvedSchedule resolved = resolve_schedule(c, load_corpus(c.prompts_path));
  print_calibration(*resolved.calibration);
  return 0;
}

double lambda_for(const RunConfig& config, const PromptCorpus& prompts) {
  return resolve_schedule(config, prompts).lambda0;
}

int cmd_oracle(const RunConfig& config, std::size_t draws, std::size_t cap) {
  const PromptCorpus prompts = load_corpus(config.prompts_path);
  const double lambda0 = lambda_for(config, prompts);
  Rng rng = Rng::derive(config.master_seed, 0);
  json per_prompt = json::object();
  double total_intensity = 0.0;
  for (std::size_t id = 0; id < prompts.size(); ++id) {
    const std::string& prompt = prompts.prompts[id];
    const PromptCorpus single = PromptCorpus::from_prompts({prompt});
    std::set<std::string> observed;
    for (std::size_t i = 0; i < draws; ++i) {
      const TokenSeq generated = sample_sequence(config.model, prompt, rng);
      const TokenSeq reported = apply_policy(config.policy, config.model, prompt, generated, rng);
      observed.insert(str_of(reported, config.model.vocabulary()));
    }
    json expectations = json::object();
    for (const std::string& s : observed) {
      expectations[s] = conditional_expected_length(config.model, prompt, s, cap);
    }
    const double intensity = exact_intensity(config.policy, config.model, single, cap);
    total_intensity += intensity;
    const EvidenceMoments m =
        evidence_moments(config.policy, config.model, single, config.trunc, draws, lambda0, rng);
    per_prompt[std::to_string(id)] = {
        {"prompt", prompt},
        {"conditional_expected_length", std::move(expectations)},
        {"intensity", intensity},
        {"moments",
         {{"n", m.n}, {"mean", m.mean}, {"variance", m.variance}, {"std_error", m.std_error},
          {"min", m.min_evidence}, {"max", m.max_evidence}}}};
  }
  json out = {{"policy", config.policy.describe()},
              {"lambda0", lambda0},
              {"intensity", total_intensity / static_cast<double>(prompts.size())},
              {"prompts", std::move(per_prompt)}};
  const std::string text = out.dump(2) + "\n";
  if (config.output_dir) {
    write_text(*config.output_dir / "oracle.json", text);
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_bound(const RunConfig& config, std::size_t draws, std::size_t cap) {
  const PromptCorpus prompts = load_corpus(config.prompts_path);
  const double lambda0 = lambda_for(config, prompts);
  const double intensity = exact_intensity(config.policy, config.model, prompts, cap);
  Rng rng = Rng::derive(config.master_seed, 0);
  const EvidenceMoments m =
      evidence_moments(config.policy, config.model, prompts, config.trunc, draws, lambda0, rng);
  std::cout << fmt::format("lambda0 {:g}\nintensity {:.6g}\nvariance {:.6g}\n", lambda0,
                           intensity, m.variance);
  std::cout << fmt::format("b_minus {:.6g}\nb_plus {:.6g}\n", m.b_minus, m.b_plus);
  if (!(m.b_minus > 0.0)) {
    std::cout << "bound undefined: b_minus is not positive, lower lambda\n";
    return 0;
  }
  const auto bound =
      detection_time_bound(lambda0, config.alpha, intensity, m.variance, m.b_minus, m.b_plus);
  if (bound) {
    std::cout << fmt::format("bound {:.6g}\n", *bound);
  } else {
    std::cout << "bound undefined: growth condition fails\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-count misreporting audit on a toy model"};
  app.require_subcommand(1);
  Overrides o;
  std::string evidence_list;
  std::size_t draws = 2000;
  std::size_t cap = kDefaultEnumerationCap;

  auto* audit = app.add_subcommand("audit", "Run one audit and print its trajectory");
  auto* replicate = app.add_subcommand("replicate", "Run replicated audits");
  auto* fpr = app.add_subcommand("fpr", "Replicate with a faithful provider");
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate lambda on held-out prompts");
  auto* oracle = app.add_subcommand("oracle", "Exact oracle exports");
  auto* bound = app.add_subcommand("bound", "Detection-time bound from oracle inputs");
  auto* schema = app.add_subcommand("schema", "Print the config schema");
  for (CLI::App* cmd : {audit, replicate, fpr, calibrate, oracle, bound}) add_common(cmd, o);
  calibrate->add_option("--evidence", evidence_list, "Comma-separated holdout evidence values");
  oracle->add_option("--draws", draws, "Sampled outputs per prompt");
  oracle->add_option("--cap", cap, "Enumeration cap");
  bound->add_option("--draws", draws, "Evidence draws for the moments");
  bound->add_option("--cap", cap, "Enumeration cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitInput;
  }

  try {
    if (schema->parsed()) {
      std::cout << config_schema().dump(2) << "\n";
      return 0;
    }
    RunConfig config = build_config(o);
    if (audit->parsed()) return cmd_audit(config);
    if (replicate->parsed()) return cmd_replicate(config);
    if (fpr->parsed()) {
      config.policy = PolicySpec::faithful();
      return cmd_replicate(config);
    }
    if (calibrate->parsed()) return cmd_calibrate(config, evidence_list);
    if (oracle->parsed()) return cmd_oracle(config, draws, cap);
    if (bound->parsed()) return cmd_bound(config, draws, cap);
  } catch (const InvariantViolation& e) {
    std::cerr << "internal invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
