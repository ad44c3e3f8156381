#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spotune/data.hpp"
#include "spotune/design.hpp"
#include "spotune/objective.hpp"
#include "spotune/space.hpp"
#include "spotune/tuner.hpp"

namespace spotune::cli {

using json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;
inline constexpr int kLogFormat = 1;

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

struct DataConfig {
  std::optional<std::string> csv;  // resolved path
  std::optional<SynthSpec> synthetic;
  std::string target = "y";
  TaskType type = TaskType::Classification;
  std::optional<double> threshold;
  std::optional<std::size_t> subsample;
  std::uint64_t seed = 1;
  SchemaHints schema;
};

struct CompareConfig {
  std::vector<Strategy> strategies{Strategy::Spot, Strategy::Random, Strategy::Default};
  std::size_t draws = 3;
  std::size_t replications = 3;
  std::optional<std::string> log_dir;
};

struct ExperimentConfig {
  json source;  // effective config after environment overrides
  std::string name;
  Strategy strategy = Strategy::Spot;
  DataConfig data;
  HoldoutSplit split;
  LearnerId learner = LearnerId::DecisionTree;
  ExternalCommand external;
  json space_source;
  TunerConfig tuner;
  std::optional<double> reference_time;
  std::optional<std::string> log_path;
  CompareConfig compare;
};

// Parses and validates a config document. Relative paths resolve against
// base_dir. SPOTUNE_SEED, when set, replaces tuner.seed. Throws ConfigError.
ExperimentConfig parse_config(json doc, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// 64-bit FNV-1a of the compact serialization, as 16 hex digits.
std::string config_hash(const json& doc);

// Data for draw `draw` (0 for single runs).
Task load_task(const DataConfig& data, std::size_t draw = 0);
SearchSpace build_space(const json& space, const Task& task);

json param_to_json(const ParamSpec& p);
ParamSpec param_from_json(const json& j);
json tuner_to_json(const TunerConfig& c);
TunerConfig tuner_from_json(const json& j);

json run_start_record(const SearchSpace& space, const TunerConfig& config, Strategy strategy,
                      const std::string& name, const std::string& hash);
json eval_record_to_json(const EvaluationRecord& r);
EvaluationRecord eval_record_from_json(const json& j);
json run_end_record(const TuneResult& result);

struct ReplayedRun {
  std::string name;
  std::string config_hash;
  SearchSpace space;
  TuneResult result;
  bool complete = false;  // run_end seen
};

// Every run segment of a log, in file order.
std::vector<ReplayedRun> replay_log(std::istream& in);
std::vector<ReplayedRun> replay_log_file(const std::string& path);

// Timing and timestamp fields, which are excluded from determinism checks.
bool is_timing_field(const std::string& key);

struct CompareRow {
  std::string case_name;
  Strategy strategy = Strategy::Spot;
  std::size_t draw = 0;
  std::size_t replication = 0;
  ReplicationSeeds seeds;
  bool ok = false;
  double loss = 0.0;
  std::size_t evals = 0;
  std::string error;
};

json compare_row_to_json(const CompareRow& r);
CompareRow compare_row_from_json(const json& j);

std::vector<CompareRow> run_comparison(const ExperimentConfig& config, std::size_t jobs);

int cmd_tune(const std::string& config_path, bool dry_run, const std::optional<std::string>& log_override,
             std::ostream& out);
int cmd_compare(const std::string& config_path, std::size_t jobs, const std::optional<std::string>& out_path,
                std::ostream& out);
int cmd_rank(const std::vector<std::string>& logs, const std::optional<std::string>& out_path, std::ostream& out);
int cmd_difficulty(const std::string& data_path, const std::string& target, std::optional<double> threshold,
                   const std::optional<std::string>& out_path, std::ostream& out, std::ostream& err);
int cmd_design(const std::string& config_path, std::optional<std::size_t> size, DesignKind kind,
               std::optional<std::uint64_t> seed, std::ostream& out);
int cmd_replay(const std::string& log_path, std::ostream& out);
int cmd_report(const std::string& log_path, const std::string& out_dir, std::ostream& out);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace spotune::cli
