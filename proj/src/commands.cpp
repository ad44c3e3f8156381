#include "spotune/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "spotune/analysis.hpp"
#include "spotune/errors.hpp"

namespace fs = std::filesystem;

namespace spotune::cli {

namespace {

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string resolve(const std::string& path, const std::string& base) {
  fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(base) / p).lexically_normal().string();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (errno || *end || v[0] == '-') throw ConfigError(std::string(name) + " must be a non-negative integer");
  return x;
}

ColumnType column_type_from_string(const std::string& s) {
  if (s == "real" || s == "numeric") return ColumnType::Real;
  if (s == "integer") return ColumnType::Integer;
  if (s == "categorical" || s == "factor") return ColumnType::Categorical;
  throw ConfigError("unknown column type '" + s + "'");
}

DataConfig parse_data(const json& j, const std::string& base) {
  reject_unknown(j, {"csv", "synthetic", "target", "task", "threshold", "subsample", "seed", "schema"}, "data");
  DataConfig d;
  if (j.contains("csv") == j.contains("synthetic")) throw ConfigError("data needs exactly one of 'csv' or 'synthetic'");
  d.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("csv")) {
    d.csv = resolve(j.at("csv").get<std::string>(), base);
    if (!j.contains("target")) throw ConfigError("data.target is required for CSV data");
    d.target = j.at("target").get<std::string>();
    d.type = task_type_from_string(get_or<std::string>(j, "task", "classification"));
    if (j.contains("threshold") && !j.at("threshold").is_null()) d.threshold = j.at("threshold").get<double>();
    if (j.contains("subsample") && !j.at("subsample").is_null()) d.subsample = j.at("subsample").get<std::size_t>();
    if (j.contains("schema")) {
      for (const auto& [name, type] : j.at("schema").items()) d.schema[name] = column_type_from_string(type.get<std::string>());
    }
  } else {
    const auto& s = j.at("synthetic");
    reject_unknown(s, {"m", "n_numeric", "n_categorical", "cardinality", "separation"}, "data.synthetic");
    SynthSpec spec;
    spec.m = get_or<std::size_t>(s, "m", spec.m);
    spec.n_numeric = get_or<std::size_t>(s, "n_numeric", spec.n_numeric);
    spec.n_categorical = get_or<std::size_t>(s, "n_categorical", spec.n_categorical);
    spec.cardinality = get_or<std::size_t>(s, "cardinality", spec.cardinality);
    spec.separation = get_or<double>(s, "separation", spec.separation);
    spec.seed = d.seed;
    d.synthetic = spec;
    d.target = "class";
    d.type = TaskType::Classification;
  }
  return d;
}

}  // namespace

std::string config_hash(const json& doc) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json param_to_json(const ParamSpec& p) {
  json j;
  j["name"] = p.name;
  j["kind"] = std::string(to_string(p.kind));
  if (p.kind == ParamKind::Categorical) {
    j["levels"] = p.levels;
  } else {
    j["lower"] = p.lower;
    j["upper"] = p.upper;
    j["transform"] = std::string(to_string(p.transform));
  }
  if (p.relative) j["relative"] = *p.relative;
  if (p.default_value) {
    if (const auto* d = std::get_if<double>(&*p.default_value)) {
      j["default"] = *d;
    } else {
      j["default"] = std::get<std::string>(*p.default_value);
    }
  }
  return j;
}

ParamSpec param_from_json(const json& j) {
  reject_unknown(j, {"name", "kind", "lower", "upper", "levels", "transform", "relative", "default"}, "parameter");
  ParamSpec p;
  if (!j.contains("name")) throw ConfigError("parameter without a name");
  p.name = j.at("name").get<std::string>();
  p.kind = param_kind_from_string(get_or<std::string>(j, "kind", "real"));
  if (p.kind == ParamKind::Categorical) {
    p.levels = get_or<std::vector<std::string>>(j, "levels", {});
  } else {
    if (!j.contains("lower") || !j.contains("upper")) throw ConfigError("parameter '" + p.name + "' needs lower and upper");
    p.lower = j.at("lower").get<double>();
    p.upper = j.at("upper").get<double>();
  }
  p.transform = transform_from_string(get_or<std::string>(j, "transform", "identity"));
  if (j.contains("relative") && !j.at("relative").is_null()) p.relative = j.at("relative").get<std::string>();
  if (j.contains("default") && !j.at("default").is_null()) {
    const auto& d = j.at("default");
    if (d.is_string()) {
      p.default_value = d.get<std::string>();
    } else if (d.is_number()) {
      p.default_value = d.get<double>();
    } else {
      throw ConfigError("default of '" + p.name + "' must be a number or a label");
    }
  }
  return p;
}

json tuner_to_json(const TunerConfig& c) {
  json j;
  j["max_time"] = c.max_time;
  j["max_evals"] = c.max_evals ? json(*c.max_evals) : json(nullptr);
  j["design_size"] = c.design_size;
  j["surrogate_search_evals"] = c.surrogate_search_evals;
  j["timeout"] = c.timeout_disabled ? json(false) : (c.timeout ? json(*c.timeout) : json(nullptr));
  j["noise"] = c.noise;
  j["seed"] = c.seed_tuner;
  j["eval_seed"] = c.seed_eval_base;
  j["runtime_factor"] = c.runtime_factor;
  j["mle_budget"] = c.mle_budget;
  return j;
}

TunerConfig tuner_from_json(const json& j) {
  reject_unknown(j,
                 {"max_time", "max_evals", "design_size", "surrogate_search_evals", "timeout", "noise", "seed",
                  "eval_seed", "runtime_factor", "reference_time", "mle_budget"},
                 "tuner");
  TunerConfig c;
  c.max_time = get_or<double>(j, "max_time", c.max_time);
  if (j.contains("max_evals") && !j.at("max_evals").is_null()) c.max_evals = j.at("max_evals").get<std::size_t>();
  c.design_size = get_or<std::size_t>(j, "design_size", 0);
  c.surrogate_search_evals = get_or<std::size_t>(j, "surrogate_search_evals", 0);
  if (j.contains("timeout")) {
    const auto& t = j.at("timeout");
    if (t.is_boolean()) {
      if (t.get<bool>()) throw ConfigError("tuner.timeout: use a number of seconds, null, or false");
      c.timeout_disabled = true;
    } else if (t.is_number()) {
      c.timeout = t.get<double>();
      if (*c.timeout == 0.0) c.timeout_disabled = true;
    } else if (!t.is_null()) {
      throw ConfigError("tuner.timeout must be a number, null, or false");
    }
  }
  c.noise = get_or<bool>(j, "noise", c.noise);
  c.seed_tuner = get_or<std::uint64_t>(j, "seed", c.seed_tuner);
  c.seed_eval_base = get_or<std::uint64_t>(j, "eval_seed", c.seed_eval_base);
  c.runtime_factor = get_or<double>(j, "runtime_factor", c.runtime_factor);
  c.mle_budget = get_or<std::size_t>(j, "mle_budget", 0);
  return c;
}

ExperimentConfig parse_config(json doc, const std::string& base_dir) {
  try {
    reject_unknown(doc, {"version", "name", "strategy", "data", "split", "learner", "external", "space", "tuner",
                         "log", "compare"},
                   "config");
    if (!doc.contains("version")) throw ConfigError("config is missing 'version'");
    if (doc.at("version").get<int>() != kConfigVersion) {
      throw ConfigError("unsupported config version " + doc.at("version").dump());
    }
    if (!doc.contains("tuner")) doc["tuner"] = json::object();
    doc["tuner"]["seed"] = env_u64("SPOTUNE_SEED", get_or<std::uint64_t>(doc["tuner"], "seed", 1));

    ExperimentConfig c;
    c.source = doc;
    c.name = get_or<std::string>(doc, "name", "experiment");
    c.strategy = strategy_from_string(get_or<std::string>(doc, "strategy", "spot"));
    if (!doc.contains("data")) throw ConfigError("config is missing 'data'");
    c.data = parse_data(doc.at("data"), base_dir);
    if (doc.contains("split")) {
      reject_unknown(doc.at("split"), {"train_fraction", "seed"}, "split");
      c.split.train_fraction = get_or<double>(doc.at("split"), "train_fraction", c.split.train_fraction);
      c.split.split_seed = get_or<std::uint64_t>(doc.at("split"), "seed", c.split.split_seed);
    }
    if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
      throw ConfigError("split.train_fraction must lie in (0, 1)");
    }
    c.learner = learner_from_string(get_or<std::string>(doc, "learner", "dt"));
    if (c.learner == LearnerId::External) {
      if (!doc.contains("external")) throw ConfigError("learner 'external' needs an 'external' block");
      const auto& e = doc.at("external");
      reject_unknown(e, {"command", "workdir"}, "external");
      c.external.command_template = e.at("command").get<std::string>();
      c.external.workdir = resolve(get_or<std::string>(e, "workdir", "."), base_dir);
    }
    if (!doc.contains("space")) throw ConfigError("config is missing 'space'");
    c.space_source = doc.at("space");
    reject_unknown(c.space_source, {"preset", "params", "n_features"}, "space");
    if (c.space_source.contains("preset") == c.space_source.contains("params")) {
      throw ConfigError("space needs exactly one of 'preset' or 'params'");
    }
    c.tuner = tuner_from_json(doc.at("tuner"));
    if (doc.at("tuner").contains("reference_time")) c.reference_time = doc.at("tuner").at("reference_time").get<double>();
    c.tuner.validate(c.strategy);
    if (doc.contains("log")) c.log_path = resolve(doc.at("log").get<std::string>(), base_dir);
    if (doc.contains("compare")) {
      const auto& cj = doc.at("compare");
      reject_unknown(cj, {"strategies", "draws", "replications", "log_dir"}, "compare");
      if (cj.contains("strategies")) {
        c.compare.strategies.clear();
        for (const auto& s : cj.at("strategies")) c.compare.strategies.push_back(strategy_from_string(s.get<std::string>()));
      }
      c.compare.draws = get_or<std::size_t>(cj, "draws", c.compare.draws);
      c.compare.replications = get_or<std::size_t>(cj, "replications", c.compare.replications);
      if (cj.contains("log_dir")) c.compare.log_dir = resolve(cj.at("log_dir").get<std::string>(), base_dir);
      if (c.compare.strategies.empty() || c.compare.draws == 0 || c.compare.replications == 0) {
        throw ConfigError("compare needs at least one strategy, draw and replication");
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(std::move(doc), fs::path(path).parent_path().string().empty()
                                          ? std::string(".")
                                          : fs::path(path).parent_path().string());
}

Task load_task(const DataConfig& data, std::size_t draw) {
  if (data.synthetic) {
    SynthSpec s = *data.synthetic;
    s.seed = data.seed + draw;
    return synth_classification(s);
  }
  if (!fs::exists(*data.csv)) throw ConfigError("data file not found: " + *data.csv);
  Table table = load_csv(*data.csv, data.schema);
  if (data.subsample) table = subsample(table, *data.subsample, data.seed + draw);
  if (data.threshold) {
    if (data.type != TaskType::Classification) throw ConfigError("data.threshold only applies to classification");
    const auto& col = table.column(data.target);
    if (!col.is_categorical()) table = discretize_target(table, data.target, *data.threshold);
  }
  return make_task(std::move(table), data.target, data.type);
}

SearchSpace build_space(const json& space, const Task& task) {
  try {
    if (space.contains("preset")) {
      const int n = get_or<int>(space, "n_features", static_cast<int>(task.features.cols()));
      return preset(model_from_string(space.at("preset").get<std::string>()), n, task.type);
    }
    std::vector<ParamSpec> params;
    for (const auto& p : space.at("params")) params.push_back(param_from_json(p));
    return SearchSpace(std::move(params));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed space: ") + e.what());
  }
}

json run_start_record(const SearchSpace& space, const TunerConfig& config, Strategy strategy, const std::string& name,
                      const std::string& hash) {
  json j;
  j["type"] = "run_start";
  j["format"] = kLogFormat;
  j["name"] = name;
  j["strategy"] = std::string(to_string(strategy));
  j["config_hash"] = hash;
  j["started_at"] = timestamp();
  json params = json::array();
  for (const auto& p : space.params()) params.push_back(param_to_json(p));
  j["space"] = std::move(params);
  j["tuner"] = tuner_to_json(config);
  return j;
}

json eval_record_to_json(const EvaluationRecord& r) {
  json j;
  j["type"] = "eval";
  j["index"] = r.index;
  j["iteration"] = r.iteration;
  j["origin"] = r.origin;
  j["eval_seed"] = r.eval_seed;
  j["raw_x"] = r.raw_x;
  json natural = json::object();
  for (const auto& [name, value] : r.natural_x) {
    if (const auto* d = std::get_if<double>(&value)) {
      natural[name] = *d;
    } else {
      natural[name] = std::get<std::string>(value);
    }
  }
  j["natural_x"] = std::move(natural);
  j["loss"] = r.loss;
  j["status"] = std::string(to_string(r.status));
  j["message"] = r.message;
  j["train_time"] = r.train_time;
  j["predict_time"] = r.predict_time;
  j["total_time"] = r.total_time;
  if (r.surrogate) {
    const auto& s = *r.surrogate;
    j["surrogate"] = {{"theta", s.theta},
                      {"lambda", s.lambda},
                      {"mu", s.mu},
                      {"sigma2", s.sigma2},
                      {"log_likelihood", s.log_likelihood},
                      {"reinterpolated", s.reinterpolated},
                      {"training_size", s.training_size},
                      {"fit_seed", s.fit_seed},
                      {"search_seed", s.search_seed},
                      {"predicted", s.predicted}};
  }
  return j;
}

EvaluationRecord eval_record_from_json(const json& j) {
  EvaluationRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.iteration = j.at("iteration").get<std::size_t>();
  r.origin = j.at("origin").get<std::string>();
  r.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  r.raw_x = j.at("raw_x").get<std::vector<double>>();
  for (const auto& [name, value] : j.at("natural_x").items()) {
    if (value.is_string()) {
      r.natural_x.set(name, value.get<std::string>());
    } else {
      r.natural_x.set(name, value.get<double>());
    }
  }
  r.loss = j.at("loss").get<double>();
  r.status = eval_status_from_string(j.at("status").get<std::string>());
  r.message = j.at("message").get<std::string>();
  r.train_time = j.at("train_time").get<double>();
  r.predict_time = j.at("predict_time").get<double>();
  r.total_time = j.at("total_time").get<double>();
  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    SurrogateSummary m;
    m.theta = s.at("theta").get<std::vector<double>>();
    m.lambda = s.at("lambda").get<double>();
    m.mu = s.at("mu").get<double>();
    m.sigma2 = s.at("sigma2").get<double>();
    m.log_likelihood = s.at("log_likelihood").get<double>();
    m.reinterpolated = s.at("reinterpolated").get<bool>();
    m.training_size = s.at("training_size").get<std::size_t>();
    m.fit_seed = s.at("fit_seed").get<std::uint64_t>();
    m.search_seed = s.at("search_seed").get<std::uint64_t>();
    m.predicted = s.at("predicted").get<double>();
    r.surrogate = std::move(m);
  }
  return r;
}

json run_end_record(const TuneResult& result) {
  json j;
  j["type"] = "run_end";
  j["evals"] = result.records.size();
  j["best_index"] = result.best_index;
  j["y_best"] = result.y_best;
  j["wall_time_used"] = result.wall_time_used;
  j["finished_at"] = timestamp();
  return j;
}

bool is_timing_field(const std::string& key) {
  return key == "train_time" || key == "predict_time" || key == "total_time" || key == "wall_time_used" ||
         key == "started_at" || key == "finished_at";
}

std::vector<ReplayedRun> replay_log(std::istream& in) {
  std::vector<ReplayedRun> runs;
  std::string line;
  std::size_t lineno = 0;
  auto finish_best = [](TuneResult& r) {
    if (r.records.empty()) return;
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.records.size(); ++i) {
      if (r.records[i].loss < r.records[best].loss) best = i;
    }
    r.best_index = best;
    r.y_best = r.records[best].loss;
    r.x_best_raw = r.records[best].raw_x;
    r.x_best_natural = r.records[best].natural_x;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "run_start") {
        if (j.at("format").get<int>() != kLogFormat) throw DataError("unsupported log format");
        ReplayedRun run;
        run.name = j.at("name").get<std::string>();
        run.config_hash = j.at("config_hash").get<std::string>();
        std::vector<ParamSpec> params;
        for (const auto& p : j.at("space")) params.push_back(param_from_json(p));
        run.space = SearchSpace(std::move(params));
        run.result.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        run.result.config = tuner_from_json(j.at("tuner"));
        runs.push_back(std::move(run));
      } else if (type == "eval") {
        if (runs.empty()) throw DataError("eval record before run_start");
        auto& rs = runs.back().result.records;
        auto r = eval_record_from_json(j);
        if (r.index != rs.size()) throw DataError("evaluation index out of sequence");
        rs.push_back(std::move(r));
      } else if (type == "run_end") {
        if (runs.empty()) throw DataError("run_end before run_start");
        auto& run = runs.back();
        finish_best(run.result);
        if (j.at("evals").get<std::size_t>() != run.result.records.size() ||
            j.at("best_index").get<std::size_t>() != run.result.best_index) {
          throw DataError("run_end summary disagrees with the evaluation records");
        }
        run.result.wall_time_used = j.at("wall_time_used").get<double>();
        run.complete = true;
      } else {
        throw DataError("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("log line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DataError("log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& run : runs) {
    if (!run.complete) finish_best(run.result);
  }
  return runs;
}

std::vector<ReplayedRun> replay_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open log '" + path + "'");
  return replay_log(in);
}

json compare_row_to_json(const CompareRow& r) {
  json j;
  j["type"] = "compare";
  j["case"] = r.case_name;
  j["strategy"] = std::string(to_string(r.strategy));
  j["draw"] = r.draw;
  j["replication"] = r.replication;
  j["seed"] = r.seeds.tuner;
  j["eval_seed"] = r.seeds.eval_base;
  j["data_seed"] = r.seeds.data;
  j["status"] = r.ok ? "ok" : "failed";
  j["loss"] = r.ok ? json(r.loss) : json(nullptr);
  j["evals"] = r.evals;
  if (!r.ok) j["error"] = r.error;
  return j;
}

CompareRow compare_row_from_json(const json& j) {
  CompareRow r;
  r.case_name = j.at("case").get<std::string>();
  r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.draw = j.at("draw").get<std::size_t>();
  r.replication = j.at("replication").get<std::size_t>();
  r.seeds.tuner = get_or<std::uint64_t>(j, "seed", 0);
  r.seeds.eval_base = get_or<std::uint64_t>(j, "eval_seed", 0);
  r.seeds.data = get_or<std::uint64_t>(j, "data_seed", 0);
  r.ok = j.at("status").get<std::string>() == "ok";
  if (r.ok) r.loss = j.at("loss").get<double>();
  r.evals = get_or<std::size_t>(j, "evals", 0);
  r.error = get_or<std::string>(j, "error", "");
  return r;
}

namespace {

double effective_runtime_factor(const ExperimentConfig& c) {
  return c.reference_time ? runtime_factor(*c.reference_time) : c.tuner.runtime_factor;
}

Objective build_objective(const ExperimentConfig& c, const Task& task, const TunerConfig& tuner, std::size_t draw) {
  HoldoutSplit split = c.split;
  split.split_seed += draw;
  return make_objective(task, c.learner, split, tuner.effective_timeout(), c.external);
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw ConfigError("cannot open log '" + path + "' for writing");
  }
  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write to run log failed");
  }

 private:
  std::ofstream out_;
};

TuneResult logged_run(Strategy s, const Objective& objective, const SearchSpace& space, const TunerConfig& tuner,
                      const std::string& name, const std::string& hash, const std::optional<std::string>& log_path) {
  std::optional<JsonlWriter> log;
  if (log_path) {
    log.emplace(*log_path);
    log->write(run_start_record(space, tuner, s, name, hash));
  }
  RecordSink sink;
  if (log) sink = [&](const EvaluationRecord& r) { log->write(eval_record_to_json(r)); };
  TuneResult result = run_strategy(s, objective, space, tuner, sink);
  if (log) log->write(run_end_record(result));
  return result;
}

void print_assignment(std::ostream& out, const Assignment& a) {
  bool first = true;
  for (const auto& [name, value] : a) {
    out << (first ? "" : ", ") << name << '=' << format_value(value);
    first = false;
  }
}

}  // namespace

std::vector<CompareRow> run_comparison(const ExperimentConfig& config, std::size_t jobs) {
  struct Job {
    Strategy strategy;
    std::size_t draw, rep;
  };
  std::vector<Job> work;
  for (Strategy s : config.compare.strategies) {
    for (std::size_t d = 0; d < config.compare.draws; ++d) {
      for (std::size_t r = 0; r < config.compare.replications; ++r) work.push_back({s, d, r});
    }
  }
  if (config.compare.log_dir) fs::create_directories(*config.compare.log_dir);
  const double factor = effective_runtime_factor(config);
  const std::string hash = config_hash(config.source);

  std::vector<CompareRow> rows(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < work.size();) {
      const Job& job = work[i];
      CompareRow& row = rows[i];
      row.case_name = config.name;
      row.strategy = job.strategy;
      row.draw = job.draw;
      row.replication = job.rep;
      row.seeds = replication_seeds(config.tuner.seed_tuner, config.tuner.seed_eval_base, config.data.seed, job.draw,
                                    job.rep);
      try {
        TunerConfig tuner = config.tuner;
        tuner.seed_tuner = row.seeds.tuner;
        tuner.seed_eval_base = row.seeds.eval_base;
        tuner.runtime_factor = factor;
        const Task task = load_task(config.data, job.draw);
        const SearchSpace space = build_space(config.space_source, task);
        const Objective objective = build_objective(config, task, tuner, job.draw);
        std::optional<std::string> log;
        if (config.compare.log_dir) {
          log = (fs::path(*config.compare.log_dir) /
                 (std::string(to_string(job.strategy)) + "-d" + std::to_string(job.draw) + "-r" +
                  std::to_string(job.rep) + ".jsonl"))
                    .string();
        }
        const TuneResult res = logged_run(job.strategy, objective, space, tuner, config.name, hash, log);
        row.ok = true;
        row.loss = res.y_best;
        row.evals = res.records.size();
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, work.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  return rows;
}

int cmd_tune(const std::string& config_path, bool dry_run, const std::optional<std::string>& log_override,
             std::ostream& out) {
  ExperimentConfig c = load_config(config_path);
  const Task task = load_task(c.data);
  const SearchSpace space = build_space(c.space_source, task);
  if (c.strategy == Strategy::Default) space.defaults();
  std::optional<std::string> log = log_override ? log_override : c.log_path;
  if (!log) log = fs::path(config_path).stem().string() + ".jsonl";
  if (dry_run) {
    out << "config ok: " << c.name << ", strategy " << to_string(c.strategy) << ", " << space.dimension()
        << " parameters, " << task.rows() << " rows, hash " << config_hash(c.source) << '\n';
    return kExitOk;
  }
  TunerConfig tuner = c.tuner;
  tuner.runtime_factor = effective_runtime_factor(c);
  const Objective objective = build_objective(c, task, tuner, 0);
  const TuneResult res = logged_run(c.strategy, objective, space, tuner, c.name, config_hash(c.source), log);
  out << "evaluations: " << res.records.size() << "\nbest loss: " << std::setprecision(17) << res.y_best
      << "\nbest: ";
  print_assignment(out, res.x_best_natural);
  out << "\nlog: " << *log << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& config_path, std::size_t jobs, const std::optional<std::string>& out_path,
                std::ostream& out) {
  const ExperimentConfig c = load_config(config_path);
  const auto rows = run_comparison(c, jobs);
  std::ofstream file;
  if (out_path) {
    file.open(*out_path, std::ios::app);
    if (!file) throw ConfigError("cannot open '" + *out_path + "' for writing");
  }
  std::size_t failed = 0;
  for (const auto& r : rows) {
    const std::string line = compare_row_to_json(r).dump();
    if (out_path) {
      file << line << '\n';
    } else {
      out << line << '\n';
    }
    if (!r.ok) {
      ++failed;
      std::cerr << "run " << to_string(r.strategy) << " draw " << r.draw << " rep " << r.replication
                << " failed: " << r.error << '\n';
    }
  }
  return failed == rows.size() ? kExitRuntime : kExitOk;
}

int cmd_rank(const std::vector<std::string>& logs, const std::optional<std::string>& out_path, std::ostream& out) {
  std::vector<std::string> case_order;
  std::map<std::string, std::vector<CompareRow>> by_case;
  std::vector<Strategy> subjects;
  for (const auto& path : logs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open comparison log '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ConfigError("malformed comparison log '" + path + "': " + e.what());
      }
      if (!j.contains("type") || j.at("type") != "compare") continue;
      CompareRow r = compare_row_from_json(j);
      if (!by_case.count(r.case_name)) case_order.push_back(r.case_name);
      if (std::find(subjects.begin(), subjects.end(), r.strategy) == subjects.end()) subjects.push_back(r.strategy);
      by_case[r.case_name].push_back(std::move(r));
    }
  }
  if (subjects.size() < 2) throw ConfigError("ranking needs at least two strategies");

  std::vector<RankingCase> cases;
  json records = json::array();
  for (const auto& name : case_order) {
    std::map<std::pair<std::size_t, std::size_t>, std::map<Strategy, const CompareRow*>> experiments;
    for (const auto& r : by_case[name]) experiments[{r.draw, r.replication}][r.strategy] = &r;
    std::vector<Ranking> rankings;
    std::size_t skipped = 0;
    for (const auto& [key, per] : experiments) {
      std::vector<double> losses;
      for (Strategy s : subjects) {
        auto it = per.find(s);
        if (it == per.end() || !it->second->ok) break;
        losses.push_back(it->second->loss);
      }
      if (losses.size() != subjects.size()) {
        ++skipped;
        continue;
      }
      rankings.push_back(ranks_from_losses(losses));
    }
    if (rankings.empty()) throw DataError("case '" + name + "' has no experiment with results for every strategy");
    RankingCase rc = make_ranking_case(std::move(rankings));
    json j;
    j["type"] = "consensus";
    j["case"] = name;
    j["rankings"] = rc.rankings;
    j["consensus"] = rc.consensus;
    j["total_distance"] = rc.total_distance;
    j["skipped_experiments"] = skipped;
    records.push_back(std::move(j));
    cases.push_back(std::move(rc));
  }
  const auto freq = rank_frequencies(cases);

  std::vector<std::string> names;
  for (Strategy s : subjects) names.emplace_back(to_string(s));
  json summary;
  summary["type"] = "rank_frequencies";
  summary["subjects"] = names;
  summary["cases"] = cases.size();
  summary["frequencies"] = freq;
  records.push_back(summary);

  out << "case,consensus,total_distance\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out << case_order[i] << ',';
    for (std::size_t s = 0; s < cases[i].consensus.size(); ++s) out << (s ? " " : "") << cases[i].consensus[s];
    out << ',' << cases[i].total_distance << '\n';
  }
  out << "\nstrategy";
  for (std::size_t r = 1; r <= subjects.size(); ++r) out << ",rank" << r;
  out << '\n';
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    out << names[s];
    for (double v : freq[s]) out << ',' << v;
    out << '\n';
  }
  if (out_path) {
    std::ofstream file(*out_path);
    if (!file) throw ConfigError("cannot open '" + *out_path + "' for writing");
    for (const auto& r : records) file << r.dump() << '\n';
  }
  return kExitOk;
}

int cmd_difficulty(const std::string& data_path, const std::string& target, std::optional<double> threshold,
                   const std::optional<std::string>& out_path, std::ostream& out, std::ostream& err) {
  if (!fs::exists(data_path)) throw ConfigError("data file not found: " + data_path);
  Table table = load_csv(data_path);
  if (!table.has_column(target)) throw ConfigError("no target column '" + target + "'");
  if (!table.column(target).is_categorical()) {
    if (!threshold) throw ConfigError("target '" + target + "' is numeric; pass --threshold to discretize it");
    table = discretize_target(table, target, *threshold);
  }
  const Task task = make_task(std::move(table), target, TaskType::Classification);
  const OverlapReport rep = sample_overlap_report(task);

  std::ofstream file;
  if (out_path) {
    file.open(*out_path);
    if (!file) throw ConfigError("cannot open '" + *out_path + "' for writing");
  }
  std::ostream& csv = out_path ? static_cast<std::ostream&>(file) : out;
  csv << std::setprecision(17) << "feature,overlap\n";
  for (const auto& f : rep.features) csv << f.feature << ',' << f.overlap << '\n';
  csv << "total," << rep.total << '\n';
  err << "sample overlap " << std::setprecision(6) << rep.total << ", difficulty level " << difficulty_level(rep.total)
      << " (nearest observed anchor of 0.39/0.54/0.76/1.00; extrapolated)\n";
  return kExitOk;
}

int cmd_design(const std::string& config_path, std::optional<std::size_t> size, DesignKind kind,
               std::optional<std::uint64_t> seed, std::ostream& out) {
  const ExperimentConfig c = load_config(config_path);
  const Task task = load_task(c.data);
  const SearchSpace space = build_space(c.space_source, task);
  const std::size_t n = size.value_or(c.tuner.effective_design_size(space.dimension()));
  const std::uint64_t s = seed.value_or(c.tuner.seed_tuner);
  const DesignMatrix d = kind == DesignKind::Lhs ? lhs(space, n, s) : uniform_random(space, n, s);
  write_design_csv(out, space, d);
  return kExitOk;
}

int cmd_replay(const std::string& log_path, std::ostream& out) {
  const auto runs = replay_log_file(log_path);
  if (runs.empty()) throw DataError("log '" + log_path + "' contains no runs");
  for (const auto& run : runs) {
    out << run.name << " [" << to_string(run.result.strategy) << ", " << run.config_hash << "] "
        << run.result.records.size() << " evaluations" << (run.complete ? "" : " (incomplete)");
    if (!run.result.records.empty()) {
      out << ", best loss " << std::setprecision(17) << run.result.y_best << " at #" << run.result.best_index << ": ";
      print_assignment(out, run.result.x_best_natural);
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::string& log_path, const std::string& out_dir, std::ostream& out) {
  const auto runs = replay_log_file(log_path);
  if (runs.empty()) throw DataError("log '" + log_path + "' contains no runs");
  const auto& run = runs.back();
  const SensitivityReport rep = sensitivity_export(run.result, run.space);
  fs::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(out_dir) / name);
    if (!f) throw ConfigError(std::string("cannot write ") + name);
    return f;
  };
  {
    auto f = open("parallel.csv");
    write_parallel_csv(f, rep);
  }
  {
    auto f = open("sensitivity.csv");
    write_curves_csv(f, rep);
  }
  if (rep.surface_pair) {
    auto f = open("surface.csv");
    write_surface_csv(f, rep);
  }
  {
    auto f = open("tree.txt");
    f << rep.tree_rules;
  }
  out << "wrote report for " << run.result.records.size() << " evaluations to " << out_dir << '\n';
  if (!rep.surrogate_fitted) out << "surrogate fit failed; sensitivity tables use the mean loss\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Surrogate-model-based hyperparameter tuning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "spotune 0.1.0");

  std::string config, log_path, data_path, target, out_dir;
  std::optional<std::string> log_override, out_path;
  std::optional<double> threshold;
  std::optional<std::size_t> design_size;
  std::optional<std::uint64_t> design_seed;
  std::string design_kind = "lhs";
  std::vector<std::string> logs;
  bool dry_run = false;
  std::size_t jobs = env_u64("SPOTUNE_JOBS", 1);

  auto* tune = app.add_subcommand("tune", "Run one tuning strategy and write a run log");
  tune->add_option("config", config, "Experiment config (JSON)")->required();
  tune->add_flag("--dry-run", dry_run, "Validate the config and data only");
  tune->add_option("--log", log_override, "Run log path (JSONL, appended)");

  auto* compare = app.add_subcommand("compare", "Run strategies x data draws x replications");
  compare->add_option("config", config, "Experiment config (JSON)")->required();
  compare->add_option("-j,--jobs", jobs, "Concurrent runs (default: SPOTUNE_JOBS or 1)")->check(CLI::PositiveNumber);
  compare->add_option("-o,--out", out_path, "Comparison log (JSONL, appended); default stdout");

  auto* rank = app.add_subcommand("rank", "Consensus ranking of comparison logs");
  rank->add_option("logs", logs, "Comparison logs")->required();
  rank->add_option("-o,--out", out_path, "Write consensus records (JSONL)");

  auto* difficulty = app.add_subcommand("difficulty", "Sample overlap of a two-class data set");
  difficulty->add_option("data", data_path, "CSV file")->required();
  difficulty->add_option("-t,--target", target, "Target column")->required();
  difficulty->add_option("--threshold", threshold, "Discretize a numeric target at this value");
  difficulty->add_option("-o,--out", out_path, "CSV output (default stdout)");

  auto* design = app.add_subcommand("design", "Print an initial design for a config's space");
  design->add_option("config", config, "Experiment config (JSON)")->required();
  design->add_option("-n,--size", design_size, "Number of points (default 5 d)");
  design->add_option("--kind", design_kind, "lhs or uniform")->check(CLI::IsMember({"lhs", "uniform"}));
  design->add_option("--seed", design_seed, "Design seed (default tuner seed)");

  auto* replay = app.add_subcommand("replay", "Summarize the runs stored in a run log");
  replay->add_option("log", log_path, "Run log")->required();

  auto* report = app.add_subcommand("report", "Sensitivity tables for the last run in a log");
  report->add_option("log", log_path, "Run log")->required();
  report->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  auto* bench = app.add_subcommand("benchmark", "Time the standard calibration workload");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*tune) return cmd_tune(config, dry_run, log_override, std::cout);
    if (*compare) return cmd_compare(config, jobs, out_path, std::cout);
    if (*rank) return cmd_rank(logs, out_path, std::cout);
    if (*difficulty) return cmd_difficulty(data_path, target, threshold, out_path, std::cout, std::cerr);
    if (*design) {
      return cmd_design(config, design_size, design_kind == "lhs" ? DesignKind::Lhs : DesignKind::Uniform, design_seed,
                        std::cout);
    }
    if (*replay) return cmd_replay(log_path, std::cout);
    if (*report) return cmd_report(log_path, out_dir, std::cout);
    if (*bench) {
      std::cout << std::setprecision(6) << runtime_factor(1.0) << " s\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DecodeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace spotune::cli
