#include "spotune/objective.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "spotune/learners.hpp"

namespace spotune {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Grace period for a cancelled learner to notice the stop request before the
// worker is abandoned.
constexpr auto kCancelGrace = std::chrono::seconds(2);

double loss_of(const PreparedTask& t, const std::vector<double>& pred) {
  if (pred.size() != t.test_y.size()) throw std::runtime_error("learner returned wrong number of predictions");
  return t.type == TaskType::Classification ? mmce(t.test_y, pred) : rmse(t.test_y, pred);
}

class KnnLearner final : public Learner {
 public:
  LearnerRun run(const PreparedTask& t, const Assignment& params, std::uint64_t, std::stop_token stop) const override {
    const auto k = static_cast<int>(std::llround(params.number("k")));
    const double p = params.number("p");
    LearnerRun r;
    const auto t0 = Clock::now();
    // Lazy learner: all work happens at prediction time.
    r.predictions = knn_predict(t.train_x, t.train_y, t.type, t.test_x, k, p, stop);
    r.predict_time = seconds_since(t0);
    return r;
  }
};

class CartLearner final : public Learner {
 public:
  LearnerRun run(const PreparedTask& t, const Assignment& params, std::uint64_t, std::stop_token stop) const override {
    CartParams cp;
    cp.minsplit = static_cast<int>(std::llround(params.number("minsplit")));
    cp.minbucket = static_cast<int>(std::llround(params.number("minbucket")));
    cp.cp = params.number("cp");
    cp.maxdepth = static_cast<int>(std::llround(params.number("maxdepth")));
    LearnerRun r;
    auto t0 = Clock::now();
    const auto tree = cart_fit(t.train_x, t.train_y, t.type, cp, stop);
    r.train_time = seconds_since(t0);
    t0 = Clock::now();
    r.predictions = tree.predict(t.test_x);
    r.predict_time = seconds_since(t0);
    return r;
  }
};

EvalOutcome fallback_outcome(double loss, EvalStatus status, std::string message, Clock::time_point t0) {
  EvalOutcome o;
  o.loss = loss;
  o.status = status;
  o.message = std::move(message);
  o.total_time = seconds_since(t0);
  return o;
}

}  // namespace

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw ConfigError("rmse: length mismatch");
  if (y_true.empty()) throw ConfigError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  return std::sqrt(s / static_cast<double>(y_true.size()));
}

std::string_view to_string(EvalStatus s) {
  switch (s) {
    case EvalStatus::Ok: return "ok";
    case EvalStatus::TimeoutFallback: return "timeout-fallback";
    case EvalStatus::ErrorFallback: return "error-fallback";
  }
  return "?";
}

EvalStatus eval_status_from_string(std::string_view s) {
  if (s == "ok") return EvalStatus::Ok;
  if (s == "timeout-fallback") return EvalStatus::TimeoutFallback;
  if (s == "error-fallback") return EvalStatus::ErrorFallback;
  throw ConfigError("unknown evaluation status '" + std::string(s) + "'");
}

LearnerId learner_from_string(std::string_view s) {
  if (s == "knn") return LearnerId::Knn;
  if (s == "dt") return LearnerId::DecisionTree;
  if (s == "external") return LearnerId::External;
  throw ConfigError("unknown learner '" + std::string(s) + "'");
}

std::string_view to_string(LearnerId id) {
  switch (id) {
    case LearnerId::Knn: return "knn";
    case LearnerId::DecisionTree: return "dt";
    case LearnerId::External: return "external";
  }
  return "?";
}

std::shared_ptr<const Learner> make_native_learner(LearnerId id) {
  switch (id) {
    case LearnerId::Knn: return std::make_shared<KnnLearner>();
    case LearnerId::DecisionTree: return std::make_shared<CartLearner>();
    case LearnerId::External: break;
  }
  throw ConfigError("learner '" + std::string(to_string(id)) + "' is not native");
}

PreparedTask prepare_task(const Task& task, const HoldoutSplit& split) {
  PreparedTask p;
  p.type = task.type;
  const Table encoded = dummy_encode(impute(task.features));
  for (const auto& c : encoded.columns()) p.feature_names.push_back(c.name);
  const DenseMatrix all = to_matrix(encoded);
  const auto h = holdout_indices(task.rows(), split.train_fraction, split.split_seed);

  auto take = [&](const std::vector<std::size_t>& rows, DenseMatrix& x, std::vector<double>& y) {
    x.rows = rows.size();
    x.cols = all.cols;
    x.data.reserve(x.rows * x.cols);
    for (auto r : rows) {
      const auto row = all.row(r);
      x.data.insert(x.data.end(), row.begin(), row.end());
      y.push_back(task.type == TaskType::Classification ? static_cast<double>(task.target.codes[r])
                                                        : task.target.values[r]);
    }
  };
  take(h.train, p.train_x, p.train_y);
  take(h.test, p.test_x, p.test_y);
  if (task.type == TaskType::Classification) {
    p.class_labels = task.target.levels;
    const auto [lo, hi] = std::minmax_element(p.train_y.begin(), p.train_y.end());
    if (*lo == *hi) throw DataError("classification training split contains a single class");
  }
  return p;
}

double fallback_loss(const PreparedTask& t) {
  if (t.type == TaskType::Classification) {
    std::vector<double> counts(std::max<std::size_t>(t.class_labels.size(), 1), 0.0);
    for (double y : t.train_y) {
      const auto c = static_cast<std::size_t>(y);
      if (c >= counts.size()) counts.resize(c + 1, 0.0);
      counts[c] += 1.0;
    }
    const double mode = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    return mmce(t.test_y, std::vector<double>(t.test_y.size(), mode));
  }
  double mean = 0.0;
  for (double y : t.train_y) mean += y;
  mean /= static_cast<double>(t.train_y.size());
  return rmse(t.test_y, std::vector<double>(t.test_y.size(), mean));
}

Objective make_objective(const Task& task, std::shared_ptr<const Learner> learner, const HoldoutSplit& split,
                         std::optional<double> timeout) {
  if (!learner) throw ConfigError("objective needs a learner");
  if (timeout && !(*timeout > 0.0)) throw ConfigError("timeout must be positive");
  auto prepared = std::make_shared<const PreparedTask>(prepare_task(task, split));
  const double fallback = fallback_loss(*prepared);

  return [prepared, learner, fallback, timeout](const Assignment& params, const EvalRequest& req) -> EvalOutcome {
    const auto t0 = Clock::now();
    auto finish = [&](LearnerRun run) {
      EvalOutcome o;
      o.train_time = run.train_time;
      o.predict_time = run.predict_time;
      o.loss = loss_of(*prepared, run.predictions);
      o.total_time = seconds_since(t0);
      if (!std::isfinite(o.loss)) return fallback_outcome(fallback, EvalStatus::ErrorFallback, "non-finite loss", t0);
      return o;
    };

    if (!timeout || !req.enforce_timeout) {
      try {
        return finish(learner->run(*prepared, params, req.eval_seed, {}));
      } catch (const std::exception& e) {
        return fallback_outcome(fallback, EvalStatus::ErrorFallback, e.what(), t0);
      }
    }

    // Everything the worker touches is owned through shared pointers so an
    // abandoned worker stays valid.
    auto task_fn = std::make_shared<std::packaged_task<LearnerRun(std::stop_token)>>(
        [prepared, learner, params, seed = req.eval_seed](std::stop_token stop) {
          return learner->run(*prepared, params, seed, std::move(stop));
        });
    auto result = task_fn->get_future();
    std::stop_source source;
    std::thread worker([task_fn, token = source.get_token()] { (*task_fn)(token); });

    const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*timeout));
    if (result.wait_until(deadline) == std::future_status::ready) {
      worker.join();
      try {
        return finish(result.get());
      } catch (const std::exception& e) {
        return fallback_outcome(fallback, EvalStatus::ErrorFallback, e.what(), t0);
      }
    }
    source.request_stop();
    if (result.wait_for(kCancelGrace) == std::future_status::ready) {
      worker.join();
    } else {
      worker.detach();
    }
    return fallback_outcome(fallback, EvalStatus::TimeoutFallback,
                            "evaluation exceeded timeout of " + std::to_string(*timeout) + " s", t0);
  };
}

// ---------------------------------------------------------------------------

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
  return s;
}

std::string shell_quote(const std::string& s) { return "'" + replace_all(s, "'", "'\\''") + "'"; }

enum class ProcessResult { Exited0, ExitedNonZero, TimedOut, SpawnFailed };

ProcessResult run_shell(const std::string& command, std::optional<double> timeout, std::uint64_t seed) {
  // Everything the child needs is built before fork(); only async-signal-safe
  // calls happen in the child.
  std::vector<std::string> env_strings;
  for (char** e = environ; *e; ++e) {
    if (std::string_view(*e).starts_with("SPOTUNE_EVAL_SEED=")) continue;
    env_strings.emplace_back(*e);
  }
  env_strings.push_back("SPOTUNE_EVAL_SEED=" + std::to_string(seed));
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string sh = "sh", dash_c = "-c", cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};

  const pid_t pid = fork();
  if (pid < 0) return ProcessResult::SpawnFailed;
  if (pid == 0) {
    setpgid(0, 0);
    execve("/bin/sh", argv, envp.data());
    _exit(127);
  }
  setpgid(pid, pid);
  const auto t0 = Clock::now();
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) return ProcessResult::SpawnFailed;
    if (timeout && seconds_since(t0) > *timeout) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return ProcessResult::TimedOut;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return WIFEXITED(status) && WEXITSTATUS(status) == 0 ? ProcessResult::Exited0 : ProcessResult::ExitedNonZero;
}

}  // namespace

Objective external_objective(const ExternalCommand& command, std::optional<double> timeout, double fallback) {
  if (command.command_template.find("{params}") == std::string::npos ||
      command.command_template.find("{result}") == std::string::npos)
    throw ConfigError("external command must contain {params} and {result} placeholders");
  if (timeout && !(*timeout > 0.0)) throw ConfigError("timeout must be positive");
  if (!std::isfinite(fallback)) throw ConfigError("fallback loss must be finite");
  namespace fs = std::filesystem;
  fs::create_directories(command.workdir);
  auto counter = std::make_shared<std::atomic<std::uint64_t>>(0);

  return [command, timeout, fallback, counter](const Assignment& params, const EvalRequest& req) -> EvalOutcome {
    const auto t0 = Clock::now();
    const std::string tag = std::to_string(::getpid()) + "_" + std::to_string(req.eval_seed) + "_" +
                            std::to_string(counter->fetch_add(1));
    const fs::path param_file = fs::path(command.workdir) / ("params_" + tag + ".txt");
    const fs::path result_file = fs::path(command.workdir) / ("result_" + tag + ".txt");
    {
      std::ofstream out(param_file);
      for (const auto& [name, value] : params) out << name << '=' << format_value(value) << '\n';
      if (!out) return fallback_outcome(fallback, EvalStatus::ErrorFallback, "cannot write parameter file", t0);
    }
    std::error_code ec;
    fs::remove(result_file, ec);
    std::string cmd = replace_all(command.command_template, "{params}", shell_quote(param_file.string()));
    cmd = replace_all(cmd, "{result}", shell_quote(result_file.string()));
    cmd = replace_all(cmd, "{seed}", std::to_string(req.eval_seed));

    const auto rc = run_shell(cmd, req.enforce_timeout ? timeout : std::nullopt, req.eval_seed);
    auto cleanup = [&] {
      fs::remove(param_file, ec);
      fs::remove(result_file, ec);
    };
    switch (rc) {
      case ProcessResult::TimedOut:
        cleanup();
        return fallback_outcome(fallback, EvalStatus::TimeoutFallback, "command exceeded timeout", t0);
      case ProcessResult::SpawnFailed:
        cleanup();
        return fallback_outcome(fallback, EvalStatus::ErrorFallback, "cannot start command", t0);
      case ProcessResult::ExitedNonZero:
        cleanup();
        return fallback_outcome(fallback, EvalStatus::ErrorFallback, "command exited with non-zero status", t0);
      case ProcessResult::Exited0:
        break;
    }
    std::ifstream in(result_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cleanup();
    std::istringstream is(text);
    double loss;
    std::string rest;
    if (!(is >> loss) || (is >> rest) || !std::isfinite(loss))
      return fallback_outcome(fallback, EvalStatus::ErrorFallback, "malformed result file", t0);
    EvalOutcome o;
    o.loss = loss;
    o.total_time = seconds_since(t0);
    return o;
  };
}

Objective make_objective(const Task& task, LearnerId learner, const HoldoutSplit& split,
                         std::optional<double> timeout, const ExternalCommand& external) {
  if (learner == LearnerId::External) {
    const double fb = fallback_loss(prepare_task(task, split));
    return external_objective(external, timeout, fb);
  }
  return make_objective(task, make_native_learner(learner), split, timeout);
}

}  // namespace spotune
