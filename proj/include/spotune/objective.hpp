#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ranges>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "spotune/data.hpp"
#include "spotune/errors.hpp"
#include "spotune/space.hpp"

namespace spotune {

// Mean misclassification error: fraction of positions where labels differ.
template <std::ranges::sized_range A, std::ranges::sized_range B>
double mmce(const A& y_true, const B& y_pred) {
  const auto n = std::ranges::size(y_true);
  if (n != std::ranges::size(y_pred)) throw ConfigError("mmce: length mismatch");
  if (n == 0) throw ConfigError("mmce: empty input");
  std::size_t wrong = 0;
  auto it = std::ranges::begin(y_pred);
  for (const auto& t : y_true) wrong += !(t == *it++);
  return static_cast<double>(wrong) / static_cast<double>(n);
}

double rmse(std::span<const double> y_true, std::span<const double> y_pred);

enum class EvalStatus { Ok, TimeoutFallback, ErrorFallback };

std::string_view to_string(EvalStatus s);
EvalStatus eval_status_from_string(std::string_view s);

struct EvalRequest {
  std::uint64_t eval_seed = 0;
  // false: run to completion regardless of the objective's timeout.
  bool enforce_timeout = true;
};

struct EvalOutcome {
  double loss = 0.0;
  double train_time = 0.0;
  double predict_time = 0.0;
  double total_time = 0.0;
  EvalStatus status = EvalStatus::Ok;
  std::string message;  // diagnostic for fallback statuses
};

// Loss over natural-scale assignments. Never throws for evaluation failures:
// those become fallback outcomes with a finite loss.
using Objective = std::function<EvalOutcome(const Assignment&, const EvalRequest&)>;

// Preprocessed holdout problem: imputed, dummy-coded, split once per run.
struct PreparedTask {
  TaskType type = TaskType::Classification;
  DenseMatrix train_x;
  DenseMatrix test_x;
  std::vector<double> train_y;
  std::vector<double> test_y;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
};

struct HoldoutSplit {
  double train_fraction = 0.6;
  std::uint64_t split_seed = 1;
};

// Throws DataError if a classification training split has fewer than two classes.
PreparedTask prepare_task(const Task& task, const HoldoutSplit& split);

// Quality of predicting the training mode (classification, MMCE) or the
// training mean (regression, RMSE) on the test split.
double fallback_loss(const PreparedTask& task);

struct LearnerRun {
  std::vector<double> predictions;
  double train_time = 0.0;
  double predict_time = 0.0;
};

class Learner {
 public:
  virtual ~Learner() = default;
  // Trains on the training split and predicts the test split. Long-running
  // implementations poll `stop` and throw Cancelled.
  virtual LearnerRun run(const PreparedTask& task, const Assignment& params, std::uint64_t seed,
                         std::stop_token stop) const = 0;
};

enum class LearnerId { Knn, DecisionTree, External };

LearnerId learner_from_string(std::string_view s);
std::string_view to_string(LearnerId id);

// knn: parameters k, p. dt: minsplit, minbucket, cp, maxdepth.
std::shared_ptr<const Learner> make_native_learner(LearnerId id);

struct ExternalCommand {
  // Shell command; "{params}" and "{result}" are replaced with file paths,
  // "{seed}" with the evaluation seed.
  std::string command_template;
  std::string workdir = ".";
};

// Holdout objective. timeout in seconds; nullopt disables it. On timeout or
// any learner error the fallback loss of the same split is returned.
Objective make_objective(const Task& task, std::shared_ptr<const Learner> learner, const HoldoutSplit& split,
                         std::optional<double> timeout);
Objective make_objective(const Task& task, LearnerId learner, const HoldoutSplit& split,
                         std::optional<double> timeout, const ExternalCommand& external = {});

// Writes the assignment as key=value lines, runs the command, and reads one
// number from the result file. Non-zero exit, malformed output or timeout
// yield `fallback` with the matching status.
Objective external_objective(const ExternalCommand& command, std::optional<double> timeout, double fallback);

}  // namespace spotune
