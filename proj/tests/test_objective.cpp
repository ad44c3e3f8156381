#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <thread>

#include "spotune/errors.hpp"
#include "spotune/learners.hpp"
#include "spotune/objective.hpp"

using namespace spotune;
using namespace std::chrono_literals;

namespace {

Task small_task(std::uint64_t seed = 5) {
  SynthSpec s;
  s.m = 300;
  s.n_numeric = 3;
  s.n_categorical = 1;
  s.separation = 1.5;
  s.seed = seed;
  return synth_classification(s);
}

// Mode-predictor MMCE computed straight from the raw task.
double mode_mmce_oracle(const Task& task, const HoldoutSplit& split) {
  const auto h = holdout_indices(task.rows(), split.train_fraction, split.split_seed);
  std::map<int, int> counts;
  for (auto i : h.train) ++counts[task.target.codes[i]];
  int mode = -1, best = -1;
  for (const auto& [code, n] : counts) {
    if (n > best) {
      mode = code;
      best = n;
    }
  }
  std::size_t wrong = 0;
  for (auto i : h.test) wrong += task.target.codes[i] != mode;
  return static_cast<double>(wrong) / static_cast<double>(h.test.size());
}

class SleepyLearner : public Learner {
 public:
  SleepyLearner(std::chrono::milliseconds nap, bool cooperative) : nap_(nap), cooperative_(cooperative) {}
  LearnerRun run(const PreparedTask& task, const Assignment&, std::uint64_t, std::stop_token stop) const override {
    const auto until = std::chrono::steady_clock::now() + nap_;
    while (std::chrono::steady_clock::now() < until) {
      if (cooperative_ && stop.stop_requested()) throw Cancelled();
      std::this_thread::sleep_for(5ms);
    }
    return {std::vector<double>(task.test_y.size(), 0.0), 0.0, 0.0};
  }

 private:
  std::chrono::milliseconds nap_;
  bool cooperative_;
};

class ThrowingLearner : public Learner {
 public:
  LearnerRun run(const PreparedTask&, const Assignment&, std::uint64_t, std::stop_token) const override {
    throw std::runtime_error("boom");
  }
};

Assignment dt_params(double cp) {
  Assignment a;
  a.set("minsplit", 20.0);
  a.set("minbucket", 7.0);
  a.set("cp", cp);
  a.set("maxdepth", 30.0);
  return a;
}

std::string tmpdir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("spotune_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("quality measures") {
  const std::vector<double> a{0, 1, 1, 0}, b{0, 1, 0, 1};
  CHECK(mmce(a, b) == 0.5);
  CHECK(mmce(a, a) == 0.0);
  const std::vector<double> y{1, 2, 3}, p{1, 2, 5};
  CHECK(rmse(y, p) == doctest::Approx(std::sqrt(4.0 / 3.0)));
  CHECK_THROWS(mmce(a, std::vector<double>{1.0}));
}

TEST_CASE("fallback loss matches an offline mode predictor") {
  const auto task = small_task();
  HoldoutSplit split{0.6, 3};
  CHECK(fallback_loss(prepare_task(task, split)) == mode_mmce_oracle(task, split));
}

TEST_CASE("regression fallback is the mean predictor RMSE") {
  Table t;
  t.add(Column::numeric("x", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  t.add(Column::numeric("y", {3, 1, 4, 1, 5, 9, 2, 6, 5, 3}));
  const auto task = make_task(t, "y", TaskType::Regression);
  const HoldoutSplit split{0.5, 8};
  const auto h = holdout_indices(10, 0.5, 8);
  double mean = 0.0;
  for (auto i : h.train) mean += task.target.values[i];
  mean /= h.train.size();
  double se = 0.0;
  for (auto i : h.test) se += std::pow(task.target.values[i] - mean, 2);
  CHECK(fallback_loss(prepare_task(task, split)) == doctest::Approx(std::sqrt(se / h.test.size())).epsilon(1e-15));
}

TEST_CASE("prepare_task rejects a one-class training split") {
  Table t;
  t.add(Column::numeric("x", {1, 2, 3, 4}));
  t.add(Column::categorical("y", {"a", "a", "a", "a"}));
  CHECK_THROWS_AS(prepare_task(make_task(t, "y", TaskType::Classification), HoldoutSplit{}), DataError);
}

TEST_CASE("native learner objective equals a direct fit") {
  const auto task = small_task();
  const HoldoutSplit split{0.6, 1};
  const auto prepared = prepare_task(task, split);
  auto obj = make_objective(task, LearnerId::DecisionTree, split, 10.0);
  const auto out = obj(dt_params(0.01), EvalRequest{1, true});
  CHECK(out.status == EvalStatus::Ok);
  const auto tree = cart_fit(prepared.train_x, prepared.train_y, TaskType::Classification, CartParams{});
  CHECK(out.loss == mmce(prepared.test_y, cart_predict(tree, prepared.test_x)));
  CHECK(out.total_time >= out.train_time);

  Assignment knn;
  knn.set("k", 5.0);
  knn.set("p", 2.0);
  auto kobj = make_objective(task, LearnerId::Knn, split, std::nullopt);
  const auto kout = kobj(knn, EvalRequest{1, true});
  CHECK(kout.loss == mmce(prepared.test_y, knn_predict(prepared.train_x, prepared.train_y, TaskType::Classification,
                                                       prepared.test_x, 5, 2.0)));
}

TEST_CASE("timeout yields the fallback loss exactly") {
  const auto task = small_task();
  const HoldoutSplit split{0.6, 2};
  auto obj = make_objective(task, std::make_shared<SleepyLearner>(5000ms, true), split, 0.2);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = obj(Assignment{}, EvalRequest{1, true});
  CHECK(std::chrono::steady_clock::now() - t0 < 2s);
  CHECK(out.status == EvalStatus::TimeoutFallback);
  CHECK(out.loss == mode_mmce_oracle(task, split));
}

TEST_CASE("a learner that ignores cancellation is abandoned") {
  const auto task = small_task();
  auto obj = make_objective(task, std::make_shared<SleepyLearner>(3000ms, false), HoldoutSplit{}, 0.1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = obj(Assignment{}, EvalRequest{1, true});
  CHECK(std::chrono::steady_clock::now() - t0 < 2900ms);
  CHECK(out.status == EvalStatus::TimeoutFallback);
}

TEST_CASE("timeout is not enforced when the request says so") {
  const auto task = small_task();
  auto obj = make_objective(task, std::make_shared<SleepyLearner>(300ms, true), HoldoutSplit{}, 0.05);
  CHECK(obj(Assignment{}, EvalRequest{1, false}).status == EvalStatus::Ok);
}

TEST_CASE("learner errors become error fallbacks") {
  const auto task = small_task();
  for (std::optional<double> timeout : {std::optional<double>{}, std::optional<double>{5.0}}) {
    auto obj = make_objective(task, std::make_shared<ThrowingLearner>(), HoldoutSplit{}, timeout);
    const auto out = obj(Assignment{}, EvalRequest{1, true});
    CHECK(out.status == EvalStatus::ErrorFallback);
    CHECK(out.message == "boom");
    CHECK(out.loss == fallback_loss(prepare_task(task, HoldoutSplit{})));
  }
  // Missing hyperparameters are an evaluation error as well.
  auto obj = make_objective(task, LearnerId::DecisionTree, HoldoutSplit{}, std::nullopt);
  CHECK(obj(Assignment{}, EvalRequest{1, true}).status == EvalStatus::ErrorFallback);
}

TEST_CASE("external command objective") {
  const auto dir = tmpdir("external");
  Assignment a;
  a.set("alpha", 0.25);
  a.set("kernel", std::string("radial"));

  SUBCASE("reads the result file") {
    ExternalCommand cmd{"awk -F= '$1==\"alpha\"{print $2*2}' {params} > {result}", dir};
    const auto out = external_objective(cmd, 5.0, 9.0)(a, EvalRequest{3, true});
    CHECK(out.status == EvalStatus::Ok);
    CHECK(out.loss == 0.5);
  }
  SUBCASE("passes the evaluation seed") {
    ExternalCommand cmd{"test \"$SPOTUNE_EVAL_SEED\" = {seed} && echo $SPOTUNE_EVAL_SEED > {result} # {params}", dir};
    const auto out = external_objective(cmd, 5.0, 9.0)(a, EvalRequest{42, true});
    CHECK(out.status == EvalStatus::Ok);
    CHECK(out.loss == 42.0);
  }
  SUBCASE("timeout") {
    ExternalCommand cmd{"sleep 5; echo 1 > {result} # {params}", dir};
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = external_objective(cmd, 0.3, 9.0)(a, EvalRequest{1, true});
    CHECK(std::chrono::steady_clock::now() - t0 < 3s);
    CHECK(out.status == EvalStatus::TimeoutFallback);
    CHECK(out.loss == 9.0);
  }
  SUBCASE("non-zero exit") {
    ExternalCommand cmd{"echo 1 > {result}; exit 3 # {params}", dir};
    const auto out = external_objective(cmd, 5.0, 9.0)(a, EvalRequest{1, true});
    CHECK(out.status == EvalStatus::ErrorFallback);
    CHECK(out.loss == 9.0);
  }
  SUBCASE("malformed result") {
    ExternalCommand cmd{"echo 1 2 > {result} # {params}", dir};
    CHECK(external_objective(cmd, 5.0, 9.0)(a, EvalRequest{1, true}).status == EvalStatus::ErrorFallback);
  }
  SUBCASE("placeholders are required") {
    CHECK_THROWS_AS(external_objective(ExternalCommand{"true", dir}, 5.0, 9.0), ConfigError);
  }
  std::filesystem::remove_all(dir);
}
