#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spotune/objective.hpp"
#include "spotune/space.hpp"

namespace spotune {

enum class Strategy { Spot, Random, Default };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct TunerConfig {
  double max_time = 60.0;                // seconds of wall clock
  std::optional<std::size_t> max_evals;  // unlimited when unset
  std::size_t design_size = 0;           // 0: 5 d
  std::size_t surrogate_search_evals = 0;  // 0: 200 d
  std::optional<double> timeout;         // 0/unset: max_time / 20 of the scaled budget
  bool timeout_disabled = false;
  bool noise = true;
  std::uint64_t seed_tuner = 1;
  std::uint64_t seed_eval_base = 123;
  double runtime_factor = 1.0;
  std::size_t mle_budget = 0;  // Kriging likelihood evaluations; 0: 500 (d + 1)

  double budget() const { return max_time * runtime_factor; }
  std::optional<double> effective_timeout() const;
  std::size_t effective_design_size(std::size_t d) const { return design_size ? design_size : 5 * d; }
  std::size_t effective_search_evals(std::size_t d) const {
    return surrogate_search_evals ? surrogate_search_evals : 200 * d;
  }
  void validate(Strategy s) const;
};

// Surrogate state behind one SPOT proposal.
struct SurrogateSummary {
  std::vector<double> theta;
  double lambda = 0.0;
  double mu = 0.0;
  double sigma2 = 0.0;
  double log_likelihood = 0.0;
  bool reinterpolated = false;
  std::size_t training_size = 0;
  std::uint64_t fit_seed = 0;
  std::uint64_t search_seed = 0;
  double predicted = 0.0;  // surrogate mean at the proposal
};

struct EvaluationRecord {
  std::size_t index = 0;
  std::size_t iteration = 0;  // 0 for the initial design
  std::string origin;         // design | surrogate | random-fallback | random | default
  std::vector<double> raw_x;  // empty for default-baseline records
  Assignment natural_x;
  double loss = 0.0;
  double train_time = 0.0;
  double predict_time = 0.0;
  double total_time = 0.0;
  EvalStatus status = EvalStatus::Ok;
  std::string message;
  std::uint64_t eval_seed = 0;
  std::optional<SurrogateSummary> surrogate;
};

struct TuneResult {
  Strategy strategy = Strategy::Spot;
  std::vector<EvaluationRecord> records;
  std::size_t best_index = 0;
  double y_best = 0.0;
  std::vector<double> x_best_raw;
  Assignment x_best_natural;
  double wall_time_used = 0.0;
  TunerConfig config;

  const EvaluationRecord& best() const { return records.at(best_index); }
};

// Invoked after every completed evaluation (run logs).
using RecordSink = std::function<void(const EvaluationRecord&)>;

// Sequential parameter optimization: LHS design, then repeatedly fit Kriging
// on all records and evaluate the DE minimizer of its predicted mean, until
// the scaled wall-clock budget (or max_evals) is exhausted. The budget is
// checked before every evaluation; the first evaluation always runs.
TuneResult spot_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                    const RecordSink& sink = {});

// Uniform raw samples until the budget is exhausted.
TuneResult random_search_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                             const RecordSink& sink = {});

// One evaluation at the space's defaults, timeout never enforced. Defaults
// are not bound-checked.
TuneResult default_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config = {},
                       const RecordSink& sink = {});

TuneResult run_strategy(Strategy s, const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                        const RecordSink& sink = {});

// Seeds of replication `rep` on data draw `draw`; identical for every strategy.
struct ReplicationSeeds {
  std::uint64_t tuner = 0;
  std::uint64_t eval_base = 0;
  std::uint64_t data = 0;
};
ReplicationSeeds replication_seeds(std::uint64_t tuner_base, std::uint64_t eval_base, std::uint64_t data_base,
                                   std::size_t draw, std::size_t rep);

// Fixed dense workload (matrix product plus sort) used to calibrate budgets.
void standard_benchmark();

// measured time of `workload` / reference_time. Throws ConfigError if
// reference_time <= 0.
double runtime_factor(const std::function<void()>& workload, double reference_time);
inline double runtime_factor(double reference_time) { return runtime_factor(standard_benchmark, reference_time); }

}  // namespace spotune
