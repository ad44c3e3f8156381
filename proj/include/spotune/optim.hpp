#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace spotune {

using BoxObjective = std::function<double(std::span<const double>)>;
// Called after every objective evaluation with the candidate and its value.
using EvalObserver = std::function<void(std::span<const double>, double)>;

struct MinimizeResult {
  std::vector<double> x_best;
  double y_best = 0.0;
  std::size_t evals_used = 0;
};

struct DEConfig {
  std::size_t population_size = 0;  // 0: min(10 d, max_evals / 5), at least 4
  double scale_factor = 0.8;        // F
  double crossover_rate = 0.9;      // CR
  std::size_t max_evals = 0;
  std::uint64_t seed = 0;
};

// DE/rand/1/bin with clipping to the box. Non-finite objective values count
// as +infinity. Equal lower and upper bounds pin a coordinate.
MinimizeResult de_minimize(const BoxObjective& f, std::span<const double> lower,
                           std::span<const double> upper, const DEConfig& config,
                           const EvalObserver& observer = {});

MinimizeResult random_minimize(const BoxObjective& f, std::span<const double> lower,
                               std::span<const double> upper, std::size_t max_evals,
                               std::uint64_t seed, const EvalObserver& observer = {});

}  // namespace spotune
