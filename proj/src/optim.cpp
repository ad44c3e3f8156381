#include "spotune/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spotune/errors.hpp"
#include "spotune/rng.hpp"

namespace spotune {

namespace {

void check_box(std::span<const double> lower, std::span<const double> upper) {
  if (lower.size() != upper.size() || lower.empty())
    throw ConfigError("optimizer bounds must be non-empty and of equal length");
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) throw ConfigError("optimizer lower bound exceeds upper bound");
  }
}

double safe_eval(const BoxObjective& f, std::span<const double> x) {
  const double y = f(x);
  return std::isfinite(y) ? y : std::numeric_limits<double>::infinity();
}

}  // namespace

MinimizeResult de_minimize(const BoxObjective& f, std::span<const double> lower,
                           std::span<const double> upper, const DEConfig& config,
                           const EvalObserver& observer) {
  check_box(lower, upper);
  const std::size_t d = lower.size();
  std::size_t np = config.population_size;
  if (np == 0) np = std::max<std::size_t>(4, std::min(10 * d, config.max_evals / 5));
  if (np < 4) throw ConfigError("DE population must have at least 4 members");
  if (config.max_evals < np) throw ConfigError("DE budget is smaller than the population");
  if (!(config.scale_factor > 0.0 && config.scale_factor <= 2.0))
    throw ConfigError("DE scale factor must lie in (0, 2]");
  if (!(config.crossover_rate >= 0.0 && config.crossover_rate <= 1.0))
    throw ConfigError("DE crossover rate must lie in [0, 1]");

  Rng rng(config.seed);
  std::vector<std::vector<double>> pop(np, std::vector<double>(d));
  std::vector<double> fit(np);
  MinimizeResult best;
  best.y_best = std::numeric_limits<double>::infinity();

  auto evaluate = [&](const std::vector<double>& x) {
    const double y = safe_eval(f, x);
    ++best.evals_used;
    if (best.x_best.empty() || y < best.y_best) {
      best.y_best = y;
      best.x_best = x;
    }
    if (observer) observer(x, y);
    return y;
  };

  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < d; ++j) pop[i][j] = std::min(upper[j], rng.uniform(lower[j], upper[j]));
    fit[i] = evaluate(pop[i]);
  }

  std::vector<double> trial(d);
  while (best.evals_used < config.max_evals) {
    for (std::size_t i = 0; i < np && best.evals_used < config.max_evals; ++i) {
      std::size_t r1, r2, r3;
      do r1 = rng.below(np); while (r1 == i);
      do r2 = rng.below(np); while (r2 == i || r2 == r1);
      do r3 = rng.below(np); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t jrand = rng.below(d);
      for (std::size_t j = 0; j < d; ++j) {
        if (j == jrand || rng.uniform() < config.crossover_rate) {
          const double v = pop[r1][j] + config.scale_factor * (pop[r2][j] - pop[r3][j]);
          trial[j] = std::clamp(v, lower[j], upper[j]);
        } else {
          trial[j] = pop[i][j];
        }
      }
      const double y = evaluate(trial);
      if (y <= fit[i]) {
        pop[i] = trial;
        fit[i] = y;
      }
    }
  }
  return best;
}

MinimizeResult random_minimize(const BoxObjective& f, std::span<const double> lower,
                               std::span<const double> upper, std::size_t max_evals,
                               std::uint64_t seed, const EvalObserver& observer) {
  check_box(lower, upper);
  if (max_evals == 0) throw ConfigError("random search needs at least one evaluation");
  Rng rng(seed);
  MinimizeResult best;
  best.y_best = std::numeric_limits<double>::infinity();
  std::vector<double> x(lower.size());
  for (std::size_t e = 0; e < max_evals; ++e) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::min(upper[j], rng.uniform(lower[j], upper[j]));
    const double y = safe_eval(f, x);
    ++best.evals_used;
    if (best.x_best.empty() || y < best.y_best) {
      best.y_best = y;
      best.x_best = x;
    }
    if (observer) observer(x, y);
  }
  return best;
}

}  // namespace spotune
