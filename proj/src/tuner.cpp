#include "spotune/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "spotune/design.hpp"
#include "spotune/errors.hpp"
#include "spotune/kriging.hpp"
#include "spotune/optim.hpp"
#include "spotune/rng.hpp"

namespace spotune {

namespace {

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(Strategy s, const Objective& objective, const SearchSpace& space, const TunerConfig& config,
      const RecordSink& sink)
      : objective_(objective), space_(space), config_(config), sink_(sink), start_(Clock::now()) {
    result_.strategy = s;
    result_.config = config;
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool exhausted() const {
    if (config_.max_evals && result_.records.size() >= *config_.max_evals) return true;
    return !result_.records.empty() && elapsed() >= config_.budget();
  }

  const std::vector<EvaluationRecord>& records() const { return result_.records; }

  void evaluate(std::vector<double> raw, Assignment natural, std::size_t iteration, std::string origin,
                bool enforce_timeout, std::optional<SurrogateSummary> surrogate = std::nullopt) {
    EvaluationRecord r;
    r.index = result_.records.size();
    r.iteration = iteration;
    r.origin = std::move(origin);
    r.raw_x = std::move(raw);
    r.natural_x = std::move(natural);
    r.eval_seed = config_.seed_eval_base + r.index;
    r.surrogate = std::move(surrogate);
    const EvalOutcome o = objective_(r.natural_x, EvalRequest{r.eval_seed, enforce_timeout});
    r.loss = o.loss;
    r.train_time = o.train_time;
    r.predict_time = o.predict_time;
    r.total_time = o.total_time;
    r.status = o.status;
    r.message = o.message;
    if (!std::isfinite(r.loss)) throw std::runtime_error("objective returned a non-finite loss");
    result_.records.push_back(std::move(r));
    if (sink_) sink_(result_.records.back());
  }

  void evaluate_raw(std::vector<double> raw, std::size_t iteration, std::string origin,
                    std::optional<SurrogateSummary> surrogate = std::nullopt) {
    Assignment natural = space_.decode(raw);
    evaluate(std::move(raw), std::move(natural), iteration, std::move(origin), true, std::move(surrogate));
  }

  TuneResult finish() {
    auto& rs = result_.records;
    if (rs.empty()) throw std::logic_error("tuning run produced no records");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i].loss < rs[best].loss) best = i;
    }
    result_.best_index = best;
    result_.y_best = rs[best].loss;
    result_.x_best_raw = rs[best].raw_x;
    result_.x_best_natural = rs[best].natural_x;
    result_.wall_time_used = elapsed();
    return std::move(result_);
  }

 private:
  const Objective& objective_;
  const SearchSpace& space_;
  const TunerConfig& config_;
  const RecordSink& sink_;
  Clock::time_point start_;
  TuneResult result_;
};

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Spot: return "spot";
    case Strategy::Random: return "random";
    case Strategy::Default: return "default";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "spot") return Strategy::Spot;
  if (s == "random") return Strategy::Random;
  if (s == "default") return Strategy::Default;
  throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

std::optional<double> TunerConfig::effective_timeout() const {
  if (timeout_disabled) return std::nullopt;
  if (timeout && *timeout > 0.0) return timeout;
  return budget() / 20.0;
}

void TunerConfig::validate(Strategy s) const {
  if (!(max_time > 0.0)) throw ConfigError("max_time must be positive");
  if (!(runtime_factor > 0.0) || !std::isfinite(runtime_factor)) throw ConfigError("runtime_factor must be positive");
  if (max_evals && *max_evals == 0) throw ConfigError("max_evals must be at least 1");
  if (timeout && *timeout < 0.0) throw ConfigError("timeout must be non-negative");
  if (s == Strategy::Spot && design_size == 1) throw ConfigError("SPOT needs a design of at least 2 points");
}

TuneResult spot_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                    const RecordSink& sink) {
  config.validate(Strategy::Spot);
  const std::size_t d = space.dimension();
  if (d == 0) throw ConfigError("empty search space");
  Run run(Strategy::Spot, objective, space, config, sink);

  const auto design = lhs(space, config.effective_design_size(d), derive_seed(config.seed_tuner, 0));
  for (const auto& p : design.points) {
    if (run.exhausted()) return run.finish();
    run.evaluate_raw(p, 0, "design");
  }

  const auto lower = space.lower_bounds();
  const auto upper = space.upper_bounds();
  KrigingConfig kc;
  kc.lower = lower;
  kc.upper = upper;
  kc.categorical = space.categorical_mask();
  kc.mle_budget = config.mle_budget;
  Rng fallback_rng(derive_seed(config.seed_tuner, 1));

  for (std::size_t iteration = 1; !run.exhausted(); ++iteration) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& r : run.records()) {
      x.push_back(r.raw_x);
      y.push_back(r.loss);
    }
    std::vector<double> proposal;
    std::optional<SurrogateSummary> summary;
    std::string origin = "surrogate";
    try {
      SurrogateSummary s;
      s.fit_seed = derive_seed(config.seed_tuner, 2 * iteration);
      s.search_seed = derive_seed(config.seed_tuner, 2 * iteration + 1);
      kc.seed = s.fit_seed;
      KrigingModel model = fit_kriging(x, y, kc);
      if (config.noise) model = reinterpolate(model);
      DEConfig de;
      de.max_evals = config.effective_search_evals(d);
      de.seed = s.search_seed;
      const auto found =
          de_minimize([&](std::span<const double> p) { return model.predict_mean(p); }, lower, upper, de);
      proposal = found.x_best;
      s.theta = model.theta();
      s.lambda = model.lambda();
      s.mu = model.mu();
      s.sigma2 = model.sigma2();
      s.log_likelihood = model.log_likelihood();
      s.reinterpolated = model.reinterpolated();
      s.training_size = x.size();
      s.predicted = found.y_best;
      summary = std::move(s);
    } catch (const FitError&) {
      origin = "random-fallback";
      proposal.resize(d);
      for (std::size_t j = 0; j < d; ++j) proposal[j] = std::min(upper[j], fallback_rng.uniform(lower[j], upper[j]));
    }
    if (run.exhausted()) break;
    run.evaluate_raw(std::move(proposal), iteration, origin, std::move(summary));
  }
  return run.finish();
}

TuneResult random_search_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                             const RecordSink& sink) {
  config.validate(Strategy::Random);
  if (space.dimension() == 0) throw ConfigError("empty search space");
  Run run(Strategy::Random, objective, space, config, sink);
  const auto lower = space.lower_bounds();
  const auto upper = space.upper_bounds();
  Rng rng(derive_seed(config.seed_tuner, 0));
  while (!run.exhausted()) {
    std::vector<double> x(lower.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::min(upper[j], rng.uniform(lower[j], upper[j]));
    run.evaluate_raw(std::move(x), run.records().size(), "random");
  }
  return run.finish();
}

TuneResult default_run(const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                       const RecordSink& sink) {
  Run run(Strategy::Default, objective, space, config, sink);
  run.evaluate({}, space.defaults(), 0, "default", false);
  return run.finish();
}

TuneResult run_strategy(Strategy s, const Objective& objective, const SearchSpace& space, const TunerConfig& config,
                        const RecordSink& sink) {
  switch (s) {
    case Strategy::Spot: return spot_run(objective, space, config, sink);
    case Strategy::Random: return random_search_run(objective, space, config, sink);
    case Strategy::Default: return default_run(objective, space, config, sink);
  }
  throw ConfigError("unknown strategy");
}

ReplicationSeeds replication_seeds(std::uint64_t tuner_base, std::uint64_t eval_base, std::uint64_t data_base,
                                   std::size_t draw, std::size_t rep) {
  ReplicationSeeds s;
  s.tuner = tuner_base + 1000 * draw + rep;
  s.eval_base = eval_base + 1000000 * draw + 1000 * rep;
  s.data = data_base + draw;
  return s;
}

void standard_benchmark() {
  constexpr std::size_t n = 160;
  std::vector<double> a(n * n), b(n * n), c(n * n, 0.0);
  Rng rng(20240101);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  }
  std::vector<double> s(200000);
  for (auto& v : s) v = rng.uniform();
  std::sort(s.begin(), s.end());
  // Keep the optimizer from discarding the work.
  volatile double sink = c[n + 1] + s[s.size() / 2];
  (void)sink;
}

double runtime_factor(const std::function<void()>& workload, double reference_time) {
  if (!(reference_time > 0.0)) throw ConfigError("reference time must be positive");
  const auto t0 = Clock::now();
  workload();
  const double measured = std::chrono::duration<double>(Clock::now() - t0).count();
  return std::max(measured, 1e-9) / reference_time;
}

}  // namespace spotune
