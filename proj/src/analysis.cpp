#include "spotune/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "spotune/errors.hpp"
#include "spotune/kriging.hpp"

namespace spotune {

void validate_ranking(const Ranking& r) {
  std::vector<bool> seen(r.size(), false);
  for (int v : r) {
    if (v < 1 || static_cast<std::size_t>(v) > r.size() || seen[v - 1]) {
      throw ConfigError("ranking is not a permutation of 1..k");
    }
    seen[v - 1] = true;
  }
}

int kendall_tau(const Ranking& r1, const Ranking& r2) {
  if (r1.size() != r2.size()) throw ConfigError("rankings differ in length");
  int d = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    for (std::size_t j = i + 1; j < r1.size(); ++j) {
      if ((r1[i] < r1[j]) != (r2[i] < r2[j])) ++d;
    }
  }
  return d;
}

Consensus kemeny_consensus(const std::vector<Ranking>& rankings) {
  if (rankings.empty()) throw ConfigError("no rankings to aggregate");
  const std::size_t k = rankings.front().size();
  for (const auto& r : rankings) {
    if (r.size() != k) throw ConfigError("rankings differ in length");
    validate_ranking(r);
  }
  if (k > kMaxKemenySubjects) {
    throw UnsupportedError("exhaustive Kemeny search supports at most 8 subjects, got " + std::to_string(k));
  }

  Ranking candidate(k);
  std::iota(candidate.begin(), candidate.end(), 1);
  Consensus best{candidate, -1};
  // next_permutation walks rank vectors in lexicographic order, so keeping the
  // first strict improvement implements the tie rule.
  do {
    int total = 0;
    for (const auto& r : rankings) total += kendall_tau(candidate, r);
    if (best.total_distance < 0 || total < best.total_distance) best = {candidate, total};
  } while (std::next_permutation(candidate.begin(), candidate.end()));
  return best;
}

RankingCase make_ranking_case(std::vector<Ranking> rankings) {
  RankingCase c;
  auto con = kemeny_consensus(rankings);
  c.rankings = std::move(rankings);
  c.consensus = std::move(con.consensus);
  c.total_distance = con.total_distance;
  return c;
}

Ranking ranks_from_losses(const std::vector<double>& losses) {
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  Ranking r(losses.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) r[order[pos]] = static_cast<int>(pos + 1);
  return r;
}

std::vector<std::vector<double>> rank_frequencies(const std::vector<RankingCase>& cases) {
  if (cases.empty()) throw ConfigError("no ranking cases");
  const std::size_t k = cases.front().consensus.size();
  std::vector<std::vector<double>> freq(k, std::vector<double>(k, 0.0));
  for (const auto& c : cases) {
    if (c.consensus.size() != k) throw ConfigError("ranking cases differ in subject count");
    validate_ranking(c.consensus);
    for (std::size_t s = 0; s < k; ++s) freq[s][c.consensus[s] - 1] += 1.0;
  }
  const double n = static_cast<double>(cases.size());
  for (auto& row : freq) {
    for (auto& v : row) v /= n;
  }
  return freq;
}

namespace {

std::vector<int> class_codes(const Column& target) {
  if (!target.is_categorical()) throw DataError("sample overlap needs a categorical target");
  std::vector<int> present;
  for (int c : target.codes) {
    if (c >= 0 && std::find(present.begin(), present.end(), c) == present.end()) present.push_back(c);
  }
  if (present.size() != 2) {
    throw DataError("sample overlap needs exactly two classes, found " + std::to_string(present.size()));
  }
  std::sort(present.begin(), present.end());
  std::vector<int> cls(target.codes.size(), -1);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (target.codes[i] >= 0) cls[i] = target.codes[i] == present[0] ? 0 : 1;
  }
  return cls;
}

double numeric_overlap(const Column& col, const std::vector<int>& cls) {
  double lo[2] = {INFINITY, INFINITY};
  double hi[2] = {-INFINITY, -INFINITY};
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] < 0 || col.is_na(i)) continue;
    lo[cls[i]] = std::min(lo[cls[i]], col.values[i]);
    hi[cls[i]] = std::max(hi[cls[i]], col.values[i]);
  }
  const double a = std::max(lo[0], lo[1]);
  const double b = std::min(hi[0], hi[1]);
  std::size_t inside = 0, total = 0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] < 0 || col.is_na(i)) continue;
    ++total;
    if (col.values[i] >= a && col.values[i] <= b) ++inside;
  }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

double categorical_overlap(const Column& col, const std::vector<int>& cls) {
  std::vector<int> seen(col.levels.size(), 0);  // bit c: level seen in class c
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] < 0 || col.codes[i] < 0) continue;
    seen[col.codes[i]] |= 1 << cls[i];
  }
  std::size_t inside = 0, total = 0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] < 0 || col.codes[i] < 0) continue;
    ++total;
    if (seen[col.codes[i]] == 3) ++inside;
  }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

}  // namespace

OverlapReport sample_overlap_report(const Task& task) {
  const auto cls = class_codes(task.target);
  OverlapReport rep;
  for (const auto& col : task.features.columns()) {
    const double o = col.is_categorical() ? categorical_overlap(col, cls) : numeric_overlap(col, cls);
    rep.features.push_back({col.name, o});
    rep.total *= o;
  }
  return rep;
}

int difficulty_level(double overlap) {
  if (!std::isfinite(overlap)) throw ConfigError("overlap must be finite");
  int best = 0;
  double best_d = std::abs(overlap - kDifficultyAnchors[0]);
  for (int i = 1; i < 4; ++i) {
    const double d = std::abs(overlap - kDifficultyAnchors[i]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best + 1;
}

SensitivityReport sensitivity_export(const TuneResult& result, const SearchSpace& space,
                                     std::optional<std::pair<std::size_t, std::size_t>> pair, std::uint64_t seed) {
  const std::size_t d = space.dimension();
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::size_t best = 0;
  for (const auto& r : result.records) {
    if (r.raw_x.size() != d) continue;
    if (!x.empty() && r.loss < y[best]) best = x.size();
    x.push_back(r.raw_x);
    y.push_back(r.loss);
  }
  if (x.empty()) throw ConfigError("no records with raw points to analyse");

  SensitivityReport rep;
  for (const auto& p : space.params()) rep.names.push_back(p.name);
  const auto lower = space.lower_bounds();
  const auto upper = space.upper_bounds();

  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> row(d + 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double w = upper[j] - lower[j];
      row[j] = w > 0.0 ? (x[i][j] - lower[j]) / w : 0.0;
    }
    row[d] = y[i];
    rep.parallel.push_back(std::move(row));
  }

  std::optional<KrigingModel> model;
  try {
    KrigingConfig kc;
    kc.lower = lower;
    kc.upper = upper;
    kc.categorical = space.categorical_mask();
    kc.seed = seed;
    model = fit_kriging(x, y, kc);
    if (result.config.noise) model = reinterpolate(*model);
  } catch (const FitError&) {
    model.reset();
  }
  rep.surrogate_fitted = model.has_value();
  const double flat = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  auto predict = [&](const std::vector<double>& p) { return model ? model->predict_mean(p) : flat; };

  auto grid = [&](std::size_t j) {
    std::vector<double> g(kSensitivityGrid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = lower[j] + (upper[j] - lower[j]) * static_cast<double>(i) / static_cast<double>(g.size() - 1);
    }
    g.back() = upper[j];
    return g;
  };

  const auto& centre = x[best];
  for (std::size_t j = 0; j < d; ++j) {
    SensitivityCurve c;
    c.param = rep.names[j];
    c.grid = grid(j);
    auto p = centre;
    for (double v : c.grid) {
      p[j] = v;
      c.mean.push_back(predict(p));
    }
    rep.curves.push_back(std::move(c));
  }

  if (!pair && d >= 2) pair = std::make_pair(std::size_t{0}, std::size_t{1});
  if (pair) {
    const auto [a, b] = *pair;
    if (a >= d || b >= d || a == b) throw ConfigError("invalid surface parameter pair");
    rep.surface_pair = pair;
    rep.surface_x = grid(a);
    rep.surface_y = grid(b);
    auto p = centre;
    for (double va : rep.surface_x) {
      std::vector<double> row;
      p[a] = va;
      for (double vb : rep.surface_y) {
        p[b] = vb;
        row.push_back(predict(p));
      }
      rep.surface.push_back(std::move(row));
    }
  }

  DenseMatrix m{x.size(), d, {}};
  for (const auto& row : x) m.data.insert(m.data.end(), row.begin(), row.end());
  rep.tree = cart_fit(m, y, TaskType::Regression, CartParams{});
  rep.tree_rules = rep.tree.to_rules(rep.names);
  return rep;
}

void write_parallel_csv(std::ostream& os, const SensitivityReport& report) {
  const auto old = os.precision(17);
  for (const auto& n : report.names) os << n << ',';
  os << "loss\n";
  for (const auto& row : report.parallel) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
    os << '\n';
  }
  os.precision(old);
}

void write_curves_csv(std::ostream& os, const SensitivityReport& report) {
  const auto old = os.precision(17);
  os << "param,index,raw,mean\n";
  for (const auto& c : report.curves) {
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      os << c.param << ',' << i << ',' << c.grid[i] << ',' << c.mean[i] << '\n';
    }
  }
  os.precision(old);
}

void write_surface_csv(std::ostream& os, const SensitivityReport& report) {
  if (!report.surface_pair) return;
  const auto old = os.precision(17);
  os << report.names[report.surface_pair->first] << ',' << report.names[report.surface_pair->second] << ",mean\n";
  for (std::size_t i = 0; i < report.surface_x.size(); ++i) {
    for (std::size_t j = 0; j < report.surface_y.size(); ++j) {
      os << report.surface_x[i] << ',' << report.surface_y[j] << ',' << report.surface[i][j] << '\n';
    }
  }
  os.precision(old);
}

}  // namespace spotune
