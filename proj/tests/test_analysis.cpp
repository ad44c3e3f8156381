#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spotune/analysis.hpp"
#include "spotune/errors.hpp"
#include "spotune/rng.hpp"

using namespace spotune;

namespace {

std::vector<Ranking> all_permutations(int k) {
  std::vector<Ranking> out;
  Ranking r(k);
  std::iota(r.begin(), r.end(), 1);
  do out.push_back(r);
  while (std::next_permutation(r.begin(), r.end()));
  return out;
}

// Minimum weighted feedback-arc cost over subject orders, where w[a][b]
// counts inputs that place a before b. Returns the optimal cost and the
// lexicographically smallest optimal rank vector.
std::pair<int, Ranking> pair_weight_oracle(const std::vector<Ranking>& rankings) {
  const int k = static_cast<int>(rankings.front().size());
  std::vector<std::vector<int>> w(k, std::vector<int>(k, 0));
  for (const auto& r : rankings) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) w[a][b] += r[a] < r[b];
    }
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  int best = INT32_MAX;
  Ranking best_rank;
  do {
    int cost = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) cost += w[order[j]][order[i]];
    }
    Ranking rank(k);
    for (int pos = 0; pos < k; ++pos) rank[order[pos]] = pos + 1;
    if (cost < best || (cost == best && rank < best_rank)) {
      best = cost;
      best_rank = rank;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return {best, best_rank};
}

Task overlap_example() {
  // Feature 1: class ranges [1, 5] and [3, 8]; five of ten samples lie in [3, 5].
  // Feature 2: levels u and v occur in both classes and cover seven samples.
  Table t;
  t.add(Column::numeric("f1", {1, 2, 3, 4, 5, 3, 4.5, 6, 7, 8}));
  t.add(Column::categorical("f2", {"u", "u", "v", "v", "w", "u", "v", "v", "x", "x"}));
  t.add(Column::categorical("y", {"a", "a", "a", "a", "a", "b", "b", "b", "b", "b"}));
  return make_task(t, "y", TaskType::Classification);
}

}  // namespace

TEST_CASE("kendall tau examples") {
  CHECK(kendall_tau({1, 2, 3}, {1, 2, 3}) == 0);
  CHECK(kendall_tau({3, 2, 1}, {1, 2, 3}) == 3);
  CHECK(kendall_tau({1, 3, 2}, {1, 2, 3}) == 1);
  CHECK_THROWS_AS(kendall_tau({1, 2}, {1, 2, 3}), ConfigError);
}

TEST_CASE("kendall tau is a metric on permutations of four") {
  const auto perms = all_permutations(4);
  for (const auto& a : perms) {
    CHECK(kendall_tau(a, a) == 0);
    for (const auto& b : perms) {
      const int d = kendall_tau(a, b);
      CHECK(d == kendall_tau(b, a));
      CHECK((d == 0) == (a == b));
      CHECK(d <= 6);
      for (const auto& c : perms) CHECK(d <= kendall_tau(a, c) + kendall_tau(c, b));
    }
  }
}

TEST_CASE("kemeny worked examples") {
  auto a = kemeny_consensus({{1, 3, 2}, {1, 2, 3}, {2, 1, 3}});
  CHECK(a.consensus == Ranking{1, 2, 3});
  CHECK(a.total_distance == 2);
  auto b = kemeny_consensus({{3, 2, 1}, {1, 2, 3}, {2, 1, 3}});
  CHECK(b.consensus == Ranking{2, 1, 3});
  auto single = kemeny_consensus({{2, 3, 1}});
  CHECK(single.consensus == Ranking{2, 3, 1});
  CHECK(single.total_distance == 0);
}

TEST_CASE("kemeny agrees with the pair-weight oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(4));
    const int m = 1 + static_cast<int>(rng.below(9));
    std::vector<Ranking> rs;
    for (int i = 0; i < m; ++i) {
      Ranking r(k);
      std::iota(r.begin(), r.end(), 1);
      rng.shuffle(r.begin(), r.end());
      rs.push_back(r);
    }
    const auto got = kemeny_consensus(rs);
    const auto [cost, rank] = pair_weight_oracle(rs);
    CHECK(got.total_distance == cost);
    CHECK(got.consensus == rank);
    for (const auto& r : rs) {
      int total = 0;
      for (const auto& s : rs) total += kendall_tau(r, s);
      CHECK(got.total_distance <= total);
    }
  }
}

TEST_CASE("kemeny input validation") {
  CHECK_THROWS_AS(kemeny_consensus({}), ConfigError);
  CHECK_THROWS_AS(kemeny_consensus({{1, 1, 2}}), ConfigError);
  CHECK_THROWS_AS(kemeny_consensus({{1, 2}, {1, 2, 3}}), ConfigError);
  Ranking nine(9);
  std::iota(nine.begin(), nine.end(), 1);
  CHECK_THROWS_AS(kemeny_consensus({nine}), UnsupportedError);
}

TEST_CASE("rank frequencies of the worked cases") {
  const std::vector<RankingCase> cases{make_ranking_case({{1, 3, 2}, {1, 2, 3}, {2, 1, 3}}),
                                       make_ranking_case({{3, 2, 1}, {1, 2, 3}, {2, 1, 3}})};
  const auto f = rank_frequencies(cases);
  CHECK(f[0] == std::vector<double>{0.5, 0.5, 0.0});
  CHECK(f[1] == std::vector<double>{0.5, 0.5, 0.0});
  CHECK(f[2] == std::vector<double>{0.0, 0.0, 1.0});
  for (const auto& row : f) CHECK(std::accumulate(row.begin(), row.end(), 0.0) == 1.0);
  const auto one = rank_frequencies({cases[0]});
  for (const auto& row : one) {
    for (double v : row) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("ranks from losses break ties by subject order") {
  CHECK(ranks_from_losses({0.3, 0.1, 0.2}) == Ranking{3, 1, 2});
  CHECK(ranks_from_losses({0.2, 0.2, 0.1}) == Ranking{2, 3, 1});
}

TEST_CASE("sample overlap example") {
  const auto rep = sample_overlap_report(overlap_example());
  REQUIRE(rep.features.size() == 2);
  CHECK(rep.features[0].overlap == 0.5);
  CHECK(rep.features[1].overlap == 0.7);
  CHECK(std::abs(rep.total - 0.35) <= 1e-12);
}

TEST_CASE("sample overlap edge cases") {
  Table t;
  t.add(Column::numeric("x", {1, 2, 3, 10, 11, 12}));
  t.add(Column::numeric("z", {1, 2, 3, 1, 2, 3}));
  t.add(Column::categorical("y", {"a", "a", "a", "b", "b", "b"}));
  const auto rep = sample_overlap_report(make_task(t, "y", TaskType::Classification));
  CHECK(rep.features[0].overlap == 0.0);
  CHECK(rep.features[1].overlap == 1.0);
  CHECK(rep.total == 0.0);

  Table three;
  three.add(Column::numeric("x", {1, 2, 3}));
  three.add(Column::categorical("y", {"a", "b", "c"}));
  CHECK_THROWS_AS(sample_overlap(make_task(three, "y", TaskType::Classification)), DataError);
}

TEST_CASE("sample overlap ignores strictly monotone transforms") {
  SynthSpec s;
  s.m = 300;
  s.separation = 1.0;
  s.seed = 5;
  const auto task = synth_classification(s);
  Task moved = task;
  std::vector<Column> cols;
  for (const auto& c : task.features.columns()) {
    if (c.is_categorical()) {
      cols.push_back(c);
      continue;
    }
    std::vector<double> v;
    for (double x : c.values) v.push_back(std::exp(x) * 3.0 - 7.0);
    cols.push_back(Column::numeric(c.name, v));
  }
  moved.features = Table(cols);
  CHECK(sample_overlap(moved) == sample_overlap(task));
}

TEST_CASE("sample overlap tracks class separation") {
  SynthSpec s;
  s.m = 2000;
  s.seed = 3;
  s.separation = 0.0;
  CHECK(sample_overlap(synth_classification(s)) > 0.95);
  s.separation = 12.0;
  CHECK(sample_overlap(synth_classification(s)) < 0.05);
}

TEST_CASE("difficulty levels") {
  CHECK(difficulty_level(0.39) == 1);
  CHECK(difficulty_level(0.54) == 2);
  CHECK(difficulty_level(0.76) == 3);
  CHECK(difficulty_level(1.0) == 4);
  CHECK(difficulty_level(0.60) == 2);
  CHECK(difficulty_level(0.0) == 1);
  CHECK(difficulty_level(0.87) == 3);
  CHECK(difficulty_level(0.89) == 4);
  CHECK(difficulty_level(0.5) == 2);
}

namespace {

SearchSpace dt_space() { return preset(ModelId::DecisionTree, 5, TaskType::Classification); }

TuneResult archive(const SearchSpace& space, bool constant) {
  TuneResult r;
  Rng rng(77);
  const auto lo = space.lower_bounds(), hi = space.upper_bounds();
  for (std::size_t i = 0; i < 60; ++i) {
    EvaluationRecord e;
    e.index = i;
    for (std::size_t j = 0; j < lo.size(); ++j) e.raw_x.push_back(rng.uniform(lo[j], hi[j]));
    e.natural_x = space.decode(e.raw_x);
    // cp (raw index 2) drives the loss.
    e.loss = constant ? 0.25 : 0.1 + 0.3 * (e.raw_x[2] > -3.0) + 0.01 * rng.uniform();
    r.records.push_back(std::move(e));
  }
  r.config.noise = true;
  return r;
}

}  // namespace

TEST_CASE("sensitivity export") {
  const auto space = dt_space();
  const auto rep = sensitivity_export(archive(space, false), space);
  CHECK(rep.parallel.size() == 60);
  CHECK(rep.parallel[0].size() == 5);
  for (const auto& row : rep.parallel) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(row[j] >= 0.0);
      CHECK(row[j] <= 1.0);
    }
  }
  REQUIRE(rep.curves.size() == 4);
  for (const auto& c : rep.curves) {
    CHECK(c.grid.size() == kSensitivityGrid);
    CHECK(c.mean.size() == kSensitivityGrid);
  }
  REQUIRE(rep.surface_pair);
  CHECK(rep.surface.size() == 21);
  for (const auto& row : rep.surface) CHECK(row.size() == 21);
  REQUIRE(!rep.tree.nodes.empty());
  CHECK(rep.tree.nodes[0].feature == 2);
  CHECK(rep.tree_rules.rfind("if cp <=", 0) == 0);

  std::ostringstream a, b, c;
  write_parallel_csv(a, rep);
  write_curves_csv(b, rep);
  write_surface_csv(c, rep);
  CHECK(a.str().rfind("minsplit,minbucket,cp,maxdepth,loss\n", 0) == 0);
  const std::string curves = b.str(), surface = c.str();
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 4 * 21);
  CHECK(std::count(surface.begin(), surface.end(), '\n') == 1 + 21 * 21);
}

TEST_CASE("constant archive gives flat sensitivity curves") {
  const auto space = dt_space();
  const auto rep = sensitivity_export(archive(space, true), space);
  for (const auto& c : rep.curves) {
    for (double v : c.mean) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
  }
  CHECK(rep.tree.split_count() == 0);
}
