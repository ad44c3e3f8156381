#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "spotune/errors.hpp"
#include "spotune/learners.hpp"
#include "spotune/rng.hpp"

using namespace spotune;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m{rows, cols, std::vector<double>(rows * cols)};
  for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Brute-force neighbour vote with explicit Minkowski distances.
double knn_oracle(const DenseMatrix& x, const std::vector<double>& y, std::span<const double> q, int k, double p,
                  bool classify) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += std::pow(std::abs(x(i, j) - q[j]), p);
    d.push_back({std::pow(s, 1.0 / p), i});
  }
  std::sort(d.begin(), d.end());
  if (!classify) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += y[d[i].second];
    return s / k;
  }
  std::map<double, std::pair<int, std::size_t>> votes;  // class -> (count, first row index)
  for (int i = 0; i < k; ++i) {
    auto& v = votes[y[d[i].second]];
    if (v.first == 0) v.second = d[i].second;
    v.second = std::min(v.second, d[i].second);
    ++v.first;
  }
  double best = -1;
  std::pair<int, std::size_t> bv{-1, 0};
  for (const auto& [cls, v] : votes) {
    if (v.first > bv.first || (v.first == bv.first && v.second < bv.second)) {
      best = cls;
      bv = v;
    }
  }
  return best;
}

void check_constraints(const CartTree& t, const CartParams& p) {
  for (const auto& n : t.nodes) {
    CHECK(n.depth <= p.maxdepth);
    CHECK(n.n >= static_cast<std::size_t>(std::min(p.minbucket, static_cast<int>(t.nodes[0].n))));
    if (!n.is_leaf()) {
      CHECK(n.n >= static_cast<std::size_t>(p.minsplit));
      CHECK(n.improvement > p.cp * t.root_risk);
      CHECK(t.nodes[n.left].n + t.nodes[n.right].n == n.n);
      CHECK(t.nodes[n.left].n >= static_cast<std::size_t>(p.minbucket));
      CHECK(t.nodes[n.right].n >= static_cast<std::size_t>(p.minbucket));
    }
  }
}

}  // namespace

TEST_CASE("minkowski distance") {
  const std::vector<double> a{0, 0}, b{3, 4};
  CHECK(minkowski_distance(a, b, 2) == doctest::Approx(5.0));
  CHECK(minkowski_distance(a, b, 1) == doctest::Approx(7.0));
  CHECK(minkowski_distance(a, b, 0.5) == doctest::Approx(std::pow(std::sqrt(3.0) + 2.0, 2)));
}

TEST_CASE("knn agrees with brute force") {
  Rng rng(4);
  const auto x = random_matrix(60, 3, rng);
  const auto q = random_matrix(25, 3, rng);
  std::vector<double> yc(60), yr(60);
  for (std::size_t i = 0; i < 60; ++i) {
    yc[i] = static_cast<double>(rng.below(3));
    yr[i] = rng.normal();
  }
  for (int k : {1, 4, 7}) {
    for (double p : {0.5, 1.0, 2.0, 3.0}) {
      const auto pc = knn_predict(x, yc, TaskType::Classification, q, k, p);
      const auto pr = knn_predict(x, yr, TaskType::Regression, q, k, p);
      for (std::size_t i = 0; i < q.rows; ++i) {
        CHECK(pc[i] == knn_oracle(x, yc, q.row(i), k, p, true));
        CHECK(pr[i] == doctest::Approx(knn_oracle(x, yr, q.row(i), k, p, false)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("knn with k = 1 reproduces duplicate-free training labels") {
  Rng rng(9);
  const auto x = random_matrix(100, 4, rng);
  std::vector<double> y(100);
  for (auto& v : y) v = static_cast<double>(rng.below(2));
  const auto pred = knn_predict(x, y, TaskType::Classification, x, 1, 2.0);
  CHECK(pred == y);
  CHECK_THROWS_AS(knn_predict(x, y, TaskType::Classification, x, 101, 2.0), ConfigError);
}

TEST_CASE("knn ties go to the lowest training index") {
  DenseMatrix x{4, 1, {-1, 1, -2, 2}};
  std::vector<double> y{0, 1, 1, 0};
  DenseMatrix q{1, 1, {0}};
  CHECK(knn_predict(x, y, TaskType::Classification, q, 2, 2.0)[0] == 0.0);
  CHECK(knn_predict(x, y, TaskType::Classification, q, 1, 2.0)[0] == 0.0);
}

TEST_CASE("cart with cp = 1 does not split") {
  Rng rng(2);
  const auto x = random_matrix(200, 3, rng);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 0) > 0 ? 1.0 : 0.0;
  CartParams p;
  p.cp = 1.0;
  const auto t = cart_fit(x, y, TaskType::Classification, p);
  CHECK(t.split_count() == 0);
  CHECK(t.nodes.size() == 1);
  p.cp = 0.01;
  const auto s = cart_fit(x, y, TaskType::Classification, p);
  CHECK(s.split_count() >= 1);
  CHECK(s.nodes[0].feature == 0);
}

TEST_CASE("cart respects its growth constraints") {
  Rng rng(6);
  const auto x = random_matrix(300, 4, rng);
  std::vector<double> yc(300), yr(300);
  for (std::size_t i = 0; i < 300; ++i) {
    yc[i] = (x(i, 0) + 0.5 * x(i, 1) + 0.3 * rng.normal()) > 0 ? 1.0 : 0.0;
    yr[i] = std::sin(3 * x(i, 0)) + x(i, 2) * x(i, 3) + 0.1 * rng.normal();
  }
  for (const CartParams& p : {CartParams{20, 7, 0.01, 30}, CartParams{2, 1, 0.0, 3}, CartParams{50, 20, 0.001, 30},
                              CartParams{10, 3, 0.0001, 1}}) {
    const auto tc = cart_fit(x, yc, TaskType::Classification, p);
    const auto tr = cart_fit(x, yr, TaskType::Regression, p);
    check_constraints(tc, p);
    check_constraints(tr, p);
    CHECK(tc.depth() <= p.maxdepth);
  }
}

TEST_CASE("cart root split matches an exhaustive stump search") {
  Rng rng(13);
  const auto x = random_matrix(80, 2, rng);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = 2.0 * (x(i, 1) > 0.2) + 0.3 * rng.normal();
  CartParams p{2, 1, 0.0, 1};
  const auto t = cart_fit(x, y, TaskType::Regression, p);
  REQUIRE(t.split_count() == 1);

  auto sse = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0.0;
    for (double e : v) s += (e - m) * (e - m);
    return s;
  };
  double best = INFINITY;
  int best_f = -1;
  for (int f = 0; f < 2; ++f) {
    for (std::size_t s = 0; s < 80; ++s) {
      std::vector<double> l, r;
      for (std::size_t i = 0; i < 80; ++i) (x(i, f) <= x(s, f) ? l : r).push_back(y[i]);
      if (l.empty() || r.empty()) continue;
      const double v = sse(l) + sse(r);
      if (v < best) {
        best = v;
        best_f = f;
      }
    }
  }
  CHECK(t.nodes[0].feature == best_f);
  CHECK(t.nodes[0].risk - t.nodes[0].improvement == doctest::Approx(best).epsilon(1e-9));
  CHECK(t.root_risk == doctest::Approx(sse(y)).epsilon(1e-12));
}

TEST_CASE("cart predictions and rules") {
  DenseMatrix x{6, 1, {1, 2, 3, 10, 11, 12}};
  std::vector<double> y{0, 0, 0, 1, 1, 1};
  const auto t = cart_fit(x, y, TaskType::Classification, CartParams{2, 1, 0.0, 5});
  CHECK(t.split_count() == 1);
  CHECK(t.nodes[0].threshold == 6.5);
  CHECK(cart_predict(t, x) == y);
  CHECK(t.to_rules({"size"}).find("if size <= 6.5") != std::string::npos);
  // Gini * n for a 3/3 node.
  CHECK(t.root_risk == doctest::Approx(3.0));
}

TEST_CASE("learners honour cancellation") {
  Rng rng(1);
  const auto x = random_matrix(500, 3, rng);
  std::vector<double> y(500, 0.0);
  std::stop_source src;
  src.request_stop();
  CHECK_THROWS_AS(knn_predict(x, y, TaskType::Regression, x, 3, 2.0, src.get_token()), Cancelled);
  CHECK_THROWS_AS(cart_fit(x, y, TaskType::Regression, CartParams{}, src.get_token()), Cancelled);
}
