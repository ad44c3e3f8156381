#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spotune/errors.hpp"
#include "spotune/expr.hpp"
#include "spotune/space.hpp"

using namespace spotune;

namespace {

ParamSpec real(std::string name, double lo, double hi, Transform t = Transform::Identity) {
  ParamSpec p;
  p.name = std::move(name);
  p.lower = lo;
  p.upper = hi;
  p.transform = t;
  return p;
}

ParamSpec integer(std::string name, double lo, double hi, Transform t = Transform::Identity) {
  auto p = real(std::move(name), lo, hi, t);
  p.kind = ParamKind::Integer;
  return p;
}

}  // namespace

TEST_CASE("expression grammar") {
  auto e = Expression::parse("round(max(minsplit * minbucket, 1))");
  auto lookup = [](std::string_view n) -> double { return n == "minsplit" ? 20.0 : 0.35; };
  CHECK(e.evaluate(lookup) == 7.0);
  CHECK(Expression::parse("-(2 + 3) * 4 / 2").evaluate([](std::string_view) { return 0.0; }) == -10.0);
  CHECK(Expression::parse("min(3, 1 - 4)").evaluate([](std::string_view) { return 0.0; }) == -3.0);
  // Half-to-even, like R's round().
  CHECK(Expression::parse("round(2.5)").evaluate([](std::string_view) { return 0.0; }) == 2.0);
  CHECK(Expression::parse("a * b + a").identifiers() == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(Expression::parse("1 +"), ConfigError);
  CHECK_THROWS_AS(Expression::parse("foo(1)"), ConfigError);
  CHECK_THROWS_AS(Expression::parse("(1"), ConfigError);
}

TEST_CASE("transforms") {
  CHECK(transform_value(3.0, Transform::Identity) == 3.0);
  CHECK(transform_value(-10.0, Transform::Pow10) == 1e-10);
  CHECK(transform_value(2.0, Transform::Pow10) == 100.0);
  CHECK(transform_value(-1.0, Transform::Pow2) == 0.5);
  CHECK(transform_value(11.0, Transform::Pow2Round) == 2048.0);
  CHECK(transform_value(0.4, Transform::Pow2Round) == 1.0);
  CHECK(transform_value(3.6, Transform::Pow2Round) == std::nearbyint(std::pow(2.0, 3.6)));
  CHECK(transform_value(0.5, Transform::Pow10) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-15));
}

TEST_CASE("decode numeric, integer and categorical") {
  ParamSpec cat;
  cat.name = "kernel";
  cat.kind = ParamKind::Categorical;
  cat.levels = {"radial", "sigmoid"};
  SearchSpace s({integer("k", 1, 30), real("p", -1, 2, Transform::Pow10), cat});
  CHECK(s.dimension() == 3);
  CHECK(s.upper_bounds() == std::vector<double>{30, 2, 1});
  CHECK(s.categorical_mask() == std::vector<bool>{false, false, true});

  const std::vector<double> raw{7.5, 0.0, 0.6};
  auto a = s.decode(raw);
  CHECK(a.number("k") == 8.0);  // nearest even
  CHECK(a.number("p") == 1.0);
  CHECK(a.label("kernel") == "sigmoid");
  CHECK(s.decode(std::vector<double>{6.5, 0, 0.4}).number("k") == 6.0);
  CHECK(s.decode(std::vector<double>{1, 0, 0.4}).label("kernel") == "radial");
}

TEST_CASE("decode errors name the parameter") {
  SearchSpace s({integer("k", 1, 30), real("p", -1, 2)});
  CHECK_THROWS_AS(s.decode(std::vector<double>{1.0}), DecodeError);
  try {
    s.decode(std::vector<double>{5, 2.5});
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(e.param() == "p");
  }
  CHECK_THROWS_AS(s.decode(std::vector<double>{NAN, 0}), DecodeError);
}

TEST_CASE("relative parameter") {
  auto mb = real("minbucket", 0.1, 0.5);
  mb.relative = "round(max(minsplit * minbucket, 1))";
  SearchSpace s({integer("minsplit", 1, 300), mb});
  CHECK(s.decode(std::vector<double>{300, 0.5}).number("minbucket") == 150.0);
  CHECK(s.decode(std::vector<double>{1, 0.1}).number("minbucket") == 1.0);
  CHECK(s.decode(std::vector<double>{20, 0.35}).number("minbucket") == 7.0);

  // Forward references are rejected.
  auto bad = real("a", 0, 1);
  bad.relative = "b * a";
  CHECK_THROWS_AS(SearchSpace({bad, real("b", 0, 1)}), ConfigError);
}

TEST_CASE("space validation") {
  CHECK_THROWS_AS(SearchSpace({real("a", 0, 1), real("a", 0, 1)}), ConfigError);
  CHECK_THROWS_AS(SearchSpace({real("a", 2, 1)}), ConfigError);
  CHECK_THROWS_AS(SearchSpace({real("a", 0, INFINITY)}), ConfigError);
  CHECK_THROWS_AS(SearchSpace({real("a", 0, 4, Transform::Pow2Round)}), ConfigError);
  ParamSpec cat;
  cat.name = "c";
  cat.kind = ParamKind::Categorical;
  CHECK_THROWS_AS(SearchSpace({cat}), ConfigError);
  cat.levels = {"x", "x"};
  CHECK_THROWS_AS(SearchSpace({cat}), ConfigError);
  CHECK_THROWS_AS(transform_from_string("log"), ConfigError);
  // A degenerate interval is a fixed parameter.
  SearchSpace fixed({real("a", 5, 5)});
  CHECK(fixed.decode(std::vector<double>{5.0}).number("a") == 5.0);
}

TEST_CASE("presets decode to their natural bounds") {
  const int n = 9;
  auto bounds = [](const SearchSpace& s, const std::string& name) {
    auto lo = s.lower_bounds(), hi = s.upper_bounds();
    return std::pair{s.decode(lo).at(name), s.decode(hi).at(name)};
  };
  auto num = [](const ParamValue& v) { return std::get<double>(v); };

  auto dt = preset(ModelId::DecisionTree, n, TaskType::Classification);
  CHECK(num(bounds(dt, "cp").first) == 1e-10);
  CHECK(num(bounds(dt, "cp").second) == 1.0);
  CHECK(num(bounds(dt, "minbucket").second) == 150.0);
  CHECK(num(bounds(dt, "minbucket").first) == 1.0);

  auto xgb = preset(ModelId::XGBoost, n, TaskType::Regression);
  CHECK(xgb.dimension() == 9);
  CHECK(num(bounds(xgb, "nrounds").first) == 1.0);
  CHECK(num(bounds(xgb, "nrounds").second) == 2048.0);
  CHECK(num(bounds(xgb, "eta").first) == std::ldexp(1.0, -10));
  CHECK(num(bounds(xgb, "colsample_bytree").first) == 1.0 / n);

  auto rf = preset(ModelId::RandomForest, n, TaskType::Classification);
  CHECK(num(bounds(rf, "mtry").second) == n);
  CHECK(std::get<std::string>(bounds(rf, "replace").first) == "TRUE");

  CHECK(preset(ModelId::Svm, n, TaskType::Classification).dimension() == 4);
  CHECK(preset(ModelId::Svm, n, TaskType::Regression).dimension() == 5);
  CHECK(preset(ModelId::Knn, n, TaskType::Classification).dimension() == 2);
  CHECK(preset(ModelId::ElasticNet, n, TaskType::Classification).dimension() == 2);
}

TEST_CASE("preset defaults") {
  auto d = preset(ModelId::DecisionTree, 5, TaskType::Classification).defaults();
  CHECK(d.number("minsplit") == 20.0);
  CHECK(d.number("minbucket") == 7.0);
  CHECK(d.number("cp") == 0.01);
  CHECK(d.number("maxdepth") == 30.0);
  auto rf = preset(ModelId::RandomForest, 10, TaskType::Classification).defaults();
  CHECK(rf.number("mtry") == 3.0);
  CHECK(rf.number("num.trees") == 500.0);
  SearchSpace nodef({real("a", 0, 1)});
  CHECK_THROWS_AS(nodef.defaults(), ConfigError);
}

TEST_CASE("heuristic defaults") {
  DataSummary s;
  s.m = 1000;
  s.n = 8;
  s.y_mean = 2.0;
  s.y_std = 1.0;
  s.noise_std = 0.5;
  CHECK(heuristic_defaults(ModelId::Knn, s).number("k") == std::nearbyint(std::sqrt(1000.0)));
  CHECK(heuristic_defaults(ModelId::RandomForest, s).number("mtry") == 4.0);  // floor(log2 8 + 1)
  auto svm = heuristic_defaults(ModelId::Svm, s);
  CHECK(svm.number("gamma") == 1.0 / 8);
  CHECK(svm.number("cost") == 5.0);
  CHECK(svm.number("epsilon") == doctest::Approx(3 * 0.5 * std::sqrt(std::log(1000.0) / 1000.0)));
  CHECK(heuristic_defaults(ModelId::Knn, DataSummary{}).empty());
}

TEST_CASE("format_value") {
  CHECK(format_value(ParamValue{20.0}) == "20");
  CHECK(format_value(ParamValue{std::string("radial")}) == "radial");
  CHECK(format_value(ParamValue{0.1}) == "0.10000000000000001");
}
