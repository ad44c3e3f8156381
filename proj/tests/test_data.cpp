#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "spotune/data.hpp"
#include "spotune/errors.hpp"

using namespace spotune;

namespace {

Table parse(const std::string& text, const SchemaHints& hints = {}) {
  std::istringstream in(text);
  return read_csv(in, hints);
}

}  // namespace

TEST_CASE("csv parsing and type inference") {
  const auto t = parse(
      "id,score,colour,note\n"
      "1,0.5,red,\"a, b\"\n"
      "2,NA,blue,\"say \"\"hi\"\"\"\n"
      "3,1.5,,plain\n"
      "4,?,red,x\n");
  REQUIRE(t.rows() == 4);
  CHECK(t.column("id").type == ColumnType::Integer);
  CHECK(t.column("score").type == ColumnType::Real);
  CHECK(t.column("score").na_count() == 2);
  const auto& colour = t.column("colour");
  CHECK(colour.is_categorical());
  CHECK(colour.levels == std::vector<std::string>{"blue", "red"});
  CHECK(colour.codes == std::vector<int>{1, 0, -1, 1});
  CHECK(t.column("note").levels[0] == "a, b");
  CHECK(std::find(t.column("note").levels.begin(), t.column("note").levels.end(), "say \"hi\"") !=
        t.column("note").levels.end());

  CHECK(parse("a\n1\n2\n", {{"a", ColumnType::Categorical}}).column("a").is_categorical());
  CHECK_THROWS_AS(parse("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse("a\n\"open\n"), DataError);
  CHECK_THROWS_AS(parse("a\nx\n", {{"a", ColumnType::Real}}), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv round trip") {
  const std::string text = "x,label\n1.25,\"p,q\"\n,r\n";
  const auto t = parse(text);
  std::ostringstream out;
  write_csv(out, t);
  const auto back = parse(out.str());
  CHECK(back.column("x").values[0] == 1.25);
  CHECK(back.column("x").is_na(1));
  CHECK(back.column("label").levels == t.column("label").levels);
}

TEST_CASE("imputation") {
  Table t;
  t.add(Column::categorical("c", {"b", "a", "", "b", "a"}));
  t.add(Column::numeric("i", {4, NAN, 1, 3, 10}, true));
  t.add(Column::numeric("r", {1.0, 2.0, NAN, 4.0, NAN}));
  const auto imp = impute(t);
  // a and b tie; the lexicographically smaller label wins.
  CHECK(imp.column("c").levels[imp.column("c").codes[2]] == "a");
  // Lower median of {1, 3, 4, 10}.
  CHECK(imp.column("i").values[1] == 3.0);
  CHECK(imp.column("r").values[2] == doctest::Approx(7.0 / 3.0));
  CHECK(imp.column("r").values[4] == imp.column("r").values[2]);
  for (const auto& c : imp.columns()) CHECK(c.na_count() == 0);

  Table empty;
  empty.add(Column::numeric("z", {NAN, NAN}));
  CHECK_THROWS_AS(impute(empty), DataError);
}

TEST_CASE("dummy encoding") {
  Table t;
  t.add(Column::numeric("x", {0.5, 1.5, 2.5}));
  t.add(Column::categorical("c", {"u", "v", "u"}));
  const auto d = dummy_encode(t);
  REQUIRE(d.cols() == 3);
  CHECK(d.column(1).name == "c=u");
  CHECK(d.column(2).name == "c=v");
  CHECK(d.column("c=u").values == std::vector<double>{1, 0, 1});
  CHECK(d.column("c=v").values == std::vector<double>{0, 1, 0});
  const auto m = to_matrix(d);
  CHECK(m.rows == 3);
  CHECK(m.cols == 3);
  CHECK(m(1, 0) == 1.5);
  CHECK(m(1, 2) == 1.0);
  CHECK_THROWS_AS(to_matrix(t), DataError);
}

TEST_CASE("holdout indices") {
  for (std::size_t n : {2u, 5u, 10u, 101u}) {
    for (double f : {0.01, 0.6, 0.99}) {
      const auto h = holdout_indices(n, f, 7);
      const auto expect = std::clamp<long long>(std::llround(f * n), 1, static_cast<long long>(n) - 1);
      CHECK(h.train.size() == static_cast<std::size_t>(expect));
      CHECK(h.train.size() + h.test.size() == n);
      CHECK(std::is_sorted(h.train.begin(), h.train.end()));
      CHECK(std::is_sorted(h.test.begin(), h.test.end()));
      std::set<std::size_t> all(h.train.begin(), h.train.end());
      all.insert(h.test.begin(), h.test.end());
      CHECK(all.size() == n);
    }
  }
  CHECK(holdout_indices(50, 0.6, 3).train == holdout_indices(50, 0.6, 3).train);
  CHECK(holdout_indices(50, 0.6, 3).train != holdout_indices(50, 0.6, 4).train);
}

TEST_CASE("target discretization and task construction") {
  Table t;
  t.add(Column::numeric("x", {1, 2, 3, 4}));
  t.add(Column::numeric("y", {0.1, 0.5, 0.7, 0.5}));
  const auto d = discretize_target(t, "y", 0.5);
  const auto& y = d.column("y");
  REQUIRE(y.is_categorical());
  std::vector<std::string> labels;
  for (int c : y.codes) labels.push_back(y.levels[c]);
  CHECK(labels == std::vector<std::string>{kBelowLabel, kAtOrAboveLabel, kAtOrAboveLabel, kAtOrAboveLabel});
  const auto task = make_task(d, "y", TaskType::Classification);
  CHECK(task.features.cols() == 1);
  CHECK(task.rows() == 4);
  CHECK_THROWS_AS(make_task(t, "y", TaskType::Classification), DataError);
  CHECK_NOTHROW(make_task(t, "y", TaskType::Regression));
  CHECK_THROWS_AS(make_task(t, "nope", TaskType::Regression), DataError);
}

TEST_CASE("subsample") {
  Table t;
  std::vector<double> v(20);
  std::iota(v.begin(), v.end(), 0.0);
  t.add(Column::numeric("x", v));
  const auto s = subsample(t, 5, 1);
  CHECK(s.rows() == 5);
  std::set<double> seen(s.column("x").values.begin(), s.column("x").values.end());
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(subsample(t, 21, 1), DataError);
  CHECK_THROWS_AS(subsample(t, 0, 1), DataError);
}

TEST_CASE("synthetic classification") {
  SynthSpec spec;
  spec.m = 400;
  spec.n_numeric = 3;
  spec.n_categorical = 2;
  spec.cardinality = 5;
  spec.seed = 11;
  const auto task = synth_classification(spec);
  CHECK(task.rows() == 400);
  CHECK(task.features.cols() == 5);
  CHECK(task.features.column(0).name == "num1");
  CHECK(task.features.column(3).name == "cat1");
  CHECK(task.features.column(3).is_categorical());
  CHECK(task.target.levels == std::vector<std::string>{"class0", "class1"});
  const auto ones = std::count(task.target.codes.begin(), task.target.codes.end(), 1);
  CHECK(ones > 150);
  CHECK(ones < 250);

  // Larger separation moves the class means of a numeric feature apart.
  auto gap = [&](double sep) {
    spec.separation = sep;
    const auto t = synth_classification(spec);
    double s[2] = {0, 0};
    double n[2] = {0, 0};
    for (std::size_t i = 0; i < t.rows(); ++i) {
      s[t.target.codes[i]] += t.features.column(0).values[i];
      n[t.target.codes[i]] += 1;
    }
    return s[1] / n[1] - s[0] / n[0];
  };
  CHECK(std::abs(gap(0.0)) < 0.3);
  CHECK(gap(3.0) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(synth_classification(spec).target.codes == synth_classification(spec).target.codes);
}
