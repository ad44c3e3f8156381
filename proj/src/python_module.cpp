#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <chrono>
#include <fstream>

#include "spotune/analysis.hpp"
#include "spotune/commands.hpp"
#include "spotune/errors.hpp"
#include "spotune/kriging.hpp"
#include "spotune/space.hpp"
#include "spotune/tuner.hpp"

namespace py = pybind11;
using namespace spotune;

namespace {

py::object to_py(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return py::float_(*d);
  return py::str(std::get<std::string>(v));
}

py::dict to_py(const Assignment& a) {
  py::dict d;
  for (const auto& [name, value] : a) d[py::str(name)] = to_py(value);
  return d;
}

SearchSpace space_from_json(const std::string& text) {
  const auto j = cli::json::parse(text);
  std::vector<ParamSpec> params;
  for (const auto& p : j) params.push_back(cli::param_from_json(p));
  return SearchSpace(std::move(params));
}

std::string space_to_json(const SearchSpace& space) {
  cli::json j = cli::json::array();
  for (const auto& p : space.params()) j.push_back(cli::param_to_json(p));
  return j.dump();
}

py::dict record_to_py(const EvaluationRecord& r) {
  py::dict d;
  d["index"] = r.index;
  d["origin"] = r.origin;
  d["raw_x"] = r.raw_x;
  d["x"] = to_py(r.natural_x);
  d["loss"] = r.loss;
  d["status"] = std::string(to_string(r.status));
  d["total_time"] = r.total_time;
  d["eval_seed"] = r.eval_seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_spotune, m) {
  m.doc() = "Surrogate-model based hyperparameter tuning.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  py::class_<SearchSpace>(m, "SearchSpace")
      .def(py::init(&space_from_json), py::arg("params_json"))
      .def_property_readonly("names",
                             [](const SearchSpace& s) {
                               std::vector<std::string> names;
                               for (const auto& p : s.params()) names.push_back(p.name);
                               return names;
                             })
      .def_property_readonly("dimension", &SearchSpace::dimension)
      .def("lower_bounds", &SearchSpace::lower_bounds)
      .def("upper_bounds", &SearchSpace::upper_bounds)
      .def("decode", [](const SearchSpace& s, const std::vector<double>& raw) { return to_py(s.decode(raw)); })
      .def("defaults", [](const SearchSpace& s) { return to_py(s.defaults()); })
      .def("to_json", &space_to_json);

  m.def(
      "preset",
      [](const std::string& model, int n_features, const std::string& task) {
        return preset(model_from_string(model), n_features, task_type_from_string(task));
      },
      py::arg("model"), py::arg("n_features"), py::arg("task") = "classification");

  m.def("kendall_tau", &kendall_tau, py::arg("r1"), py::arg("r2"));
  m.def(
      "kemeny_consensus",
      [](const std::vector<Ranking>& rankings) {
        const auto c = kemeny_consensus(rankings);
        return py::make_tuple(c.consensus, c.total_distance);
      },
      py::arg("rankings"));
  m.def(
      "rank_frequencies",
      [](const std::vector<std::vector<Ranking>>& cases) {
        std::vector<RankingCase> built;
        for (const auto& c : cases) built.push_back(make_ranking_case(c));
        return rank_frequencies(built);
      },
      py::arg("cases"));
  m.def("ranks_from_losses", &ranks_from_losses, py::arg("losses"));
  m.def(
      "sample_overlap",
      [](const std::string& csv, const std::string& target) {
        const auto rep = sample_overlap_report(make_task(load_csv(csv), target, TaskType::Classification));
        py::dict features;
        for (const auto& f : rep.features) features[py::str(f.feature)] = f.overlap;
        return py::make_tuple(rep.total, features);
      },
      py::arg("csv_path"), py::arg("target"));
  m.def("difficulty_level", &difficulty_level, py::arg("overlap"));

  py::class_<KrigingModel>(m, "Kriging")
      .def(py::init([](const std::vector<std::vector<double>>& x, const std::vector<double>& y, bool nugget,
                       std::uint64_t seed) {
             KrigingConfig cfg;
             cfg.use_lambda = nugget;
             cfg.seed = seed;
             return fit_kriging(x, y, cfg);
           }),
           py::arg("x"), py::arg("y"), py::arg("nugget") = true, py::arg("seed") = 0)
      .def("predict",
           [](const KrigingModel& k, const std::vector<double>& x) {
             const auto p = k.predict(x);
             return py::make_tuple(p.mean, p.variance);
           })
      .def("reinterpolate", [](const KrigingModel& k) { return reinterpolate(k); })
      .def_property_readonly("theta", &KrigingModel::theta)
      .def_property_readonly("nugget", &KrigingModel::lambda)
      .def_property_readonly("log_likelihood", &KrigingModel::log_likelihood);

  m.def(
      "tune",
      [](const py::function& fn, const SearchSpace& space, const std::string& strategy, double max_time,
         std::optional<std::size_t> max_evals, std::uint64_t seed) {
        TunerConfig cfg;
        cfg.max_time = max_time;
        cfg.max_evals = max_evals;
        cfg.seed_tuner = seed;
        const Objective objective = [&](const Assignment& a, const EvalRequest&) {
          const auto t0 = std::chrono::steady_clock::now();
          EvalOutcome out;
          out.loss = fn(to_py(a)).cast<double>();
          out.total_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          return out;
        };
        const auto s = strategy_from_string(strategy);
        cfg.validate(s);
        const auto result = run_strategy(s, objective, space, cfg);
        py::list records;
        for (const auto& r : result.records) records.append(record_to_py(r));
        py::dict out;
        out["y_best"] = result.y_best;
        out["x_best"] = to_py(result.x_best_natural);
        out["best_index"] = result.best_index;
        out["records"] = records;
        return out;
      },
      py::arg("objective"), py::arg("space"), py::arg("strategy") = "spot", py::arg("max_time") = 60.0,
      py::arg("max_evals") = std::nullopt, py::arg("seed") = 1);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "spotune");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));

  m.attr("__version__") = "0.1.0";
}
