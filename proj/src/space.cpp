#include "spotune/space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "spotune/errors.hpp"

namespace spotune {

namespace {

bool is_integral(double x) { return std::isfinite(x) && std::nearbyint(x) == x; }

// base^raw, exact for integral exponents so that bounds such as 10^-10
// decode to the same double as the literal 1e-10.
double power(int base, double raw) {
  if (is_integral(raw) && std::fabs(raw) <= 22.0) {
    const int k = static_cast<int>(std::fabs(raw));
    if (base == 2) return std::ldexp(1.0, raw < 0 ? -k : k);
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= base;
    return raw < 0 ? 1.0 / p : p;
  }
  return std::pow(static_cast<double>(base), raw);
}

}  // namespace

ParamKind param_kind_from_string(std::string_view s) {
  if (s == "real" || s == "numeric" || s == "double") return ParamKind::Real;
  if (s == "integer" || s == "int") return ParamKind::Integer;
  if (s == "categorical" || s == "factor") return ParamKind::Categorical;
  throw ConfigError("unknown parameter kind '" + std::string(s) + "'");
}

std::string_view to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Real: return "real";
    case ParamKind::Integer: return "integer";
    case ParamKind::Categorical: return "categorical";
  }
  return "?";
}

Transform transform_from_string(std::string_view s) {
  if (s == "identity" || s == "id") return Transform::Identity;
  if (s == "pow10") return Transform::Pow10;
  if (s == "pow2") return Transform::Pow2;
  if (s == "pow2-round") return Transform::Pow2Round;
  throw ConfigError("unknown transform '" + std::string(s) + "'");
}

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Pow10: return "pow10";
    case Transform::Pow2: return "pow2";
    case Transform::Pow2Round: return "pow2-round";
  }
  return "?";
}

double transform_value(double raw, Transform t) {
  switch (t) {
    case Transform::Identity: return raw;
    case Transform::Pow10: return power(10, raw);
    case Transform::Pow2: return power(2, raw);
    case Transform::Pow2Round: return std::nearbyint(power(2, raw));
  }
  throw ConfigError("unknown transform id " + std::to_string(static_cast<int>(t)));
}

double ParamSpec::raw_lower() const { return kind == ParamKind::Categorical ? 0.0 : lower; }

double ParamSpec::raw_upper() const {
  return kind == ParamKind::Categorical ? static_cast<double>(levels.size()) - 1.0 : upper;
}

// ---------------------------------------------------------------------------

void Assignment::set(const std::string& name, ParamValue value) {
  for (auto& [n, v] : entries_) {
    if (n == name) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(name, std::move(value));
}

bool Assignment::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

const ParamValue& Assignment::at(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw ConfigError("assignment has no parameter '" + std::string(name) + "'");
}

double Assignment::number(std::string_view name) const {
  const auto& v = at(name);
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("parameter '" + std::string(name) + "' is categorical");
}

const std::string& Assignment::label(std::string_view name) const {
  const auto& v = at(name);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("parameter '" + std::string(name) + "' is numeric");
}

std::string format_value(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const double d = std::get<double>(v);
  std::ostringstream os;
  if (is_integral(d) && std::fabs(d) < 1e15) {
    os << static_cast<long long>(d);
  } else {
    os.precision(17);
    os << d;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

SearchSpace::SearchSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {
  std::set<std::string> seen;
  relatives_.reserve(params_.size());
  for (const auto& p : params_) {
    if (p.name.empty()) throw ConfigError("parameter with empty name");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter name '" + p.name + "'");
    if (p.kind == ParamKind::Categorical) {
      if (p.levels.empty()) throw ConfigError(p.name + ": categorical parameter without levels");
      std::set<std::string> lv(p.levels.begin(), p.levels.end());
      if (lv.size() != p.levels.size()) throw ConfigError(p.name + ": duplicate levels");
      if (p.transform != Transform::Identity)
        throw ConfigError(p.name + ": categorical parameters cannot be transformed");
      if (p.relative) throw ConfigError(p.name + ": categorical parameters cannot be relative");
    } else {
      if (!std::isfinite(p.lower) || !std::isfinite(p.upper))
        throw ConfigError(p.name + ": bounds must be finite");
      // Equal bounds are allowed and pin the parameter (e.g. mtry with one feature).
      if (p.lower > p.upper) throw ConfigError(p.name + ": lower bound exceeds upper bound");
      if (p.transform == Transform::Pow2Round && p.kind != ParamKind::Integer)
        throw ConfigError(p.name + ": pow2-round requires an integer parameter");
    }
    if (p.relative) {
      auto expr = Expression::parse(*p.relative);
      for (const auto& id : expr.identifiers()) {
        if (id == p.name) continue;
        auto it = std::find_if(params_.begin(), params_.end(),
                               [&](const ParamSpec& q) { return q.name == id; });
        if (it == params_.end() || it >= params_.begin() + static_cast<std::ptrdiff_t>(relatives_.size()))
          throw ConfigError(p.name + ": relative expression references '" + id +
                            "', which is not declared earlier");
        if (it->kind == ParamKind::Categorical)
          throw ConfigError(p.name + ": relative expression references categorical '" + id + "'");
      }
      relatives_.emplace_back(std::move(expr));
    } else {
      relatives_.emplace_back(std::nullopt);
    }
  }
}

std::optional<std::size_t> SearchSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<double> SearchSpace::lower_bounds() const {
  std::vector<double> v;
  for (const auto& p : params_) v.push_back(p.raw_lower());
  return v;
}

std::vector<double> SearchSpace::upper_bounds() const {
  std::vector<double> v;
  for (const auto& p : params_) v.push_back(p.raw_upper());
  return v;
}

std::vector<bool> SearchSpace::categorical_mask() const {
  std::vector<bool> v;
  for (const auto& p : params_) v.push_back(p.kind == ParamKind::Categorical);
  return v;
}

Assignment SearchSpace::decode(std::span<const double> raw) const {
  if (raw.size() != params_.size())
    throw DecodeError("<point>", "expected " + std::to_string(params_.size()) + " coordinates, got " +
                                     std::to_string(raw.size()));
  Assignment out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    const double x = raw[i];
    if (!std::isfinite(x)) throw DecodeError(p.name, "raw value is not finite");
    if (x < p.raw_lower() || x > p.raw_upper()) {
      std::ostringstream os;
      os.precision(17);
      os << "raw value " << x << " outside [" << p.raw_lower() << ", " << p.raw_upper() << "]";
      throw DecodeError(p.name, os.str());
    }
    if (p.kind == ParamKind::Categorical) {
      out.set(p.name, p.levels[static_cast<std::size_t>(std::nearbyint(x))]);
      continue;
    }
    double v = transform_value(x, p.transform);
    if (p.kind == ParamKind::Integer) v = std::nearbyint(v);
    if (relatives_[i]) {
      const double self = v;
      v = relatives_[i]->evaluate([&](const std::string& id) {
        return id == p.name ? self : out.number(id);
      });
      if (p.kind == ParamKind::Integer) v = std::nearbyint(v);
    }
    out.set(p.name, v);
  }
  return out;
}

Assignment SearchSpace::defaults() const {
  Assignment out;
  for (const auto& p : params_) {
    if (!p.default_value) throw ConfigError(p.name + ": no default value declared");
    out.set(p.name, *p.default_value);
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelId model_from_string(std::string_view s) {
  if (s == "knn") return ModelId::Knn;
  if (s == "en") return ModelId::ElasticNet;
  if (s == "dt") return ModelId::DecisionTree;
  if (s == "rf") return ModelId::RandomForest;
  if (s == "xgb") return ModelId::XGBoost;
  if (s == "svm") return ModelId::Svm;
  throw ConfigError("unknown model id '" + std::string(s) + "'");
}

std::string_view to_string(ModelId m) {
  switch (m) {
    case ModelId::Knn: return "knn";
    case ModelId::ElasticNet: return "en";
    case ModelId::DecisionTree: return "dt";
    case ModelId::RandomForest: return "rf";
    case ModelId::XGBoost: return "xgb";
    case ModelId::Svm: return "svm";
  }
  return "?";
}

namespace {

ParamSpec numeric(std::string name, ParamKind kind, double lo, double hi, Transform t, double def) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = kind;
  p.lower = lo;
  p.upper = hi;
  p.transform = t;
  p.default_value = def;
  return p;
}

ParamSpec factor(std::string name, std::vector<std::string> levels, std::string def) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::Categorical;
  p.levels = std::move(levels);
  p.default_value = std::move(def);
  return p;
}

}  // namespace

// Defaults follow the documented defaults of kknn, glmnet, rpart, ranger,
// xgboost (as wrapped by mlr) and e1071.
SearchSpace preset(ModelId model, int n_features, TaskType task) {
  if (n_features < 1) throw ConfigError("preset requires at least one feature");
  const double n = n_features;
  constexpr auto R = ParamKind::Real;
  constexpr auto I = ParamKind::Integer;
  constexpr auto Id = Transform::Identity;
  std::vector<ParamSpec> ps;
  switch (model) {
    case ModelId::Knn:
      ps.push_back(numeric("k", I, 1, 30, Id, 7));
      ps.push_back(numeric("p", R, -1, 2, Transform::Pow10, 2));
      break;
    case ModelId::ElasticNet:
      ps.push_back(numeric("alpha", R, 0, 1, Id, 1));
      ps.push_back(numeric("thresh", R, -8, -1, Transform::Pow10, 1e-7));
      break;
    case ModelId::DecisionTree: {
      ps.push_back(numeric("minsplit", I, 1, 300, Id, 20));
      auto mb = numeric("minbucket", R, 0.1, 0.5, Id, 7);
      mb.relative = "round(max(minsplit * minbucket, 1))";
      ps.push_back(std::move(mb));
      ps.push_back(numeric("cp", R, -10, 0, Transform::Pow10, 0.01));
      ps.push_back(numeric("maxdepth", I, 1, 30, Id, 30));
      break;
    }
    case ModelId::RandomForest:
      ps.push_back(numeric("num.trees", I, 0, 11, Transform::Pow2Round, 500));
      ps.push_back(numeric("mtry", I, 1, n, Id, std::max(1.0, std::floor(std::sqrt(n)))));
      ps.push_back(numeric("sample.fraction", R, 0.1, 1, Id, 1));
      ps.push_back(factor("replace", {"TRUE", "FALSE"}, "TRUE"));
      ps.push_back(factor("respect.unordered.factors", {"ignore", "order"}, "ignore"));
      break;
    case ModelId::XGBoost:
      ps.push_back(numeric("nrounds", I, 0, 11, Transform::Pow2Round, 1));
      ps.push_back(numeric("eta", R, -10, 0, Transform::Pow2, 0.3));
      ps.push_back(numeric("lambda", R, -10, 10, Transform::Pow2, 1));
      ps.push_back(numeric("alpha", R, -10, 10, Transform::Pow2, 0));
      ps.push_back(numeric("subsample", R, 0.1, 1, Id, 1));
      ps.push_back(numeric("colsample_bytree", R, 1.0 / n, 1, Id, 1));
      ps.push_back(numeric("gamma", R, -10, 10, Transform::Pow2, 0));
      ps.push_back(numeric("max_depth", I, 1, 15, Id, 6));
      ps.push_back(numeric("min_child_weight", R, 0, 7, Transform::Pow2, 1));
      break;
    case ModelId::Svm:
      ps.push_back(factor("kernel", {"radial", "sigmoid"}, "radial"));
      ps.push_back(numeric("gamma", R, -10, 10, Transform::Pow2, 1.0 / n));
      ps.push_back(numeric("coef0", R, -1, 1, Id, 0));
      ps.push_back(numeric("cost", R, -10, 10, Transform::Pow2, 1));
      if (task == TaskType::Regression) ps.push_back(numeric("epsilon", R, -8, 0, Transform::Pow10, 0.1));
      break;
  }
  return SearchSpace(std::move(ps));
}

Assignment heuristic_defaults(ModelId model, const DataSummary& s) {
  Assignment out;
  switch (model) {
    case ModelId::Knn:
      if (s.m && *s.m > 0) out.set("k", std::max(1.0, std::nearbyint(std::sqrt(*s.m))));
      break;
    case ModelId::RandomForest:
      if (s.n && *s.n > 0) out.set("mtry", std::floor(std::log2(*s.n) + 1.0));
      break;
    case ModelId::Svm:
      if (s.n && *s.n > 0) out.set("gamma", 1.0 / *s.n);
      if (s.y_mean && s.y_std) {
        const double a = std::fabs(*s.y_mean + 3.0 * *s.y_std);
        const double b = std::fabs(*s.y_mean - 3.0 * *s.y_std);
        out.set("cost", std::max(a, b));
      }
      // Sample count enters the epsilon rule, as in its original derivation.
      if (s.noise_std && s.m && *s.m > 1) {
        out.set("epsilon", 3.0 * *s.noise_std * std::sqrt(std::log(*s.m) / *s.m));
      }
      break;
    case ModelId::ElasticNet:
    case ModelId::DecisionTree:
    case ModelId::XGBoost:
      break;
  }
  return out;
}

}  // namespace spotune
