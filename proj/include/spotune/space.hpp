#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "spotune/common.hpp"
#include "spotune/expr.hpp"

namespace spotune {

enum class ParamKind { Real, Integer, Categorical };

// Map from the tuner-visible (raw) scale to the natural scale of a parameter.
enum class Transform { Identity, Pow10, Pow2, Pow2Round };

ParamKind param_kind_from_string(std::string_view s);
std::string_view to_string(ParamKind k);
// Accepts "identity", "pow10", "pow2", "pow2-round". Throws ConfigError otherwise.
Transform transform_from_string(std::string_view s);
std::string_view to_string(Transform t);

// Natural-scale value of a parameter: numbers for real/integer kinds, level
// labels for categorical ones.
using ParamValue = std::variant<double, std::string>;

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Real;
  double lower = 0.0;  // raw scale
  double upper = 0.0;  // raw scale
  std::vector<std::string> levels;
  Transform transform = Transform::Identity;
  // Evaluated after transformation. May reference this parameter (its
  // transformed value) and any parameter declared before it.
  std::optional<std::string> relative;
  // Natural-scale default used by the defaults baseline. Not bound-checked.
  std::optional<ParamValue> default_value;

  // Raw box of the parameter; categoricals use the level index range.
  double raw_lower() const;
  double raw_upper() const;
};

// Ordered name -> value mapping produced by decoding a raw point.
class Assignment {
 public:
  using Entry = std::pair<std::string, ParamValue>;

  void set(const std::string& name, ParamValue value);
  bool contains(std::string_view name) const;
  const ParamValue& at(std::string_view name) const;
  // Throws ConfigError if missing or categorical.
  double number(std::string_view name) const;
  const std::string& label(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const Assignment&) const = default;

 private:
  std::vector<Entry> entries_;
};

std::string format_value(const ParamValue& v);

class SearchSpace {
 public:
  SearchSpace() = default;
  // Validates every ParamSpec invariant; throws ConfigError.
  explicit SearchSpace(std::vector<ParamSpec> params);

  std::size_t dimension() const { return params_.size(); }
  const std::vector<ParamSpec>& params() const { return params_; }
  const ParamSpec& param(std::size_t i) const { return params_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::vector<double> lower_bounds() const;
  std::vector<double> upper_bounds() const;
  std::vector<bool> categorical_mask() const;

  // Throws DecodeError naming the offending parameter.
  Assignment decode(std::span<const double> raw) const;

  // Natural-scale defaults for every parameter; throws ConfigError if any
  // parameter has none.
  Assignment defaults() const;

 private:
  std::vector<ParamSpec> params_;
  std::vector<std::optional<Expression>> relatives_;
};

double transform_value(double raw, Transform t);

inline Assignment decode_point(const SearchSpace& space, std::span<const double> raw) {
  return space.decode(raw);
}

enum class ModelId { Knn, ElasticNet, DecisionTree, RandomForest, XGBoost, Svm };

// "knn", "en", "dt", "rf", "xgb", "svm".
ModelId model_from_string(std::string_view s);
std::string_view to_string(ModelId m);

// Search spaces of the six benchmark models with documented defaults.
SearchSpace preset(ModelId model, int n_features, TaskType task);

struct DataSummary {
  std::optional<double> m;  // observations
  std::optional<double> n;  // features
  std::optional<double> y_mean;
  std::optional<double> y_std;
  std::optional<double> noise_std;
};

// Rule-of-thumb settings from the literature, natural scale. Parameters whose
// inputs are missing from the summary are omitted.
Assignment heuristic_defaults(ModelId model, const DataSummary& summary);

}  // namespace spotune
