#include "spotune/common.hpp"

#include "spotune/errors.hpp"

namespace spotune {

TaskType task_type_from_string(std::string_view s) {
  if (s == "classification" || s == "classif") return TaskType::Classification;
  if (s == "regression" || s == "regr") return TaskType::Regression;
  throw ConfigError("unknown task type '" + std::string(s) + "'");
}

std::string_view to_string(TaskType t) {
  return t == TaskType::Classification ? "classification" : "regression";
}

}  // namespace spotune
