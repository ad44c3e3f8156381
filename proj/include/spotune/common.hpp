#pragma once

#include <string>
#include <string_view>

namespace spotune {

enum class TaskType { Classification, Regression };

TaskType task_type_from_string(std::string_view s);
std::string_view to_string(TaskType t);

}  // namespace spotune
