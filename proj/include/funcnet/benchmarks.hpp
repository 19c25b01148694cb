#pragma once

#include "funcnet/data.hpp"

#include <string_view>
#include <vector>

namespace funcnet {

/// Names of the built-in targets, in table order.
std::vector<std::string_view> benchmark_names();

/// Built-in target by name; throws ConfigError for unknown names.
/// Classification targets come without file paths.
TargetSpec benchmark_target(std::string_view name);

}  // namespace funcnet
