#include "mvfbm/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace mvfbm {

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(fmt::format("invalid configuration: {}", fmt::join(violations, "; "))),
      violations_(std::move(violations)) {}

}  // namespace mvfbm
