#pragma once

#include <string_view>

namespace mvfbm {

// Selects between the serial reference kernels and their OpenMP variants.
// Both produce bit-identical results; reductions that feed the empirical
// measure are always evaluated serially in a fixed order.
enum class Exec { serial, parallel };

constexpr std::string_view to_string(Exec e) noexcept {
  return e == Exec::serial ? "serial" : "parallel";
}

}  // namespace mvfbm
