#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvfbm/experiments.hpp"
#include "mvfbm/model.hpp"

namespace mvfbm::cli {

enum class Subcommand { sample_fbm, simulate, convergence, chaos, validate };

std::string_view to_string(Subcommand s) noexcept;
std::optional<Subcommand> parse_subcommand(std::string_view s) noexcept;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;  // failed validation or any other library error
inline constexpr int config = 2;
inline constexpr int divergence = 3;
inline constexpr int solver = 4;
inline constexpr int io = 5;
}  // namespace exit_code

struct RunConfig {
  Subcommand subcommand = Subcommand::simulate;
  /// Problem name, scheme settings (seed included) and ladders.
  experiments::ExperimentConfig experiment;
  // Overrides of the catalog problem.
  std::optional<double> tau;
  std::optional<double> horizon;
  std::optional<double> hurst;
  std::optional<double> q;
  // sample-fbm
  std::size_t fbm_paths = 4;
  std::size_t fbm_steps = 256;
  // validate
  std::size_t budget = 100000;
  double box_lo = -5.0;
  double box_hi = 5.0;
  // convergence: also run the moment and continuity suites
  bool suites = false;
  std::string out = ".";

  std::uint64_t seed() const noexcept { return experiment.scheme.seed; }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Flat `key = value` lines, `#` starts a comment. Throws ConfigError carrying
/// every syntax and constraint violation found.
RunConfig parse_config(std::string_view text);

/// Every field as `key=value`, in a fixed order; parse_config inverts it.
std::vector<std::pair<std::string, std::string>> config_fields(const RunConfig& config);
std::string render_config(const RunConfig& config);

/// Constraint violations of an already parsed config.
std::vector<std::string> check_config(const RunConfig& config);

/// The catalog entry with the config's overrides applied.
model::CatalogEntry resolve_problem(const RunConfig& config);

/// Executes the subcommand, writes its artifacts under config.out and
/// returns the exit status. Diagnostics go to `log`.
int run(const RunConfig& config, std::ostream& log);

}  // namespace mvfbm::cli
