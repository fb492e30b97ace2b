#include "mvfbm/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mvfbm/error.hpp"

namespace mvfbm::cli {

std::string_view to_string(Subcommand s) noexcept {
  switch (s) {
    case Subcommand::sample_fbm: return "sample-fbm";
    case Subcommand::simulate: return "simulate";
    case Subcommand::convergence: return "convergence";
    case Subcommand::chaos: return "chaos";
    case Subcommand::validate: return "validate";
  }
  return "?";
}

std::optional<Subcommand> parse_subcommand(std::string_view s) noexcept {
  for (auto c : {Subcommand::sample_fbm, Subcommand::simulate, Subcommand::convergence,
                 Subcommand::chaos, Subcommand::validate}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

namespace {

using Setter = std::function<std::optional<std::string>(std::string_view, RunConfig&)>;
using Getter = std::function<std::optional<std::string>(const RunConfig&)>;

struct Field {
  std::string_view key;
  Setter set;
  Getter get;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <class U>
std::optional<U> to_unsigned(std::string_view s) {
  U v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::vector<std::size_t>> to_list(std::string_view s) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = to_unsigned<std::size_t>(trim(s.substr(0, comma)));
    if (!item) return std::nullopt;
    out.push_back(*item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

Field real(std::string_view key, double RunConfig::*member) {
  return {key,
          [key, member](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            const auto x = to_double(v);
            if (!x) return fmt::format("{}: '{}' is not a number", key, v);
            c.*member = *x;
            return std::nullopt;
          },
          [member](const RunConfig& c) { return std::optional(fmt_double(c.*member)); }};
}

template <class Get>
Field scheme_real(std::string_view key, Get ref) {
  return {key,
          [key, ref](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            const auto x = to_double(v);
            if (!x) return fmt::format("{}: '{}' is not a number", key, v);
            ref(c) = *x;
            return std::nullopt;
          },
          [ref](const RunConfig& c) {
            return std::optional(fmt_double(ref(const_cast<RunConfig&>(c))));
          }};
}

template <class U, class Get>
Field count(std::string_view key, Get ref) {
  return {key,
          [key, ref](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            const auto x = to_unsigned<U>(v);
            if (!x) return fmt::format("{}: '{}' is not a nonnegative integer", key, v);
            ref(c) = *x;
            return std::nullopt;
          },
          [ref](const RunConfig& c) {
            return std::optional(fmt::format("{}", ref(const_cast<RunConfig&>(c))));
          }};
}

template <class Get>
Field list(std::string_view key, Get ref) {
  return {key,
          [key, ref](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            const auto x = to_list(v);
            if (!x) return fmt::format("{}: '{}' is not a comma-separated list of integers", key, v);
            ref(c) = *x;
            return std::nullopt;
          },
          [ref](const RunConfig& c) {
            return std::optional(fmt::format("{}", fmt::join(ref(const_cast<RunConfig&>(c)), ",")));
          }};
}

Field override_real(std::string_view key, std::optional<double> RunConfig::*member) {
  return {key,
          [key, member](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            const auto x = to_double(v);
            if (!x) return fmt::format("{}: '{}' is not a number", key, v);
            c.*member = *x;
            return std::nullopt;
          },
          [member](const RunConfig& c) -> std::optional<std::string> {
            if (!(c.*member)) return std::nullopt;
            return fmt_double(*(c.*member));
          }};
}

template <class E, class Get>
Field enumerated(std::string_view key, Get ref, std::vector<std::pair<std::string_view, E>> opts) {
  return {key,
          [key, ref, opts](std::string_view v, RunConfig& c) -> std::optional<std::string> {
            for (const auto& [name, e] : opts) {
              if (name == v) {
                ref(c) = e;
                return std::nullopt;
              }
            }
            std::vector<std::string_view> names;
            for (const auto& o : opts) names.push_back(o.first);
            return fmt::format("{}: '{}' is not one of {}", key, v, fmt::join(names, ", "));
          },
          [ref, opts](const RunConfig& c) -> std::optional<std::string> {
            const E e = ref(const_cast<RunConfig&>(c));
            for (const auto& [name, value] : opts) {
              if (value == e) return std::string(name);
            }
            return std::nullopt;
          }};
}

const std::vector<Field>& fields() {
  using Sub = Subcommand;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(enumerated<Sub>("subcommand", [](RunConfig& c) -> Sub& { return c.subcommand; },
                                {{"sample-fbm", Sub::sample_fbm},
                                 {"simulate", Sub::simulate},
                                 {"convergence", Sub::convergence},
                                 {"chaos", Sub::chaos},
                                 {"validate", Sub::validate}}));
    f.push_back({"problem",
                 [](std::string_view v, RunConfig& c) -> std::optional<std::string> {
                   c.experiment.problem = std::string(v);
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return std::optional(c.experiment.problem); }});
    f.push_back(count<std::uint64_t>(
        "seed", [](RunConfig& c) -> std::uint64_t& { return c.experiment.scheme.seed; }));
    f.push_back(scheme_real("theta", [](RunConfig& c) -> double& { return c.experiment.scheme.theta; }));
    f.push_back(scheme_real("alpha", [](RunConfig& c) -> double& { return c.experiment.scheme.alpha; }));
    f.push_back(count<std::size_t>("m", [](RunConfig& c) -> std::size_t& { return c.experiment.scheme.m; }));
    f.push_back(count<std::size_t>(
        "N", [](RunConfig& c) -> std::size_t& { return c.experiment.scheme.n_particles; }));
    f.push_back(scheme_real("picard_tol",
                            [](RunConfig& c) -> double& { return c.experiment.scheme.picard_tol; }));
    f.push_back(count<std::size_t>(
        "picard_max_iters",
        [](RunConfig& c) -> std::size_t& { return c.experiment.scheme.picard_max_iters; }));
    f.push_back(enumerated<Exec>("exec", [](RunConfig& c) -> Exec& { return c.experiment.scheme.exec; },
                                 {{"serial", Exec::serial}, {"parallel", Exec::parallel}}));
    f.push_back(enumerated<scheme::DriverGenerator>(
        "generator",
        [](RunConfig& c) -> scheme::DriverGenerator& { return c.experiment.scheme.generator; },
        {{"circulant", scheme::DriverGenerator::circulant},
         {"cholesky", scheme::DriverGenerator::cholesky}}));
    f.push_back(enumerated<bool>("taming", [](RunConfig& c) -> bool& { return c.experiment.scheme.taming; },
                                 {{"true", true}, {"false", false}}));
    f.push_back(list("m_ladder", [](RunConfig& c) -> std::vector<std::size_t>& {
      return c.experiment.m_ladder;
    }));
    f.push_back(count<std::size_t>("m_ref", [](RunConfig& c) -> std::size_t& { return c.experiment.m_ref; }));
    f.push_back(list("N_ladder", [](RunConfig& c) -> std::vector<std::size_t>& {
      return c.experiment.n_ladder;
    }));
    f.push_back(count<std::size_t>("N_ref", [](RunConfig& c) -> std::size_t& { return c.experiment.n_ref; }));
    f.push_back(count<std::size_t>("n_mc", [](RunConfig& c) -> std::size_t& { return c.experiment.n_mc; }));
    f.push_back(scheme_real("p", [](RunConfig& c) -> double& { return c.experiment.p; }));
    f.push_back(override_real("tau", &RunConfig::tau));
    f.push_back(override_real("T", &RunConfig::horizon));
    f.push_back(override_real("H", &RunConfig::hurst));
    f.push_back(override_real("q", &RunConfig::q));
    f.push_back(count<std::size_t>("fbm_paths", [](RunConfig& c) -> std::size_t& { return c.fbm_paths; }));
    f.push_back(count<std::size_t>("fbm_steps", [](RunConfig& c) -> std::size_t& { return c.fbm_steps; }));
    f.push_back(count<std::size_t>("budget", [](RunConfig& c) -> std::size_t& { return c.budget; }));
    f.push_back(real("box_lo", &RunConfig::box_lo));
    f.push_back(real("box_hi", &RunConfig::box_hi));
    f.push_back(enumerated<bool>("suites", [](RunConfig& c) -> bool& { return c.suites; },
                                 {{"true", true}, {"false", false}}));
    f.push_back({"out",
                 [](std::string_view v, RunConfig& c) -> std::optional<std::string> {
                   if (v.empty()) return "out: empty path";
                   c.out = std::string(v);
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return std::optional(c.out); }});
    return f;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::vector<std::string> bad;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      bad.push_back(fmt::format("line {}: expected key=value, got '{}'", line_no, line));
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = std::find_if(fields().begin(), fields().end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == fields().end()) {
      bad.push_back(fmt::format("line {}: unknown key '{}'", line_no, key));
      continue;
    }
    if (!seen.emplace(key).second) {
      bad.push_back(fmt::format("line {}: duplicate key '{}'", line_no, key));
      continue;
    }
    if (auto err = it->set(value, config)) bad.push_back(fmt::format("line {}: {}", line_no, *err));
  }
  for (auto& v : check_config(config)) bad.push_back(std::move(v));
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return config;
}

std::vector<std::pair<std::string, std::string>> config_fields(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) {
    if (auto v = f.get(config)) out.emplace_back(std::string(f.key), std::move(*v));
  }
  return out;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_fields(config)) out += fmt::format("{}={}\n", k, v);
  return out;
}

model::CatalogEntry resolve_problem(const RunConfig& config) {
  auto entry = model::find_problem(config.experiment.problem);
  std::vector<std::string> bad;
  if (config.tau) {
    if (*config.tau > 0.0) entry.problem.tau = *config.tau;
    else bad.push_back("tau must be positive");
  }
  if (config.horizon) {
    if (*config.horizon > 0.0) entry.problem.horizon = *config.horizon;
    else bad.push_back("T must be positive");
  }
  if (config.hurst) {
    try {
      entry.problem.hurst = fbm::HurstParam(*config.hurst);
    } catch (const DomainError&) {
      bad.push_back("H must lie in [0.5, 1)");
    }
  }
  if (config.q) {
    try {
      entry.problem.q = measure::WassersteinOrder(*config.q);
    } catch (const DomainError&) {
      bad.push_back("q must be >= 1");
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return entry;
}

std::vector<std::string> check_config(const RunConfig& config) {
  std::vector<std::string> bad;
  try {
    const auto entry = resolve_problem(config);
    bad = config.experiment.violations(entry.problem);
  } catch (const ConfigError& e) {
    bad = e.violations();
    // Still report the scheme fields, checked against the default problem.
    RunConfig fallback = config;
    fallback.experiment.problem = experiments::ExperimentConfig{}.problem;
    try {
      for (auto& v : fallback.experiment.violations(resolve_problem(fallback).problem)) {
        bad.push_back(std::move(v));
      }
    } catch (const ConfigError&) {
    }
  }
  if (config.fbm_paths < 1) bad.push_back("fbm_paths must be >= 1");
  if (config.fbm_steps < 1) bad.push_back("fbm_steps must be >= 1");
  if (config.budget < 1) bad.push_back("budget must be >= 1");
  if (!(config.box_lo < config.box_hi)) bad.push_back("box_lo must be below box_hi");
  return bad;
}

}  // namespace mvfbm::cli
