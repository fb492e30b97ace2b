#include <filesystem>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"
#include "mvfbm/config.hpp"
#include "mvfbm/error.hpp"
#include "mvfbm/experiments.hpp"
#include "mvfbm/fbm.hpp"
#include "mvfbm/scheme.hpp"

namespace mvfbm::cli {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string header_line(const RunConfig& config) {
  std::vector<std::string> kv;
  for (const auto& [k, v] : config_fields(config)) kv.push_back(fmt::format("{}={}", k, v));
  return fmt::format("# mvfbm {} {}\n", to_string(config.subcommand), fmt::join(kv, " "));
}

ordered_json config_json(const RunConfig& config) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : config_fields(config)) j[k] = v;
  return j;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  f << body;
  f.close();
  if (!f) throw IoError(fmt::format("failed writing {}", path.string()));
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

std::string table_csv(const RunConfig& config, const experiments::ErrorTable& table) {
  std::string out = header_line(config);
  out += "param,error,stderr,n_mc\n";
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{}\n", g17(r.param), g17(r.error), g17(r.stderr_), r.n_mc);
  }
  return out;
}

ordered_json table_json(const experiments::ErrorTable& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{table.param_name, r.param},
                    {"error", r.error},
                    {"stderr", r.stderr_},
                    {"n_mc", r.n_mc},
                    {"n_failed", r.n_failed}});
  }
  return rows;
}

ordered_json fit_json(const experiments::RateEstimate& e, bool fitted) {
  if (!fitted) return nullptr;
  return {{"slope", e.slope}, {"intercept", e.intercept}, {"r2", e.r2}, {"rows", e.n_rows}};
}

ordered_json summary(const RunConfig& config) {
  ordered_json j;
  j["subcommand"] = std::string(to_string(config.subcommand));
  j["seed"] = config.seed();
  j["config"] = config_json(config);
  return j;
}

void run_sample_fbm(const RunConfig& config, const model::Problem& problem, std::ostream& log) {
  const fbm::TimeGrid grid(problem.horizon / static_cast<double>(config.fbm_steps),
                           config.fbm_steps);
  const auto sample = fbm::sample_fbm_fast(grid, problem.hurst, config.seed(), config.fbm_paths,
                                           config.experiment.scheme.exec);
  std::string out = header_line(config);
  out += "t";
  for (std::size_t i = 0; i < sample.paths.size(); ++i) out += fmt::format(",path_{}", i);
  out += "\n";
  for (std::size_t k = 0; k < grid.n_points(); ++k) {
    out += g17(grid.t(k));
    for (const auto& p : sample.paths) out += "," + g17(p.values[k]);
    out += "\n";
  }
  write_file(fs::path(config.out) / "fbm.csv", out);
  if (sample.used_fallback) log << "circulant embedding not positive; used Cholesky fallback\n";
  log << fmt::format("wrote {} paths of {} steps (H = {})\n", config.fbm_paths,
                     config.fbm_steps, problem.hurst.value());
}

void run_simulate(const RunConfig& config, const model::Problem& problem, std::ostream& log) {
  const auto sim = scheme::simulate(problem, config.experiment.scheme);
  std::string out = header_line(config);
  out += "k,t,particle,dim,value\n";
  for (std::size_t k = 0; k <= sim.n_steps(); ++k) {
    const std::string t = g17(static_cast<double>(k) * sim.delta());
    for (std::size_t i = 0; i < sim.n_particles; ++i) {
      for (std::size_t c = 0; c < sim.d; ++c) {
        out += fmt::format("{},{},{},{},{}\n", k, t, i, c, g17(sim.value(k, i, c)));
      }
    }
  }
  write_file(fs::path(config.out) / "trajectory.csv", out);

  auto j = summary(config);
  j["delta"] = sim.delta();
  j["steps"] = sim.n_steps();
  j["picard"] = {{"total_iterations", sim.picard.total_iterations},
                 {"max_iterations", sim.picard.max_iterations},
                 {"max_residual", sim.picard.max_residual},
                 {"min_damping", sim.picard.min_damping}};
  j["warnings"] = sim.warnings;
  write_file(fs::path(config.out) / "simulate.json", j.dump(2) + "\n");
  for (const auto& w : sim.warnings) log << "warning: " << w << "\n";
  log << fmt::format("simulated {} particles over {} steps (Delta = {})\n", sim.n_particles,
                     sim.n_steps(), sim.delta());
}

void run_rate(const RunConfig& config, const model::Problem& problem, std::ostream& log,
              bool chaos) {
  const auto res = chaos ? experiments::poc_rate_vs_N(problem, config.experiment)
                         : experiments::strong_rate_vs_dt(problem, config.experiment);
  const std::string stem = chaos ? "chaos" : "convergence";
  write_file(fs::path(config.out) / (stem + ".csv"), table_csv(config, res.table));

  auto j = summary(config);
  j["fit"] = fit_json(res.rate, res.fitted);
  j["table"] = table_json(res.table);
  j["notes"] = res.table.notes;

  if (!chaos && config.suites) {
    const auto mom = experiments::moment_bound_suite(problem, config.experiment);
    write_file(fs::path(config.out) / "moments.csv", table_csv(config, mom.table));
    j["moments"] = {{"spread", mom.spread},
                    {"upward_trend", mom.upward_trend},
                    {"passed", mom.passed()},
                    {"table", table_json(mom.table)}};
    const auto cont = experiments::continuity_modulus_suite(problem, config.experiment);
    write_file(fs::path(config.out) / "continuity.csv", table_csv(config, cont.table));
    j["continuity"] = {{"fit", fit_json(cont.rate, cont.fitted)},
                       {"target", cont.target},
                       {"tolerance", cont.tolerance},
                       {"passed", cont.passed()},
                       {"table", table_json(cont.table)},
                       {"max_inside_fit", fit_json(cont.max_inside_rate, cont.max_inside_fitted)},
                       {"max_inside_table", table_json(cont.max_inside)}};
  }
  write_file(fs::path(config.out) / (stem + ".json"), j.dump(2) + "\n");

  for (const auto& r : res.table.rows) {
    log << fmt::format("{} = {:<10g} error {:.6g} +- {:.2g}{}\n", res.table.param_name, r.param,
                       r.error, r.stderr_, r.flagged() ? " (flagged)" : "");
  }
  if (res.fitted) {
    log << fmt::format("slope {:.4f}  intercept {:.4f}  R^2 {:.4f}\n", res.rate.slope,
                       res.rate.intercept, res.rate.r2);
  }
  for (const auto& n : res.table.notes) log << "note: " << n << "\n";
}

int run_validate(const RunConfig& config, const model::CatalogEntry& entry, std::ostream& log) {
  model::ScanOptions scan;
  scan.budget = config.budget;
  scan.box_lo = config.box_lo;
  scan.box_hi = config.box_hi;
  scan.seed = config.seed();
  scan.exec = config.experiment.scheme.exec;
  const auto reports = model::validate_all(entry.problem, entry.constants, scan);

  std::string out = header_line(config);
  out += "check,inequality,declared,observed,passed,samples\n";
  bool ok = true;
  for (const auto& rep : reports) {
    ok = ok && rep.passed();
    log << fmt::format("{:<38} {}\n", rep.check, rep.passed() ? "PASS" : "FAIL");
    for (const auto& r : rep.inequalities) {
      out += fmt::format("\"{}\",\"{}\",{},{},{},{}\n", rep.check, r.name, g17(r.declared),
                         g17(r.observed), r.passed ? "true" : "false", rep.samples);
      log << fmt::format("    {:<6} observed {:<12.6g} declared {:<8g} {}\n",
                         r.passed ? "ok" : "FAIL", r.observed, r.declared, r.name);
      if (!r.passed) log << "    witness: " << r.witness << "\n";
    }
  }
  write_file(fs::path(config.out) / "validate.csv", out);
  return ok ? exit_code::ok : exit_code::failure;
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  try {
    if (auto bad = check_config(config); !bad.empty()) throw ConfigError(std::move(bad));
    const auto entry = resolve_problem(config);
    std::error_code ec;
    fs::create_directories(config.out, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", config.out, ec.message()));

    switch (config.subcommand) {
      case Subcommand::sample_fbm: run_sample_fbm(config, entry.problem, log); break;
      case Subcommand::simulate: run_simulate(config, entry.problem, log); break;
      case Subcommand::convergence: run_rate(config, entry.problem, log, false); break;
      case Subcommand::chaos: run_rate(config, entry.problem, log, true); break;
      case Subcommand::validate: return run_validate(config, entry, log);
    }
    return exit_code::ok;
  } catch (const ConfigError& e) {
    log << "configuration error:\n";
    for (const auto& v : e.violations()) log << "  " << v << "\n";
    return exit_code::config;
  } catch (const DivergenceError& e) {
    log << "divergence: " << e.what() << "\n";
    return exit_code::divergence;
  } catch (const SolverError& e) {
    log << "solver failure: " << e.what() << "\n";
    return exit_code::solver;
  } catch (const IoError& e) {
    log << "I/O error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_code::failure;
  }
}

}  // namespace mvfbm::cli
