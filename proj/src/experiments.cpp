#include "mvfbm/experiments.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "mvfbm/error.hpp"

namespace mvfbm::experiments {

using model::Problem;
using scheme::SchemeConfig;
using scheme::SimulationOutput;

std::vector<std::string> ExperimentConfig::violations(const Problem& problem) const {
  std::vector<std::string> bad;
  try {
    scheme::make_geometry(problem, scheme);
  } catch (const ConfigError& e) {
    bad = e.violations();
  }
  // Grid checks for the other step counts, with every other field at its default.
  auto grid_ok = [&](std::size_t m, const char* what) {
    SchemeConfig c;
    c.m = m;
    try {
      scheme::make_geometry(problem, c);
    } catch (const ConfigError& e) {
      for (const auto& v : e.violations()) bad.push_back(fmt::format("{} = {}: {}", what, m, v));
    }
  };
  grid_ok(m_ref, "m_ref");
  for (std::size_t m : m_ladder) grid_ok(m, "m_ladder entry");
  if (m_ladder.empty()) bad.push_back("m_ladder must not be empty");
  for (std::size_t m : m_ladder) {
    if (m < 1 || (m_ref >= 1 && m_ref % m != 0)) {
      bad.push_back(fmt::format("m_ladder entry {} must divide m_ref = {}", m, m_ref));
    }
  }
  if (!std::is_sorted(m_ladder.begin(), m_ladder.end())) {
    bad.push_back("m_ladder must run from coarsest to finest (increasing m)");
  }
  if (n_ladder.empty()) bad.push_back("N_ladder must not be empty");
  for (std::size_t n : n_ladder) {
    if (n < 1 || n > n_ref) {
      bad.push_back(fmt::format("N_ladder entry {} must lie in [1, N_ref = {}]", n, n_ref));
    }
  }
  if (n_mc < 1) bad.push_back("n_mc must be >= 1");
  if (!(p * problem.hurst.value() > 1.0)) {
    bad.push_back(fmt::format("p must satisfy p H > 1 (p = {}, H = {})", p,
                              problem.hurst.value()));
  }
  return bad;
}

void ExperimentConfig::validate(const Problem& problem) const {
  auto bad = violations(problem);
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

RateEstimate fit_rate(const ErrorTable& table) {
  std::vector<double> xs, ys;
  for (const auto& r : table.rows) {
    if (r.flagged() || !(r.error > 0.0) || !(r.param > 0.0)) continue;
    xs.push_back(std::log(r.param));
    ys.push_back(std::log(r.error));
  }
  if (xs.size() < 2) {
    throw DomainError(fmt::format("rate fit needs at least 2 usable rows, got {}", xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("rate fit needs at least 2 distinct parameter values");
  RateEstimate est;
  est.slope = sxy / sxx;
  est.intercept = my - est.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (est.intercept + est.slope * xs[i]);
    ssr += e * e;
  }
  est.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  est.n_rows = xs.size();
  return est;
}

namespace {

bool reps_parallel(const ExperimentConfig& c) { return c.scheme.exec == Exec::parallel; }

SchemeConfig run_config(const ExperimentConfig& c, std::size_t m, std::size_t n) {
  SchemeConfig s = c.scheme;
  s.m = m;
  s.n_particles = n;
  if (reps_parallel(c)) s.exec = Exec::serial;
  return s;
}

// Runs body(rep) for rep = 0..n_mc-1; results land at their replication index.
template <class T, class Fn>
std::vector<T> replicate(const ExperimentConfig& c, Fn body) {
  std::vector<T> out(c.n_mc);
  const auto n = static_cast<std::ptrdiff_t>(c.n_mc);
  if (reps_parallel(c)) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = body(r);
  } else {
    for (std::ptrdiff_t r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = body(r);
  }
  return out;
}

template <class Fn>
std::optional<SimulationOutput> guarded(Fn&& run) {
  try {
    return run();
  } catch (const DivergenceError&) {
    return std::nullopt;
  } catch (const SolverError&) {
    return std::nullopt;
  }
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  out.n = v.size();
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

// Row for per-replication means a_r of |.|^p: error (E a)^{1/p}, delta-method
// standard error.
ErrorRow root_row(double param, const std::vector<std::optional<double>>& a, double p) {
  std::vector<double> ok;
  for (const auto& v : a) {
    if (v) ok.push_back(*v);
  }
  const MeanSe m = mean_se(ok);
  ErrorRow row;
  row.param = param;
  row.n_mc = m.n;
  row.n_failed = a.size() - ok.size();
  row.error = std::pow(m.mean, 1.0 / p);
  row.stderr_ = m.mean > 0.0 ? std::pow(m.mean, 1.0 / p - 1.0) * m.se / p : 0.0;
  return row;
}

double sup_distance_p(const SimulationOutput& ref, std::size_t ref_stride,
                      const SimulationOutput& run, std::size_t i, double p) {
  const std::size_t d = run.d;
  double sup = 0.0;
  for (std::size_t k = 0; k <= run.n_steps(); ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = ref.value(k * ref_stride, i, c) - run.value(k, i, c);
      s += diff * diff;
    }
    sup = std::max(sup, std::sqrt(s));
  }
  return std::pow(sup, p);
}

double norm_at(const SimulationOutput& out, std::size_t k, std::size_t i) {
  double s = 0.0;
  for (std::size_t c = 0; c < out.d; ++c) s += out.value(k, i, c) * out.value(k, i, c);
  return std::sqrt(s);
}

void sort_rows(ErrorTable& t) {
  std::stable_sort(t.rows.begin(), t.rows.end(),
                   [](const ErrorRow& a, const ErrorRow& b) { return a.param < b.param; });
}

RateResult finish(ErrorTable table) {
  sort_rows(table);
  RateResult r{std::move(table), {}, false};
  try {
    r.rate = fit_rate(r.table);
    r.fitted = true;
  } catch (const DomainError& e) {
    r.table.notes.push_back(e.what());
  }
  for (const auto& row : r.table.rows) {
    if (row.flagged()) {
      r.table.notes.push_back(fmt::format("{} = {}: {} replications diverged or failed to "
                                          "converge; row excluded from the fit",
                                          r.table.param_name, row.param, row.n_failed));
    }
  }
  return r;
}

fbm::TimeGrid grid_for(const Problem& problem, const SchemeConfig& c) {
  const auto g = scheme::make_geometry(problem, c);
  return fbm::TimeGrid(g.delta, g.n_steps);
}

}  // namespace

RateResult strong_rate_vs_dt(const Problem& problem, const ExperimentConfig& config) {
  config.validate(problem);
  const std::size_t n = config.scheme.n_particles;
  const double p = config.p;
  const SchemeConfig ref_cfg = run_config(config, config.m_ref, n);
  const fbm::TimeGrid fine = grid_for(problem, ref_cfg);
  const auto& ladder = config.m_ladder;

  using Rep = std::vector<std::optional<double>>;
  const auto reps = replicate<Rep>(config, [&](std::ptrdiff_t r) {
    Rep out(ladder.size());
    const auto drivers =
        scheme::generate_drivers(problem, n, fine, config.scheme.seed,
                                 static_cast<std::uint64_t>(r), config.scheme.generator);
    const auto ref = guarded([&] { return scheme::simulate(problem, ref_cfg, drivers); });
    if (!ref) return out;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
      const std::size_t factor = config.m_ref / ladder[j];
      const auto coarse = scheme::coarsen_driver(drivers, factor);
      const auto run = guarded(
          [&] { return scheme::simulate(problem, run_config(config, ladder[j], n), coarse); });
      if (!run) continue;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += sup_distance_p(*ref, factor, *run, i, p);
      out[j] = acc / static_cast<double>(n);
    }
    return out;
  });

  ErrorTable table{"delta", {}, {}};
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    std::vector<std::optional<double>> col;
    for (const auto& rep : reps) col.push_back(rep[j]);
    table.rows.push_back(root_row(problem.tau / static_cast<double>(ladder[j]), col, p));
  }
  table.notes.push_back(fmt::format("reference: same scheme at m_ref = {} on shared drivers",
                                    config.m_ref));
  return finish(std::move(table));
}

RateResult poc_rate_vs_N(const Problem& problem, const ExperimentConfig& config) {
  config.validate(problem);
  const std::size_t m = config.scheme.m;
  const double p = config.p;
  const SchemeConfig ref_cfg = run_config(config, m, config.n_ref);
  const fbm::TimeGrid grid = grid_for(problem, ref_cfg);
  const auto& ladder = config.n_ladder;

  using Rep = std::vector<std::optional<double>>;
  const auto reps = replicate<Rep>(config, [&](std::ptrdiff_t r) {
    Rep out(ladder.size());
    const auto drivers =
        scheme::generate_drivers(problem, config.n_ref, grid, config.scheme.seed,
                                 static_cast<std::uint64_t>(r), config.scheme.generator);
    const auto ref = guarded([&] { return scheme::simulate(problem, ref_cfg, drivers); });
    if (!ref) return out;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
      const std::size_t nj = ladder[j];
      const auto sub = drivers.prefix(nj);
      const auto run =
          guarded([&] { return scheme::simulate(problem, run_config(config, m, nj), sub); });
      if (!run) continue;
      double acc = 0.0;
      for (std::size_t i = 0; i < nj; ++i) acc += sup_distance_p(*ref, 1, *run, i, p);
      out[j] = acc / static_cast<double>(nj);
    }
    return out;
  });

  ErrorTable table{"N", {}, {}};
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    std::vector<std::optional<double>> col;
    for (const auto& rep : reps) col.push_back(rep[j]);
    table.rows.push_back(root_row(static_cast<double>(ladder[j]), col, p));
  }
  table.notes.push_back(fmt::format(
      "reference: {}-particle system standing in for the limit law; proxy bias O(N_ref^-1/2) "
      "= {:.3g}",
      config.n_ref, 1.0 / std::sqrt(static_cast<double>(config.n_ref))));
  return finish(std::move(table));
}

MomentReport moment_bound_suite(const Problem& problem, const ExperimentConfig& config) {
  config.validate(problem);
  const std::size_t n = config.scheme.n_particles;
  const double p = config.p;
  const fbm::TimeGrid fine = grid_for(problem, run_config(config, config.m_ref, n));
  const auto& ladder = config.m_ladder;

  // Per replication and ladder entry: (1/N) sum_i |Y_k^i|^p for every k.
  using Rep = std::vector<std::optional<std::vector<double>>>;
  const auto reps = replicate<Rep>(config, [&](std::ptrdiff_t r) {
    Rep out(ladder.size());
    const auto drivers =
        scheme::generate_drivers(problem, n, fine, config.scheme.seed,
                                 static_cast<std::uint64_t>(r), config.scheme.generator);
    for (std::size_t j = 0; j < ladder.size(); ++j) {
      const auto coarse = scheme::coarsen_driver(drivers, config.m_ref / ladder[j]);
      const auto run = guarded(
          [&] { return scheme::simulate(problem, run_config(config, ladder[j], n), coarse); });
      if (!run) continue;
      std::vector<double> mk(run->n_steps() + 1);
      for (std::size_t k = 0; k < mk.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += std::pow(norm_at(*run, k, i), p);
        mk[k] = acc / static_cast<double>(n);
      }
      out[j] = std::move(mk);
    }
    return out;
  });

  MomentReport report;
  report.table.param_name = "delta";
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    std::vector<const std::vector<double>*> ok;
    for (const auto& rep : reps) {
      if (rep[j]) ok.push_back(&*rep[j]);
    }
    ErrorRow row;
    row.param = problem.tau / static_cast<double>(ladder[j]);
    row.n_mc = ok.size();
    row.n_failed = reps.size() - ok.size();
    if (!ok.empty()) {
      const std::size_t steps = ok.front()->size();
      double best = -1.0;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < steps; ++k) {
        double acc = 0.0;
        for (const auto* v : ok) acc += (*v)[k];
        if (acc > best) {
          best = acc;
          arg = k;
        }
      }
      std::vector<std::optional<double>> at;
      for (const auto* v : ok) at.push_back((*v)[arg]);
      const ErrorRow r = root_row(row.param, at, p);
      row.error = r.error;
      row.stderr_ = r.stderr_;
    }
    report.table.rows.push_back(row);
  }
  sort_rows(report.table);

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool any_failed = false;
  for (const auto& r : report.table.rows) {
    any_failed = any_failed || r.flagged();
    lo = std::min(lo, r.error);
    hi = std::max(hi, r.error);
  }
  report.spread = lo > 0.0 ? (hi - lo) / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  if (any_failed) report.spread = std::numeric_limits<double>::infinity();
  const auto& finest = report.table.rows.front();
  const auto& coarsest = report.table.rows.back();
  report.upward_trend =
      finest.error - coarsest.error >
      2.0 * std::sqrt(finest.stderr_ * finest.stderr_ + coarsest.stderr_ * coarsest.stderr_);
  return report;
}

ContinuityReport continuity_modulus_suite(const Problem& problem,
                                          const ExperimentConfig& config) {
  config.validate(problem);
  const std::size_t n = config.scheme.n_particles;
  const double p = config.p;
  const SchemeConfig ref_cfg = run_config(config, config.m_ref, n);
  const fbm::TimeGrid fine = grid_for(problem, ref_cfg);
  const auto& ladder = config.m_ladder;

  struct Cells {
    std::vector<double> per_cell;  // (1/N) sum_i sup_cell |.|^p
    double max_inside = 0.0;       // (1/N) sum_i max_k sup_cell |.|^p
  };
  using Rep = std::optional<std::vector<Cells>>;
  const auto reps = replicate<Rep>(config, [&](std::ptrdiff_t r) -> Rep {
    const auto drivers =
        scheme::generate_drivers(problem, n, fine, config.scheme.seed,
                                 static_cast<std::uint64_t>(r), config.scheme.generator);
    const auto ref = guarded([&] { return scheme::simulate(problem, ref_cfg, drivers); });
    if (!ref) return std::nullopt;
    std::vector<Cells> out(ladder.size());
    for (std::size_t j = 0; j < ladder.size(); ++j) {
      const std::size_t f = config.m_ref / ladder[j];
      const std::size_t cells = ref->n_steps() / f;
      out[j].per_cell.assign(cells, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double worst = 0.0;
        for (std::size_t k = 0; k < cells; ++k) {
          double sup = 0.0;
          for (std::size_t q = k * f + 1; q <= (k + 1) * f; ++q) {
            double s = 0.0;
            for (std::size_t c = 0; c < ref->d; ++c) {
              const double diff = ref->value(q, i, c) - ref->value(k * f, i, c);
              s += diff * diff;
            }
            sup = std::max(sup, std::sqrt(s));
          }
          const double v = std::pow(sup, p);
          out[j].per_cell[k] += v;
          worst = std::max(worst, v);
        }
        out[j].max_inside += worst;
      }
      for (auto& v : out[j].per_cell) v /= static_cast<double>(n);
      out[j].max_inside /= static_cast<double>(n);
    }
    return out;
  });

  ContinuityReport report;
  report.table.param_name = "delta";
  report.max_inside.param_name = "delta";
  std::size_t failed = 0;
  for (const auto& rep : reps) failed += rep ? 0 : 1;
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    const double delta = problem.tau / static_cast<double>(ladder[j]);
    std::vector<const Cells*> ok;
    for (const auto& rep : reps) {
      if (rep) ok.push_back(&(*rep)[j]);
    }
    ErrorRow row{delta, 0.0, 0.0, ok.size(), failed};
    ErrorRow diag = row;
    if (!ok.empty()) {
      const std::size_t cells = ok.front()->per_cell.size();
      double best = -1.0;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < cells; ++k) {
        double acc = 0.0;
        for (const auto* c : ok) acc += c->per_cell[k];
        if (acc > best) {
          best = acc;
          arg = k;
        }
      }
      std::vector<double> at, inside;
      for (const auto* c : ok) {
        at.push_back(c->per_cell[arg]);
        inside.push_back(c->max_inside);
      }
      const MeanSe a = mean_se(at);
      const MeanSe b = mean_se(inside);
      row.error = a.mean;
      row.stderr_ = a.se;
      diag.error = b.mean;
      diag.stderr_ = b.se;
    }
    report.table.rows.push_back(row);
    report.max_inside.rows.push_back(diag);
  }
  sort_rows(report.table);
  sort_rows(report.max_inside);

  report.target = std::min(1.0 - config.scheme.alpha, problem.hurst.value()) * p;
  report.tolerance = 0.15 * p;
  try {
    report.rate = fit_rate(report.table);
    report.fitted = true;
  } catch (const DomainError& e) {
    report.table.notes.push_back(e.what());
  }
  try {
    report.max_inside_rate = fit_rate(report.max_inside);
    report.max_inside_fitted = true;
  } catch (const DomainError& e) {
    report.max_inside.notes.push_back(e.what());
  }
  return report;
}

}  // namespace mvfbm::experiments
