#include "mvfbm/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "mvfbm/error.hpp"
#include "mvfbm/kernels.hpp"
#include "mvfbm/rng.hpp"

namespace mvfbm::scheme {

using measure::MeasureHandle;
using model::Problem;

void tame_drift(std::span<const double> b, double delta, double alpha, std::span<double> out) {
  double norm2 = 0.0;
  for (double v : b) norm2 += v * v;
  const double den = 1.0 + std::pow(delta, alpha) * std::sqrt(norm2);
  for (std::size_t c = 0; c < b.size(); ++c) out[c] = b[c] / den;
}

double tame_drift(double b, double delta, double alpha) {
  return b / (1.0 + std::pow(delta, alpha) * std::abs(b));
}

StepGeometry make_geometry(const Problem& problem, const SchemeConfig& config) {
  std::vector<std::string> bad;
  if (!(config.theta >= 0.0 && config.theta <= 1.0)) bad.push_back("theta must lie in [0, 1]");
  if (!(config.alpha > 0.0 && config.alpha <= 0.5)) bad.push_back("alpha must lie in (0, 0.5]");
  if (config.m < 1) bad.push_back("m must be >= 1");
  if (config.n_particles < 1) bad.push_back("N must be >= 1");
  if (!(config.picard_tol > 0.0)) bad.push_back("picard_tol must be positive");
  if (config.picard_max_iters < 1) bad.push_back("picard_max_iters must be >= 1");
  if (!(problem.tau > 0.0)) bad.push_back("tau must be positive");
  if (!(problem.horizon > 0.0)) bad.push_back("T must be positive");

  StepGeometry g;
  g.m = config.m;
  if (config.m >= 1 && problem.tau > 0.0 && problem.horizon > 0.0) {
    g.delta = problem.tau / static_cast<double>(config.m);
    const double ratio = problem.horizon / g.delta;
    const double rounded = std::round(ratio);
    if (!(g.delta < 1.0)) {
      bad.push_back(fmt::format("Delta = tau/m = {} must lie in (0, 1)", g.delta));
    } else if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * ratio) {
      bad.push_back(fmt::format("T/Delta = {} is not an integer (need Delta = tau/m = T/M)",
                                ratio));
    } else {
      g.n_steps = static_cast<std::size_t>(rounded);
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return g;
}

// ---------------------------------------------------------------------------
// Drivers

DriverSet::DriverSet(std::size_t n_particles, std::size_t d, std::size_t n_steps, double dt)
    : n_(n_particles), d_(d), steps_(n_steps), dt_(dt), data_(n_particles * d * n_steps, 0.0) {}

void DriverSet::increments_at(std::size_t k, Ensemble& out) const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t c = 0; c < d_; ++c) out(i, c) = data_[(i * d_ + c) * steps_ + k];
  }
}

DriverSet DriverSet::prefix(std::size_t n) const {
  if (n > n_) throw DomainError(fmt::format("prefix of {} particles from a set of {}", n, n_));
  DriverSet out(n, d_, steps_, dt_);
  std::copy_n(data_.begin(), n * d_ * steps_, out.data_.begin());
  return out;
}

DriverSet DriverSet::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != n_) throw DomainError("permutation size does not match particle count");
  DriverSet out(n_, d_, steps_, dt_);
  for (std::size_t j = 0; j < n_; ++j) {
    for (std::size_t c = 0; c < d_; ++c) {
      const auto src = path(perm[j], c);
      std::copy(src.begin(), src.end(), out.path(j, c).begin());
    }
  }
  return out;
}

DriverSet generate_drivers(const Problem& problem, std::size_t n_particles,
                           const fbm::TimeGrid& grid, std::uint64_t seed,
                           std::uint64_t replication, DriverGenerator generator, Exec exec) {
  DriverSet drivers(n_particles, problem.d, grid.n_steps, grid.dt);
  const std::size_t d = problem.d;
  const auto n_paths = static_cast<std::ptrdiff_t>(n_particles * d);

  auto fill = [&](const auto& gen) {
    auto one = [&](std::ptrdiff_t p) {
      const auto i = static_cast<std::size_t>(p) / d;
      const auto c = static_cast<std::size_t>(p) % d;
      const auto path = gen.sample(seed, stream_id({replication, i, c}));
      auto dst = drivers.path(i, c);
      for (std::size_t k = 0; k < grid.n_steps; ++k) {
        dst[k] = path.values[k + 1] - path.values[k];
      }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t p = 0; p < n_paths; ++p) one(p);
    } else {
      for (std::ptrdiff_t p = 0; p < n_paths; ++p) one(p);
    }
  };

  if (generator == DriverGenerator::cholesky) {
    fill(fbm::CholeskyGenerator(grid, problem.hurst));
  } else {
    fill(fbm::CirculantGenerator(grid, problem.hurst));
  }
  return drivers;
}

std::vector<double> coarsen_driver(std::span<const double> fine, std::size_t factor) {
  if (factor == 0 || fine.size() % factor != 0) {
    throw DomainError(fmt::format("coarsening factor {} does not divide {} fine steps", factor,
                                  fine.size()));
  }
  std::vector<double> coarse(fine.size() / factor);
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    double acc = 0.0;
    for (std::size_t r = 0; r < factor; ++r) acc += fine[k * factor + r];
    coarse[k] = acc;
  }
  return coarse;
}

DriverSet coarsen_driver(const DriverSet& fine, std::size_t factor) {
  if (factor == 0 || fine.n_steps() % factor != 0) {
    throw DomainError(fmt::format("coarsening factor {} does not divide {} fine steps", factor,
                                  fine.n_steps()));
  }
  DriverSet out(fine.n_particles(), fine.dim(), fine.n_steps() / factor,
                fine.dt() * static_cast<double>(factor));
  for (std::size_t i = 0; i < fine.n_particles(); ++i) {
    for (std::size_t c = 0; c < fine.dim(); ++c) {
      const auto coarse = coarsen_driver(fine.path(i, c), factor);
      std::copy(coarse.begin(), coarse.end(), out.path(i, c).begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// State

EnsembleState::EnsembleState(std::size_t m, std::size_t n_particles, std::size_t d)
    : m_(m), y_(m + 1, Ensemble(n_particles, d)), z_(m + 1, Ensemble(n_particles, d)) {
  if (m < 1) throw DomainError("EnsembleState needs m >= 1");
}

std::size_t EnsembleState::slot(std::size_t lag) const {
  if (lag > m_) throw DomainError(fmt::format("history lag {} exceeds m = {}", lag, m_));
  return (head_ + (m_ + 1) - lag) % (m_ + 1);
}

const Ensemble& EnsembleState::y(std::size_t lag) const { return y_[slot(lag)]; }
const Ensemble& EnsembleState::z(std::size_t lag) const { return z_[slot(lag)]; }

void EnsembleState::push(Ensemble y_next, Ensemble z_next) {
  head_ = (head_ + 1) % (m_ + 1);
  y_[head_] = std::move(y_next);
  z_[head_] = std::move(z_next);
  ++k_;
}

void EnsembleState::set(std::size_t lag, Ensemble y, Ensemble z) {
  const std::size_t s = slot(lag);
  y_[s] = std::move(y);
  z_[s] = std::move(z);
}

namespace {

double step_size(const Problem& problem, const SchemeConfig& config) {
  return problem.tau / static_cast<double>(config.m);
}

Ensemble initial_column(const Problem& problem, std::size_t n, double t) {
  Ensemble col(n, problem.d);
  problem.initial(t, col.row(0));
  for (std::size_t i = 1; i < n; ++i) {
    std::copy(col.row(0).begin(), col.row(0).end(), col.row(i).begin());
  }
  if (!col.all_finite()) {
    throw DomainError(fmt::format("initial segment is not finite at t = {}", t));
  }
  return col;
}

Ensemble diffusion_matrix(const Problem& problem, const MeasureHandle& mu) {
  Ensemble sigma(problem.d, problem.d);
  problem.diffusion(mu, sigma.data());
  return sigma;
}

void require_finite(const Ensemble& e, std::ptrdiff_t step, const char* what) {
  if (!e.all_finite()) {
    throw DivergenceError(fmt::format("non-finite {} at step {}", what, step),
                          static_cast<std::size_t>(std::max<std::ptrdiff_t>(step, 0)));
  }
}

}  // namespace

EnsembleState initial_state(const Problem& problem, const SchemeConfig& config) {
  const std::size_t n = config.n_particles;
  const std::size_t m = config.m;
  const double delta = step_size(problem, config);
  EnsembleState state(m, n, problem.d);
  for (std::size_t j = m; j >= 1; --j) {
    const double t = j == m ? -problem.tau : -static_cast<double>(j) * delta;
    Ensemble col = initial_column(problem, n, t);
    state.set(j, col, col);
  }

  Ensemble y0 = initial_column(problem, n, 0.0);
  const MeasureHandle mu0(y0.data(), n, problem.d, problem.q);
  Ensemble b0(n, problem.d);
  kernels::serial::drift_field({problem, mu0, delta, config.alpha, config.taming}, y0,
                               state.y(m), b0);
  Ensemble z0 = y0;
  const double theta_delta = config.theta * delta;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < problem.d; ++c) z0(i, c) = y0(i, c) - theta_delta * b0(i, c);
  }
  state.set(0, std::move(y0), std::move(z0));
  return state;
}

// ---------------------------------------------------------------------------
// Steps

void step_explicit(EnsembleState& state, const Problem& problem, const SchemeConfig& config,
                   const Ensemble& dB) {
  if (config.theta != 0.0) throw DomainError("step_explicit requires theta = 0");
  const std::size_t m = state.m();
  const double delta = step_size(problem, config);
  const Ensemble& yk = state.y(0);
  const std::size_t n = yk.size();

  const MeasureHandle mu(yk.data(), n, problem.d, problem.q);
  Ensemble drift(n, problem.d);
  kernels::drift_field(config.exec, {problem, mu, delta, config.alpha, config.taming}, yk,
                       state.y(m), drift);
  const Ensemble sigma = diffusion_matrix(problem, mu);
  Ensemble next(n, problem.d);
  kernels::neutral_update(config.exec, {problem, sigma.data(), delta}, yk, state.y(m - 1),
                          state.y(m), drift, dB, next);
  require_finite(next, state.k() + 1, "state");
  Ensemble z_copy = next;
  state.push(std::move(next), std::move(z_copy));
}

Ensemble step_split(const EnsembleState& state, const Problem& problem,
                    const SchemeConfig& config, const Ensemble& dB) {
  const std::size_t m = state.m();
  const double delta = step_size(problem, config);
  const Ensemble& yk = state.y(0);
  const std::size_t n = yk.size();

  const MeasureHandle mu(yk.data(), n, problem.d, problem.q);
  Ensemble drift(n, problem.d);
  kernels::drift_field(config.exec, {problem, mu, delta, config.alpha, config.taming}, yk,
                       state.y(m), drift);
  const Ensemble sigma = diffusion_matrix(problem, mu);
  Ensemble z_next(n, problem.d);
  kernels::neutral_update(config.exec, {problem, sigma.data(), delta}, state.z(0),
                          state.z(m - 1), state.z(m), drift, dB, z_next);
  require_finite(z_next, state.k() + 1, "split-step variable z");
  return z_next;
}

Ensemble implicit_stage_solve(const EnsembleState& state, const Ensemble& z_next,
                              const Problem& problem, const SchemeConfig& config,
                              PicardStats* stats) {
  const std::size_t m = state.m();
  const double delta = step_size(problem, config);
  const std::size_t n = z_next.size();
  const std::size_t d = problem.d;
  const Ensemble& y_lag = state.y(m - 1);  // Y_{k+1-m}

  Ensemble offset(n, d);
  kernels::neutral_offset(config.exec, problem, z_next, y_lag, state.z(m - 1), offset);

  constexpr double kMinDamping = 1.0 / 64.0;
  Ensemble current = state.y(0);
  Ensemble mapped(n, d);
  std::vector<double> prev_y, prev_g;
  double damping = 1.0;
  std::size_t updates = 0;
  const std::ptrdiff_t step = state.k() + 1;

  for (;;) {
    const MeasureHandle mu(current.data(), n, d, problem.q);
    const kernels::SweepArgs args{problem, mu,           config.theta * delta, delta,
                                  config.alpha, config.taming};
    const double resid = kernels::picard_map(config.exec, args, offset, y_lag, current, mapped);
    if (!std::isfinite(resid)) {
      throw DivergenceError(
          fmt::format("implicit stage produced a non-finite iterate at step {}", step),
          static_cast<std::size_t>(step));
    }
    if (resid <= config.picard_tol) {
      if (stats != nullptr) *stats = {updates, resid, damping};
      return current;
    }
    if (updates == config.picard_max_iters) {
      throw SolverError(
          fmt::format("implicit stage did not converge at step {} after {} iterations "
                      "(residual {:.3e}, damping {})",
                      step, updates, resid, damping),
          resid);
    }
    auto cur = current.data();
    const auto g = mapped.data();
    if (prev_y.empty()) {
      prev_y.assign(cur.begin(), cur.end());
      prev_g.assign(g.begin(), g.end());
      std::copy(g.begin(), g.end(), cur.begin());
    } else {
      for (std::size_t j = 0; j < cur.size(); ++j) {
        const double dy = cur[j] - prev_y[j];
        const double slope = dy != 0.0 ? (g[j] - prev_g[j]) / dy : 0.0;
        const double w = slope < 0.0 ? std::max(kMinDamping, 1.0 / (1.0 - slope)) : 1.0;
        damping = std::min(damping, w);
        prev_y[j] = cur[j];
        prev_g[j] = g[j];
        cur[j] = w == 1.0 ? g[j] : cur[j] + w * (g[j] - cur[j]);
      }
    }
    ++updates;
  }
}

// ---------------------------------------------------------------------------
// Full runs

namespace {

void check_drivers(const Problem& problem, const SchemeConfig& config, const StepGeometry& g,
                   const DriverSet& drivers) {
  if (drivers.n_particles() != config.n_particles || drivers.dim() != problem.d ||
      drivers.n_steps() != g.n_steps ||
      std::abs(drivers.dt() - g.delta) > 1e-12 * g.delta) {
    throw DomainError(fmt::format(
        "driver set ({} particles, d={}, {} steps, dt={}) does not match the run "
        "({} particles, d={}, {} steps, dt={})",
        drivers.n_particles(), drivers.dim(), drivers.n_steps(), drivers.dt(),
        config.n_particles, problem.d, g.n_steps, g.delta));
  }
}

SimulationOutput make_output(const Problem& problem, const SchemeConfig& config,
                             const StepGeometry& g) {
  SimulationOutput out;
  out.problem = problem.name;
  out.config = config;
  out.geometry = g;
  out.n_particles = config.n_particles;
  out.d = problem.d;
  const std::size_t column = config.n_particles * problem.d;
  out.y.resize((g.n_steps + 1) * column);
  out.z.resize((g.n_steps + 1) * column);
  if (config.theta * std::pow(g.delta, 1.0 - config.alpha) >= 1.0) {
    out.warnings.push_back(fmt::format(
        "theta * Delta^(1-alpha) = {} >= 1: the implicit stage may not contract",
        config.theta * std::pow(g.delta, 1.0 - config.alpha)));
  }
  return out;
}

void store(SimulationOutput& out, std::size_t k, const Ensemble& y, const Ensemble& z) {
  const std::size_t column = out.n_particles * out.d;
  std::copy(y.data().begin(), y.data().end(), out.y.begin() + k * column);
  std::copy(z.data().begin(), z.data().end(), out.z.begin() + k * column);
}

template <class Fn>
void annotate(const SchemeConfig& config, Fn&& body) {
  try {
    body();
  } catch (const DivergenceError& e) {
    throw DivergenceError(fmt::format("{} (N = {})", e.what(), config.n_particles), e.step());
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("{} (N = {})", e.what(), config.n_particles),
                      e.last_residual());
  }
}

}  // namespace

SimulationOutput simulate(const Problem& problem, const SchemeConfig& config,
                          const DriverSet& drivers) {
  const StepGeometry g = make_geometry(problem, config);
  check_drivers(problem, config, g, drivers);
  SimulationOutput out = make_output(problem, config, g);

  annotate(config, [&] {
    EnsembleState state = initial_state(problem, config);
    store(out, 0, state.y(0), state.z(0));
    Ensemble dB(config.n_particles, problem.d);
    for (std::size_t k = 0; k < g.n_steps; ++k) {
      drivers.increments_at(k, dB);
      Ensemble z_next = step_split(state, problem, config, dB);
      PicardStats stats;
      Ensemble y_next = implicit_stage_solve(state, z_next, problem, config, &stats);
      out.picard.total_iterations += stats.iterations;
      out.picard.max_iterations = std::max(out.picard.max_iterations, stats.iterations);
      out.picard.max_residual = std::max(out.picard.max_residual, stats.residual);
      out.picard.min_damping = std::min(out.picard.min_damping, stats.damping);
      store(out, k + 1, y_next, z_next);
      state.push(std::move(y_next), std::move(z_next));
    }
  });
  return out;
}

SimulationOutput simulate(const Problem& problem, const SchemeConfig& config) {
  const StepGeometry g = make_geometry(problem, config);
  const fbm::TimeGrid grid(g.delta, g.n_steps);
  const DriverSet drivers = generate_drivers(problem, config.n_particles, grid, config.seed, 0,
                                             config.generator, config.exec);
  return simulate(problem, config, drivers);
}

SimulationOutput simulate_explicit(const Problem& problem, const SchemeConfig& config,
                                   const DriverSet& drivers) {
  const StepGeometry g = make_geometry(problem, config);
  check_drivers(problem, config, g, drivers);
  SimulationOutput out = make_output(problem, config, g);

  annotate(config, [&] {
    EnsembleState state = initial_state(problem, config);
    store(out, 0, state.y(0), state.z(0));
    Ensemble dB(config.n_particles, problem.d);
    for (std::size_t k = 0; k < g.n_steps; ++k) {
      drivers.increments_at(k, dB);
      step_explicit(state, problem, config, dB);
      store(out, k + 1, state.y(0), state.z(0));
    }
  });
  return out;
}

Ensemble piecewise_constant_interpolant(const SimulationOutput& output, const Problem& problem,
                                        double t) {
  const double horizon = output.delta() * static_cast<double>(output.n_steps());
  if (!(t >= -problem.tau && t <= horizon * (1.0 + 1e-12))) {
    throw DomainError(fmt::format("interpolant evaluated at t = {} outside [-tau, T]", t));
  }
  if (t <= 0.0) return initial_column(problem, output.n_particles, t);

  const double pos = t / output.delta();
  const double nearest = std::round(pos);
  double cell = std::abs(pos - nearest) <= 1e-9 * std::max(1.0, pos) ? nearest : std::floor(pos);
  const auto k = std::min(static_cast<std::size_t>(cell), output.n_steps());

  Ensemble out(output.n_particles, output.d);
  const auto col = output.column(k);
  std::copy(col.begin(), col.end(), out.data().begin());
  return out;
}

}  // namespace mvfbm::scheme
