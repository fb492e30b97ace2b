#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvfbm/ensemble.hpp"
#include "mvfbm/exec.hpp"
#include "mvfbm/fbm.hpp"
#include "mvfbm/model.hpp"

namespace mvfbm::scheme {

/// Tamed drift b / (1 + delta^alpha |b|). Output norm never exceeds
/// min(delta^{-alpha}, |b|); zero maps to zero. out may alias b.
void tame_drift(std::span<const double> b, double delta, double alpha,
                std::span<double> out);
double tame_drift(double b, double delta, double alpha);

enum class DriverGenerator { circulant, cholesky };

struct SchemeConfig {
  double theta = 1.0;              // [0, 1]
  double alpha = 0.5;              // (0, 1/2]
  std::size_t m = 16;              // steps per delay interval, Delta = tau / m
  std::size_t n_particles = 64;    // N
  double picard_tol = 1e-12;
  std::size_t picard_max_iters = 100;
  std::uint64_t seed = 1;
  Exec exec = Exec::serial;
  DriverGenerator generator = DriverGenerator::circulant;
  bool taming = true;  // false only for contrast diagnostics and tests

  friend bool operator==(const SchemeConfig&, const SchemeConfig&) = default;
};

/// Delta = tau / m = T / M.
struct StepGeometry {
  double delta = 0.0;
  std::size_t m = 0;
  std::size_t n_steps = 0;  // M
};

/// Validates the config against the problem and derives Delta and M. M must
/// be an integer within relative tolerance 1e-12.
StepGeometry make_geometry(const model::Problem& problem, const SchemeConfig& config);

/// Increments of one fBm path per (particle, coordinate) on a uniform grid.
class DriverSet {
 public:
  DriverSet(std::size_t n_particles, std::size_t d, std::size_t n_steps, double dt);

  std::size_t n_particles() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  std::size_t n_steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }

  std::span<double> path(std::size_t i, std::size_t c) noexcept {
    return {data_.data() + (i * d_ + c) * steps_, steps_};
  }
  std::span<const double> path(std::size_t i, std::size_t c) const noexcept {
    return {data_.data() + (i * d_ + c) * steps_, steps_};
  }
  /// dB_k for every particle, written as an N x d block.
  void increments_at(std::size_t k, Ensemble& out) const;
  /// The first n particles (same streams).
  DriverSet prefix(std::size_t n) const;
  /// Reorders particles: result particle j is this particle perm[j].
  DriverSet permuted(std::span<const std::size_t> perm) const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::size_t steps_;
  double dt_;
  std::vector<double> data_;
};

/// Independent fBm drivers with stream key (replication, particle, coordinate).
DriverSet generate_drivers(const model::Problem& problem, std::size_t n_particles,
                           const fbm::TimeGrid& grid, std::uint64_t seed,
                           std::uint64_t replication,
                           DriverGenerator generator = DriverGenerator::circulant,
                           Exec exec = Exec::serial);

/// Block sums of `factor` consecutive fine increments.
std::vector<double> coarsen_driver(std::span<const double> fine, std::size_t factor);
DriverSet coarsen_driver(const DriverSet& fine, std::size_t factor);

/// Ring buffer of the last m + 1 grid columns of Y and z.
class EnsembleState {
 public:
  EnsembleState(std::size_t m, std::size_t n_particles, std::size_t d);

  std::ptrdiff_t k() const noexcept { return k_; }
  std::size_t m() const noexcept { return m_; }
  /// Y_{k - lag}, lag in [0, m].
  const Ensemble& y(std::size_t lag) const;
  const Ensemble& z(std::size_t lag) const;

  /// Appends column k + 1.
  void push(Ensemble y_next, Ensemble z_next);
  /// Overwrites column k - lag; used while seeding the history.
  void set(std::size_t lag, Ensemble y, Ensemble z);

 private:
  std::size_t slot(std::size_t lag) const;

  std::size_t m_;
  std::ptrdiff_t k_ = 0;
  std::size_t head_ = 0;  // slot of column k
  std::vector<Ensemble> y_;
  std::vector<Ensemble> z_;
};

/// History Y_{t_j} = z_{t_j} = xi(j Delta) for j = -m..-1, Y_0 = xi(0) and
/// z_0 = xi(0) - theta Delta b_Delta(xi(0), xi(-tau), mu_0).
EnsembleState initial_state(const model::Problem& problem, const SchemeConfig& config);

struct PicardStats {
  std::size_t iterations = 0;  // fixed-point updates applied
  double residual = 0.0;       // max-norm residual of the returned iterate
  double damping = 1.0;        // smallest relaxation factor applied
};

/// Direct recursion with theta = 0:
/// Y_{k+1} = Y_k + D(Y_{k+1-m}) - D(Y_{k-m}) + b_Delta(Y_k, Y_{k-m}, mu_k) Delta
///           + sigma(mu_k) dB.
/// Advances the state; z mirrors Y.
void step_explicit(EnsembleState& state, const model::Problem& problem,
                   const SchemeConfig& config, const Ensemble& dB);

/// z_{k+1} = z_k + D(z_{k+1-m}) - D(z_{k-m}) + b_Delta(Y_k, Y_{k-m}, mu_k) Delta
///           + sigma(mu_k) dB, mu_k the empirical measure of Y_k.
Ensemble step_split(const EnsembleState& state, const model::Problem& problem,
                    const SchemeConfig& config, const Ensemble& dB);

/// Solves Y = D(Y_{k+1-m}) + z_{k+1} - D(z_{k+1-m}) + theta Delta b_Delta(Y, Y_{k+1-m}, mu^Y)
/// for the whole ensemble by Picard iteration, recomputing the empirical
/// measure of the iterate every sweep. The first update is the plain map;
/// later updates relax each component by 1 / (1 - s), s the secant slope of
/// the map along that component, whenever s < 0 (clipped to [1/64, 1]).
Ensemble implicit_stage_solve(const EnsembleState& state, const Ensemble& z_next,
                              const model::Problem& problem, const SchemeConfig& config,
                              PicardStats* stats = nullptr);

struct PicardSummary {
  std::size_t total_iterations = 0;
  std::size_t max_iterations = 0;
  double max_residual = 0.0;
  double min_damping = 1.0;
};

struct SimulationOutput {
  std::string problem;
  SchemeConfig config;
  StepGeometry geometry;
  std::size_t n_particles = 0;
  std::size_t d = 0;
  std::vector<double> y;  // (M + 1) x N x d
  std::vector<double> z;  // same layout
  PicardSummary picard;
  std::vector<std::string> warnings;

  std::size_t n_steps() const noexcept { return geometry.n_steps; }
  double delta() const noexcept { return geometry.delta; }
  double value(std::size_t k, std::size_t i, std::size_t c = 0) const noexcept {
    return y[(k * n_particles + i) * d + c];
  }
  std::span<const double> column(std::size_t k) const noexcept {
    return {y.data() + k * n_particles * d, n_particles * d};
  }
  std::span<const double> z_column(std::size_t k) const noexcept {
    return {z.data() + k * n_particles * d, n_particles * d};
  }
};

/// Drivers drawn from config.seed with replication 0.
SimulationOutput simulate(const model::Problem& problem, const SchemeConfig& config);
/// Split-step scheme driven by the given increments (grid of M steps).
SimulationOutput simulate(const model::Problem& problem, const SchemeConfig& config,
                          const DriverSet& drivers);
/// Direct theta = 0 recursion through step_explicit; reference route for the
/// split-step implementation.
SimulationOutput simulate_explicit(const model::Problem& problem, const SchemeConfig& config,
                                   const DriverSet& drivers);

/// Left-continuous step interpolant: xi(t) for t <= 0, Y_{t_k} on [t_k, t_{k+1}).
/// Returns an N x d block.
Ensemble piecewise_constant_interpolant(const SimulationOutput& output,
                                        const model::Problem& problem, double t);

}  // namespace mvfbm::scheme
