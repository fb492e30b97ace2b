#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvfbm/model.hpp"
#include "mvfbm/scheme.hpp"

namespace mvfbm::experiments {

struct ExperimentConfig {
  std::string problem = "cubic-mf";
  scheme::SchemeConfig scheme;  // theta, alpha, N, seed, ... ; m is overridden per run
  std::vector<std::size_t> m_ladder{4, 8, 16, 32, 64};  // coarsest to finest
  std::size_t m_ref = 512;
  std::vector<std::size_t> n_ladder{8, 16, 32, 64, 128};
  std::size_t n_ref = 1024;
  std::size_t n_mc = 200;
  double p = 2.0;  // error moment, p H > 1

  /// Every violation against `problem`; empty when the config is usable.
  std::vector<std::string> violations(const model::Problem& problem) const;
  /// Throws ConfigError listing violations().
  void validate(const model::Problem& problem) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ErrorRow {
  double param = 0.0;  // Delta or N
  double error = 0.0;  // (E sup|.|^p)^{1/p}, or the raw statistic for the suites
  double stderr_ = 0.0;
  std::size_t n_mc = 0;         // replications that contributed
  std::size_t n_failed = 0;     // replications lost to divergence / non-convergence
  bool flagged() const noexcept { return n_failed > 0; }
};

struct ErrorTable {
  std::string param_name;  // "delta" or "N"
  std::vector<ErrorRow> rows;  // sorted by param
  std::vector<std::string> notes;
};

struct RateEstimate {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_rows = 0;
};

/// OLS of log error on log param over unflagged rows with error > 0.
/// Throws DomainError with fewer than two usable rows.
RateEstimate fit_rate(const ErrorTable& table);

struct RateResult {
  ErrorTable table;
  RateEstimate rate;
  bool fitted = false;  // false when fewer than two usable rows
};

/// Fine-grid reference at m_ref against every ladder m on coarsened drivers;
/// N = scheme.n_particles.
RateResult strong_rate_vs_dt(const model::Problem& problem, const ExperimentConfig& config);

/// N_ref-particle reference against prefix systems of each ladder N, at
/// m = scheme.m.
RateResult poc_rate_vs_N(const model::Problem& problem, const ExperimentConfig& config);

struct MomentReport {
  ErrorTable table;  // param Delta, error sup_k (E|Y_k|^p)^{1/p}
  double spread = 0.0;  // (max - min) / min over the ladder
  bool upward_trend = false;  // finest above coarsest by more than 2 standard errors
  // spread is infinite when any run diverged
  bool passed() const noexcept { return spread < 0.1 && !upward_trend; }
};

/// Moment bound across the Delta ladder (drivers coarsened from m_ref).
MomentReport moment_bound_suite(const model::Problem& problem, const ExperimentConfig& config);

struct ContinuityReport {
  /// max_k E sup_{t in [t_k, t_k+1]} |Y(t) - Y(t_k)|^p per cell width Delta.
  ErrorTable table;
  RateEstimate rate;
  /// E max_k sup ..., reported for comparison.
  ErrorTable max_inside;
  RateEstimate max_inside_rate;
  double target = 0.0;  // ((1 - alpha) ^ H) p
  double tolerance = 0.0;  // 0.15 p
  bool fitted = false;
  bool max_inside_fitted = false;
  bool passed() const noexcept { return fitted && rate.slope >= target - tolerance; }
};

/// Modulus of continuity of the m_ref reference run over cells of the ladder
/// widths, sup taken over fine grid points of each closed cell.
ContinuityReport continuity_modulus_suite(const model::Problem& problem,
                                          const ExperimentConfig& config);

}  // namespace mvfbm::experiments
