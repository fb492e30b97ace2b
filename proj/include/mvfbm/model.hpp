#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvfbm/exec.hpp"
#include "mvfbm/fbm.hpp"
#include "mvfbm/measure.hpp"

namespace mvfbm::model {

using measure::MeasureHandle;

// Coefficient callbacks write into caller-owned buffers so the hot loops do
// not allocate. They must be pure: the scheme calls them concurrently.
using DriftFn = std::function<void(std::span<const double> x, std::span<const double> y,
                                   const MeasureHandle& mu, std::span<double> out)>;
using NeutralFn = std::function<void(std::span<const double> y, std::span<double> out)>;
/// Writes the d x d diffusion matrix row-major.
using DiffusionFn = std::function<void(const MeasureHandle& mu, std::span<double> out)>;
using InitialSegmentFn = std::function<void(double t, std::span<double> out)>;

/// d(X_t - D(X_{t-tau})) = b(X_t, X_{t-tau}, L(X_t)) dt + sigma(L(X_t)) dB^H_t,
/// X = xi on [-tau, 0].
struct Problem {
  std::string name;
  std::size_t d = 1;
  double tau = 1.0;
  double horizon = 1.0;  // T
  fbm::HurstParam hurst{0.75};
  measure::WassersteinOrder q{2.0};
  DriftFn drift;
  NeutralFn neutral;
  DiffusionFn diffusion;
  InitialSegmentFn initial;
};

/// Declared constants of the standing assumptions. K0 is stored as the
/// Lipschitz constant of xi on [-tau, 0].
struct AssumptionConstants {
  double lambda = 0.5;  // neutral contraction, in (0, 1)
  double l = 1.0;       // polynomial growth exponent, >= 1
  double K0 = 0.0;
  double K2 = 0.0;  // one-sided
  double K3 = 0.0;  // polynomial Lipschitz
  double K4 = 0.0;  // sigma Lipschitz in W_q
  double K5 = 0.0;  // linear growth
  double K6 = 0.0;  // |b(0,0,delta_0)| v ||sigma(delta_0)||

  void check() const;
};

struct CatalogEntry {
  std::string name;
  Problem problem;
  AssumptionConstants constants;
  std::string notes;
};

/// Parameters of the randomized assumption scans.
struct ScanOptions {
  std::size_t budget = 100000;
  double box_lo = -5.0;
  double box_hi = 5.0;
  std::uint64_t seed = 20240730;
  std::size_t max_cloud = 16;  // sample clouds have 1..max_cloud points
  Exec exec = Exec::serial;
  /// When set, the drift is replaced by its tamed version b_Delta.
  std::optional<double> taming_delta;
  double taming_alpha = 0.5;
};

/// One inequality of an assumption: the worst observed constant over the scan
/// compared with the declared one.
struct InequalityResult {
  std::string name;
  double declared = 0.0;
  double observed = 0.0;  // smallest constant that makes every sample hold
  bool passed = true;
  std::string witness;  // populated on failure
};

struct ValidationReport {
  std::string check;
  std::size_t samples = 0;
  std::vector<InequalityResult> inequalities;

  bool passed() const;
  double worst_ratio() const;  // max over inequalities of observed constant
};

/// |D(x) - D(x')| <= lambda |x - x'| and D(0) = 0.
ValidationReport validate_neutral_contraction(const Problem& problem,
                                              const AssumptionConstants& constants,
                                              const ScanOptions& scan = {});

/// One-sided monotonicity with K2 and the polynomial Lipschitz bound with K3, l.
ValidationReport validate_one_sided(const Problem& problem,
                                    const AssumptionConstants& constants,
                                    const ScanOptions& scan = {});

/// ||sigma(mu) - sigma(nu)|| <= K4 W_q(mu, nu) and
/// |b(0,0,mu)| v ||sigma(mu)|| <= K5 (1 + W_q(mu, delta_0)).
ValidationReport validate_sigma(const Problem& problem,
                                const AssumptionConstants& constants,
                                const ScanOptions& scan = {});

/// |xi(s) - xi(t)| <= K0 |s - t| on [-tau, 0].
ValidationReport validate_initial_segment(const Problem& problem,
                                          const AssumptionConstants& constants,
                                          const ScanOptions& scan = {});

/// |b(x,y,mu)| <= C (1 + |x|^{l+1} + |y|^{l+1} + W_q(mu, delta_0)), C = K3 v K5.
ValidationReport validate_growth(const Problem& problem,
                                 const AssumptionConstants& constants,
                                 const ScanOptions& scan = {});

std::vector<ValidationReport> validate_all(const Problem& problem,
                                           const AssumptionConstants& constants,
                                           const ScanOptions& scan = {});

/// Affine family b = a x + c y + e mean(mu), D = lambda y,
/// sigma = s0 + s1 W_q(mu, delta_0), xi constant.
struct LinearCoefficients {
  double a = -1.0;
  double c = 0.5;
  double e = 0.5;
  double lambda = 0.2;
  double s0 = 0.4;
  double s1 = 0.0;
  double xi0 = 1.0;
};

Problem make_linear_problem(const std::string& name, const LinearCoefficients& coeffs,
                            double tau = 1.0, double horizon = 2.0, double hurst = 0.75);

std::vector<CatalogEntry> builtin_catalog();
CatalogEntry find_problem(const std::string& name);

}  // namespace mvfbm::model
