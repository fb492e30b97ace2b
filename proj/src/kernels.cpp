#include "mvfbm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mvfbm/scheme.hpp"

namespace mvfbm::kernels {

namespace {

// Per-particle bodies shared by both loop drivers.

// max() that lets a NaN residual win, so divergence is never masked.
inline double max_nan(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
  return std::max(a, b);
}

inline void drift_one(const DriftArgs& a, std::span<const double> x,
                      std::span<const double> y, std::span<double> out) {
  a.problem.drift(x, y, a.mu, out);
  if (a.taming) scheme::tame_drift(out, a.delta, a.alpha, out);
}

struct NeutralScratch {
  explicit NeutralScratch(std::size_t d) : lead(d), lag(d), noise(d) {}
  std::vector<double> lead;
  std::vector<double> lag;
  std::vector<double> noise;
};

inline void neutral_update_one(const NoiseArgs& a, std::span<const double> base,
                               std::span<const double> lead, std::span<const double> lag,
                               std::span<const double> drift, std::span<const double> dB,
                               std::span<double> out, NeutralScratch& s) {
  const std::size_t d = base.size();
  a.problem.neutral(lead, s.lead);
  a.problem.neutral(lag, s.lag);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += a.sigma[r * d + c] * dB[c];
    s.noise[r] = acc;
  }
  for (std::size_t r = 0; r < d; ++r) {
    out[r] = base[r] + (s.lead[r] - s.lag[r]) + drift[r] * a.delta + s.noise[r];
  }
}

inline void neutral_offset_one(const model::Problem& p, std::span<const double> base,
                               std::span<const double> lead, std::span<const double> lag,
                               std::span<double> out, NeutralScratch& s) {
  p.neutral(lead, s.lead);
  p.neutral(lag, s.lag);
  for (std::size_t r = 0; r < base.size(); ++r) out[r] = base[r] + (s.lead[r] - s.lag[r]);
}

inline double picard_one(const SweepArgs& a, std::span<const double> offset,
                         std::span<const double> y_lag, std::span<const double> current,
                         std::span<double> out, std::vector<double>& b) {
  a.problem.drift(current, y_lag, a.mu, b);
  if (a.taming) scheme::tame_drift(b, a.delta, a.alpha, b);
  double resid = 0.0;
  for (std::size_t r = 0; r < offset.size(); ++r) {
    out[r] = offset[r] + a.theta_delta * b[r];
    resid = max_nan(resid, std::abs(out[r] - current[r]));
  }
  return resid;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serial reference

namespace serial {

void drift_field(const DriftArgs& args, const Ensemble& x, const Ensemble& y, Ensemble& out) {
  for (std::size_t i = 0; i < x.size(); ++i) drift_one(args, x.row(i), y.row(i), out.row(i));
}

void neutral_update(const NoiseArgs& args, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, const Ensemble& drift, const Ensemble& dB,
                    Ensemble& out) {
  NeutralScratch scratch(base.dim());
  for (std::size_t i = 0; i < base.size(); ++i) {
    neutral_update_one(args, base.row(i), lead.row(i), lag.row(i), drift.row(i), dB.row(i),
                       out.row(i), scratch);
  }
}

void neutral_offset(const model::Problem& problem, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, Ensemble& out) {
  NeutralScratch scratch(base.dim());
  for (std::size_t i = 0; i < base.size(); ++i) {
    neutral_offset_one(problem, base.row(i), lead.row(i), lag.row(i), out.row(i), scratch);
  }
}

double picard_map(const SweepArgs& args, const Ensemble& offset, const Ensemble& y_lag,
                  const Ensemble& current, Ensemble& out) {
  std::vector<double> b(offset.dim());
  double resid = 0.0;
  for (std::size_t i = 0; i < offset.size(); ++i) {
    resid = max_nan(resid, picard_one(args, offset.row(i), y_lag.row(i), current.row(i),
                                      out.row(i), b));
  }
  return resid;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP

namespace omp {

void drift_field(const DriftArgs& args, const Ensemble& x, const Ensemble& y, Ensemble& out) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    drift_one(args, x.row(row), y.row(row), out.row(row));
  }
}

void neutral_update(const NoiseArgs& args, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, const Ensemble& drift, const Ensemble& dB,
                    Ensemble& out) {
  const auto n = static_cast<std::ptrdiff_t>(base.size());
#pragma omp parallel
  {
    NeutralScratch scratch(base.dim());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      neutral_update_one(args, base.row(row), lead.row(row), lag.row(row), drift.row(row),
                         dB.row(row), out.row(row), scratch);
    }
  }
}

void neutral_offset(const model::Problem& problem, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, Ensemble& out) {
  const auto n = static_cast<std::ptrdiff_t>(base.size());
#pragma omp parallel
  {
    NeutralScratch scratch(base.dim());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      neutral_offset_one(problem, base.row(row), lead.row(row), lag.row(row), out.row(row),
                         scratch);
    }
  }
}

double picard_map(const SweepArgs& args, const Ensemble& offset, const Ensemble& y_lag,
                  const Ensemble& current, Ensemble& out) {
  const auto n = static_cast<std::ptrdiff_t>(offset.size());
  // Per-particle residuals are reduced serially afterwards; max is exact, but
  // this keeps NaN propagation identical to the serial loop.
  std::vector<double> resid(offset.size());
#pragma omp parallel
  {
    std::vector<double> b(offset.dim());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      resid[row] = picard_one(args, offset.row(row), y_lag.row(row), current.row(row),
                              out.row(row), b);
    }
  }
  double r = 0.0;
  for (double v : resid) r = max_nan(r, v);
  return r;
}

}  // namespace omp

}  // namespace mvfbm::kernels
