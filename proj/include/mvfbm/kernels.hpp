#pragma once

#include <span>

#include "mvfbm/ensemble.hpp"
#include "mvfbm/exec.hpp"
#include "mvfbm/measure.hpp"
#include "mvfbm/model.hpp"

// Per-particle kernels of the scheme. `serial` is the reference
// implementation; `omp` splits the particle loop across threads with the same
// per-particle arithmetic, so both agree bit for bit.
namespace mvfbm::kernels {

struct DriftArgs {
  const model::Problem& problem;
  const measure::MeasureHandle& mu;
  double delta;
  double alpha;
  bool taming;
};

struct NoiseArgs {
  const model::Problem& problem;
  std::span<const double> sigma;  // d x d
  double delta;
};

struct SweepArgs {
  const model::Problem& problem;
  const measure::MeasureHandle& mu;  // measure of `current`
  double theta_delta;
  double delta;  // step size, for the taming factor
  double alpha;
  bool taming;
};

namespace serial {
/// out_i = b_Delta(x_i, y_i, mu) (or b itself when taming is off).
void drift_field(const DriftArgs& args, const Ensemble& x, const Ensemble& y,
                 Ensemble& out);
/// out_i = base_i + (D(lead_i) - D(lag_i)) + drift_i * delta + sigma dB_i.
/// Shared by the direct recursion (base = Y) and the split-step z update.
void neutral_update(const NoiseArgs& args, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, const Ensemble& drift, const Ensemble& dB,
                    Ensemble& out);
/// out_i = base_i + (D(lead_i) - D(lag_i)); the constant part of the implicit stage.
void neutral_offset(const model::Problem& problem, const Ensemble& base,
                    const Ensemble& lead, const Ensemble& lag, Ensemble& out);
/// One Picard map evaluation of the implicit stage:
/// G_i = offset_i + theta Delta b_Delta(current_i, y_lag_i, mu).
/// Returns max_i,c |G - current|.
double picard_map(const SweepArgs& args, const Ensemble& offset, const Ensemble& y_lag,
                  const Ensemble& current, Ensemble& out);
}  // namespace serial

namespace omp {
void drift_field(const DriftArgs& args, const Ensemble& x, const Ensemble& y,
                 Ensemble& out);
void neutral_update(const NoiseArgs& args, const Ensemble& base, const Ensemble& lead,
                    const Ensemble& lag, const Ensemble& drift, const Ensemble& dB,
                    Ensemble& out);
void neutral_offset(const model::Problem& problem, const Ensemble& base,
                    const Ensemble& lead, const Ensemble& lag, Ensemble& out);
double picard_map(const SweepArgs& args, const Ensemble& offset, const Ensemble& y_lag,
                  const Ensemble& current, Ensemble& out);
}  // namespace omp

inline void drift_field(Exec exec, const DriftArgs& args, const Ensemble& x,
                        const Ensemble& y, Ensemble& out) {
  exec == Exec::parallel ? omp::drift_field(args, x, y, out)
                         : serial::drift_field(args, x, y, out);
}

inline void neutral_update(Exec exec, const NoiseArgs& args, const Ensemble& base,
                           const Ensemble& lead, const Ensemble& lag, const Ensemble& drift,
                           const Ensemble& dB, Ensemble& out) {
  exec == Exec::parallel ? omp::neutral_update(args, base, lead, lag, drift, dB, out)
                         : serial::neutral_update(args, base, lead, lag, drift, dB, out);
}

inline void neutral_offset(Exec exec, const model::Problem& problem, const Ensemble& base,
                           const Ensemble& lead, const Ensemble& lag, Ensemble& out) {
  exec == Exec::parallel ? omp::neutral_offset(problem, base, lead, lag, out)
                         : serial::neutral_offset(problem, base, lead, lag, out);
}

inline double picard_map(Exec exec, const SweepArgs& args, const Ensemble& offset,
                         const Ensemble& y_lag, const Ensemble& current, Ensemble& out) {
  return exec == Exec::parallel ? omp::picard_map(args, offset, y_lag, current, out)
                                : serial::picard_map(args, offset, y_lag, current, out);
}

}  // namespace mvfbm::kernels
