#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mvfbm/error.hpp"
#include "mvfbm/rng.hpp"
#include "mvfbm/scheme.hpp"
#include "oracles.hpp"

using namespace mvfbm;
using namespace mvfbm::scheme;

namespace {

Ensemble column(std::vector<double> v) {
  Ensemble e(v.size(), 1);
  std::copy(v.begin(), v.end(), e.data().begin());
  return e;
}

std::vector<double> values(const Ensemble& e) { return {e.data().begin(), e.data().end()}; }

SchemeConfig config_for(double theta, std::size_t m, std::size_t n) {
  SchemeConfig c;
  c.theta = theta;
  c.m = m;
  c.n_particles = n;
  return c;
}

// Fills every history slot with distinct values so lags are distinguishable.
EnsembleState seeded_state(std::size_t m, std::size_t n, std::uint64_t seed,
                           std::vector<std::vector<double>>& y_hist,
                           std::vector<std::vector<double>>& z_hist) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  EnsembleState state(m, n, 1);
  y_hist.assign(m + 1, std::vector<double>(n));
  z_hist.assign(m + 1, std::vector<double>(n));
  for (std::size_t lag = 0; lag <= m; ++lag) {
    for (std::size_t i = 0; i < n; ++i) {
      y_hist[lag][i] = u(rng);
      z_hist[lag][i] = u(rng);
    }
    state.set(lag, column(y_hist[lag]), column(z_hist[lag]));
  }
  return state;
}

double sup_abs(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST(TameDrift, Examples) {
  EXPECT_EQ(tame_drift(0.0, 0.01, 0.5), 0.0);
  const double t = tame_drift(1e6, 0.01, 0.5);
  EXPECT_DOUBLE_EQ(t, 1e6 / (1.0 + 0.1 * 1e6));
  EXPECT_LT(t, 10.0);
  std::vector<double> v{3.0, -4.0}, out(2);
  tame_drift(v, 0.25, 0.5, out);
  EXPECT_DOUBLE_EQ(out[0] / v[0], out[1] / v[1]);
  EXPECT_GT(out[0] / v[0], 0.0);
  EXPECT_DOUBLE_EQ(out[0], 3.0 / (1.0 + 0.5 * 5.0));
}

TEST(TameDrift, BoundAndErrorProperties) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> logmag(-6, 8), logdelta(-8, -0.01), alpha(0.01, 0.5);
  for (int i = 0; i < 20000; ++i) {
    const double b = (i % 2 ? -1 : 1) * std::pow(10.0, logmag(rng));
    const double delta = std::pow(10.0, logdelta(rng));
    const double a = alpha(rng);
    const double bd = tame_drift(b, delta, a);
    EXPECT_LE(std::abs(bd), std::min(std::pow(delta, -a), std::abs(b)));
    const double eps = std::numeric_limits<double>::epsilon();
    EXPECT_LE(std::abs(b - bd), std::pow(delta, a) * b * b * (1 + 4 * eps) + 4 * eps * std::abs(b));
  }
}

TEST(Geometry, Validation) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto g = make_geometry(p, config_for(1, 16, 4));
  EXPECT_DOUBLE_EQ(g.delta, 1.0 / 16);
  EXPECT_EQ(g.n_steps, 32u);
  auto bad = config_for(1.5, 16, 4);
  bad.alpha = 0.7;
  try {
    make_geometry(p, bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.violations().size(), 2u);
  }
  auto q = p;
  q.horizon = 2.5;
  try {
    make_geometry(q, config_for(1, 7, 4));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("17.5"), std::string::npos);
  }
  EXPECT_THROW(make_geometry(p, config_for(1, 1, 4)), ConfigError);
}

TEST(Drivers, CoarseningIdentities) {
  std::vector<double> fine(16);
  std::iota(fine.begin(), fine.end(), 1.0);
  EXPECT_EQ(coarsen_driver(fine, 1), fine);
  EXPECT_EQ(coarsen_driver(coarsen_driver(fine, 2), 4), coarsen_driver(fine, 8));
  EXPECT_EQ(coarsen_driver(fine, 8), (std::vector<double>{36, 100}));
  EXPECT_THROW(coarsen_driver(fine, 3), DomainError);
}

TEST(Drivers, CoarsenedMatchesCoarseGridPath) {
  const auto p = model::find_problem("cubic-mf").problem;
  const fbm::TimeGrid fine(1.0 / 64, 128);
  const auto drivers = generate_drivers(p, 3, fine, 5, 2);
  const fbm::CirculantGenerator gen(fine, p.hurst);
  const auto coarse = coarsen_driver(drivers, 8);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto path = gen.sample(5, stream_id({2, i, 0}));
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_NEAR(coarse.path(i, 0)[k], path.values[8 * k + 8] - path.values[8 * k], 1e-14);
    }
  }
}

TEST(StepExplicit, CubicMfOneStepOracle) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto cfg = config_for(0.0, 4, 2);
  std::vector<std::vector<double>> yh, zh;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto state = seeded_state(4, 2, seed, yh, zh);
    const std::vector<double> dB{0.137, -0.291};
    step_explicit(state, p, cfg, column(dB));
    const auto expected = oracle::cubic_mf_explicit_step(yh[0], yh[3], yh[4], dB, 0.25, 0.5);
    const auto got = values(state.y(0));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got[i], expected[i], 1e-14);
    EXPECT_EQ(state.k(), 1);
  }
}

TEST(StepExplicit, DegenerateCases) {
  model::LinearCoefficients k;
  k.a = k.c = k.e = 0.0;
  k.lambda = 0.0;
  k.s0 = 0.7;
  const auto noise = model::make_linear_problem("n", k);
  std::vector<std::vector<double>> yh, zh;
  auto state = seeded_state(4, 3, 9, yh, zh);
  const std::vector<double> dB{0.1, -0.2, 0.3};
  step_explicit(state, noise, config_for(0, 4, 3), column(dB));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(state.y(0)(i, 0), yh[0][i] + 0.7 * dB[i]);

  k.lambda = 0.4;
  k.s0 = 0.0;
  const auto neutral = model::make_linear_problem("d", k);
  state = seeded_state(4, 3, 10, yh, zh);
  step_explicit(state, neutral, config_for(0, 4, 3), column(dB));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(state.y(0)(i, 0) - 0.4 * yh[3][i], yh[0][i] - 0.4 * yh[4][i], 1e-15);
  }
  EXPECT_THROW(step_explicit(state, neutral, config_for(0.5, 4, 3), column(dB)), DomainError);
}

TEST(StepSplit, ConstantWithoutDriftOrNoise) {
  model::LinearCoefficients k;
  k.a = k.c = k.e = k.lambda = k.s0 = 0.0;
  const auto p = model::make_linear_problem("zero", k);
  std::vector<std::vector<double>> yh, zh;
  const auto state = seeded_state(4, 3, 4, yh, zh);
  const auto z = step_split(state, p, config_for(1, 4, 3), column({1, 2, 3}));
  EXPECT_EQ(values(z), zh[0]);
}

TEST(ImplicitStage, NoDriftIsOneUpdate) {
  model::LinearCoefficients k;
  k.a = k.c = k.e = 0.0;
  k.lambda = 0.3;
  const auto p = model::make_linear_problem("d", k);
  std::vector<std::vector<double>> yh, zh;
  const auto state = seeded_state(4, 3, 6, yh, zh);
  const std::vector<double> z{0.2, -0.4, 0.9};
  PicardStats stats;
  const auto y = implicit_stage_solve(state, column(z), p, config_for(1, 4, 3), &stats);
  EXPECT_EQ(stats.iterations, 1u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(y(i, 0), 0.3 * yh[3][i] + z[i] - 0.3 * zh[3][i]);
  }
}

TEST(ImplicitStage, ScalarLinearFixedPoint) {
  model::LinearCoefficients k;
  k.a = -2.0;
  k.c = k.e = k.lambda = 0.0;
  const auto p = model::make_linear_problem("lin", k);
  auto cfg = config_for(1.0, 4, 1);
  cfg.taming = false;
  std::vector<std::vector<double>> yh, zh;
  const auto state = seeded_state(4, 1, 8, yh, zh);
  PicardStats stats;
  const auto y = implicit_stage_solve(state, column({1.3}), p, cfg, &stats);
  EXPECT_NEAR(y(0, 0), 1.3 / (1.0 + 2.0 * 0.25), 1e-12);
  EXPECT_GT(stats.iterations, 1u);
  EXPECT_LE(stats.residual, cfg.picard_tol);
}

TEST(ImplicitStage, MatchesDampedNewton) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto cfg = config_for(1.0, 8, 4);
  std::vector<std::vector<double>> yh, zh;
  for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
    const auto state = seeded_state(8, 4, seed, yh, zh);
    const std::vector<double> z{0.8, -1.2, 1.9, 0.1};
    const auto y = implicit_stage_solve(state, column(z), p, cfg);

    Eigen::VectorXd c(4), lag(4), start(4);
    for (int i = 0; i < 4; ++i) {
      c[i] = 0.25 * yh[7][i] + z[i] - 0.25 * zh[7][i];
      lag[i] = yh[7][i];
      start[i] = yh[0][i];
    }
    const auto newton = oracle::damped_newton(start, c, lag, 1.0, 0.125, 0.5);
    ASSERT_LT(oracle::cubic_mf_implicit_residual(newton, c, lag, 1.0, 0.125, 0.5)
                  .lpNorm<Eigen::Infinity>(),
              1e-13);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(y(i, 0), newton[i], 1e-10);
  }
}

TEST(ImplicitStage, IterationCapRaisesSolverError) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto cfg = config_for(1.0, 4, 4);
  cfg.picard_max_iters = 1;
  std::vector<std::vector<double>> yh, zh;
  const auto state = seeded_state(4, 4, 3, yh, zh);
  try {
    implicit_stage_solve(state, column({0.8, -1.2, 1.9, 0.1}), p, cfg);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_GT(e.last_residual(), cfg.picard_tol);
  }
}

TEST(InitialState, HistoryAndZ0) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto cfg = config_for(1.0, 4, 3);
  const auto s = initial_state(p, cfg);
  EXPECT_EQ(s.y(4)(0, 0), 0.5);
  EXPECT_EQ(s.y(2)(1, 0), 0.75);
  EXPECT_EQ(s.z(2)(1, 0), 0.75);
  EXPECT_EQ(s.y(0)(2, 0), 1.0);
  const double b = oracle::CubicMf::tamed(oracle::CubicMf::drift(1.0, 0.5, 1.0), 0.25, 0.5);
  EXPECT_NEAR(s.z(0)(0, 0), 1.0 - 0.25 * b, 1e-15);
}

TEST(Simulate, ThetaZeroSplitEqualsDirect) {
  for (const char* name : {"cubic-mf", "linear", "pure-delay-cubic"}) {
    const auto p = model::find_problem(name).problem;
    const auto cfg = config_for(0.0, 16, 8);
    const auto g = make_geometry(p, cfg);
    const auto drivers = generate_drivers(p, 8, fbm::TimeGrid(g.delta, g.n_steps), 3, 0);
    const auto split = simulate(p, cfg, drivers);
    const auto direct = simulate_explicit(p, cfg, drivers);
    EXPECT_EQ(split.y, direct.y) << name;
  }
}

TEST(Simulate, GridIdentityHolds) {
  const auto p = model::find_problem("cubic-mf").problem;
  for (double theta : {0.5, 1.0}) {
    const auto cfg = config_for(theta, 8, 16);
    const auto sim = simulate(p, cfg);
    const double delta = sim.delta();
    const std::size_t m = 8;
    auto hist = [&](const std::vector<double>& v, std::ptrdiff_t k, std::size_t i) {
      if (k >= 0) return v[static_cast<std::size_t>(k) * 16 + i];
      return 1.0 + static_cast<double>(k) * delta / 2.0;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k <= sim.n_steps(); ++k) {
      std::vector<double> col(sim.column(k).begin(), sim.column(k).end());
      const double mean = oracle::CubicMf::mean(col);
      const auto kk = static_cast<std::ptrdiff_t>(k);
      const auto lag = kk - static_cast<std::ptrdiff_t>(m);
      for (std::size_t i = 0; i < 16; ++i) {
        const double y = hist(sim.y, kk, i);
        const double yl = hist(sim.y, lag, i);
        const double b = oracle::CubicMf::tamed(oracle::CubicMf::drift(y, yl, mean), delta, 0.5);
        const double lhs = y - 0.25 * yl - theta * delta * b;
        const double rhs = hist(sim.z, kk, i) - 0.25 * hist(sim.z, lag, i);
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
    EXPECT_LE(worst, cfg.picard_tol) << "theta " << theta;
  }
}

TEST(Simulate, NoiseOnlyIsScaledFbm) {
  const auto p = model::find_problem("noise-only").problem;
  const auto cfg = config_for(0.0, 32, 4);
  const auto sim = simulate(p, cfg);
  const fbm::CirculantGenerator gen(fbm::TimeGrid(sim.delta(), sim.n_steps()), p.hurst);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto path = gen.sample(cfg.seed, stream_id({0, i, 0}));
    for (std::size_t k = 0; k <= sim.n_steps(); ++k) {
      EXPECT_NEAR(sim.value(k, i), 1.0 + 0.5 * path.values[k], 1e-13);
    }
  }
}

TEST(Simulate, Deterministic) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto cfg = config_for(1.0, 16, 8);
  EXPECT_EQ(simulate(p, cfg).y, simulate(p, cfg).y);
  auto other = cfg;
  other.seed = 2;
  EXPECT_NE(simulate(p, cfg).y, simulate(p, other).y);
}

TEST(Simulate, ExchangeableUnderPermutation) {
  const auto p = model::find_problem("cubic-mf").problem;
  std::mt19937_64 rng(4);
  for (double theta : {0.0, 0.5, 1.0}) {
    const auto cfg = config_for(theta, 8, 12);
    const auto g = make_geometry(p, cfg);
    const auto drivers = generate_drivers(p, 12, fbm::TimeGrid(g.delta, g.n_steps), 8, 0);
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = simulate(p, cfg, drivers);
    const auto b = simulate(p, cfg, drivers.permuted(perm));
    for (std::size_t k = 0; k <= a.n_steps(); ++k) {
      for (std::size_t j = 0; j < 12; ++j) ASSERT_EQ(b.value(k, j), a.value(k, perm[j]));
    }
  }
}

TEST(Simulate, TamedStaysBoundedOverSeeds) {
  const auto p = model::find_problem("cubic-mf").problem;
  std::size_t untamed_overflow = 0;
  for (double theta : {0.0, 0.5, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      auto cfg = config_for(theta, 64, 64);
      cfg.seed = seed;
      const auto sim = simulate(p, cfg);
      ASSERT_LT(sup_abs(sim.y), 1e3) << "theta " << theta << " seed " << seed;
      if (theta == 0.0) {
        cfg.taming = false;
        try {
          if (sup_abs(simulate(p, cfg).y) >= 1e3) ++untamed_overflow;
        } catch (const DivergenceError&) {
          ++untamed_overflow;
        }
      }
    }
  }
  RecordProperty("untamed_overflows", static_cast<int>(untamed_overflow));
}

TEST(Simulate, UntamedExplicitDivergesAtCoarseStep) {
  auto p = model::find_problem("cubic-mf").problem;
  p.initial = [](double, std::span<double> out) { out[0] = 4.0; };
  p.horizon = 5.0;
  auto cfg = config_for(0.0, 2, 4);
  cfg.taming = false;
  EXPECT_THROW(simulate(p, cfg), DivergenceError);
  cfg.taming = true;
  EXPECT_NO_THROW(simulate(p, cfg));
}

TEST(Interpolant, LeftConstant) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto sim = simulate(p, config_for(1.0, 8, 3));
  const double d = sim.delta();
  for (std::size_t k : {0u, 3u, 15u, 16u}) {
    const auto at = piecewise_constant_interpolant(sim, p, k * d);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(at(i, 0), sim.value(k, i));
    if (k < 16) {
      const auto mid = piecewise_constant_interpolant(sim, p, (k + 0.5) * d);
      for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(mid(i, 0), sim.value(k, i));
    }
  }
  EXPECT_EQ(piecewise_constant_interpolant(sim, p, 0.3 * d)(1, 0), sim.value(0, 1));
  EXPECT_DOUBLE_EQ(piecewise_constant_interpolant(sim, p, -0.5)(0, 0), 0.75);
  EXPECT_THROW(piecewise_constant_interpolant(sim, p, -1.5), DomainError);
  EXPECT_THROW(piecewise_constant_interpolant(sim, p, 2.5), DomainError);
}
