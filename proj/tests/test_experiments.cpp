#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mvfbm/error.hpp"
#include "mvfbm/experiments.hpp"

using namespace mvfbm;
using namespace mvfbm::experiments;

namespace {

ErrorTable table_of(const std::vector<std::pair<double, double>>& rows) {
  ErrorTable t;
  t.param_name = "delta";
  for (auto [x, e] : rows) t.rows.push_back({x, e, 0.0, 1, 0});
  return t;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.scheme.n_particles = 8;
  c.scheme.m = 8;
  c.m_ladder = {4, 8, 16};
  c.m_ref = 64;
  c.n_ladder = {2, 4, 8};
  c.n_ref = 32;
  c.n_mc = 10;
  return c;
}

model::Problem still_problem() {
  model::LinearCoefficients k;
  k.a = k.c = k.e = k.lambda = k.s0 = 0.0;
  k.xi0 = -1.5;
  return model::make_linear_problem("still", k);
}

}  // namespace

TEST(FitRate, Examples) {
  const auto a = fit_rate(table_of({{0.5, 0.5}, {0.25, 0.25}, {0.125, 0.125}}));
  EXPECT_NEAR(a.slope, 1.0, 1e-12);
  EXPECT_NEAR(a.r2, 1.0, 1e-12);
  EXPECT_EQ(a.n_rows, 3u);
  std::vector<std::pair<double, double>> rows;
  for (double d : {0.5, 0.1, 0.01}) rows.push_back({d, 3.0 * std::sqrt(d)});
  const auto b = fit_rate(table_of(rows));
  EXPECT_NEAR(b.slope, 0.5, 1e-12);
  EXPECT_NEAR(b.intercept, std::log(3.0), 1e-12);
  EXPECT_THROW(fit_rate(table_of({{0.5, 0.1}})), DomainError);
  EXPECT_THROW(fit_rate(table_of({{0.5, 0.1}, {0.25, 0.0}})), DomainError);
}

TEST(FitRate, SkipsFlaggedRows) {
  auto t = table_of({{0.5, 0.5}, {0.25, 0.25}, {0.125, 7.0}});
  t.rows[2].n_failed = 1;
  const auto r = fit_rate(t);
  EXPECT_EQ(r.n_rows, 2u);
  EXPECT_NEAR(r.slope, 1.0, 1e-12);
}

TEST(ExperimentConfig, Violations) {
  const auto p = model::find_problem("cubic-mf").problem;
  EXPECT_TRUE(small_config().violations(p).empty());
  auto c = small_config();
  c.m_ladder = {5, 16, 8};
  c.p = 1.2;
  c.n_ladder = {64};
  const auto bad = c.violations(p);
  EXPECT_EQ(bad.size(), 4u);
  EXPECT_THROW(c.validate(p), ConfigError);
}

TEST(StrongRate, NoiseOnlyHasZeroError) {
  const auto p = model::find_problem("noise-only").problem;
  const auto r = strong_rate_vs_dt(p, small_config());
  ASSERT_EQ(r.table.rows.size(), 3u);
  for (const auto& row : r.table.rows) EXPECT_LT(row.error, 1e-12) << row.param;
}

TEST(StrongRate, ReferenceLadderIsExact) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto c = small_config();
  c.m_ladder = {c.m_ref};
  const auto r = strong_rate_vs_dt(p, c);
  ASSERT_EQ(r.table.rows.size(), 1u);
  EXPECT_EQ(r.table.rows[0].error, 0.0);
  EXPECT_FALSE(r.fitted);
}

TEST(StrongRate, Reproducible) {
  const auto p = model::find_problem("cubic-mf").problem;
  const auto a = strong_rate_vs_dt(p, small_config());
  const auto b = strong_rate_vs_dt(p, small_config());
  ASSERT_EQ(a.table.rows.size(), b.table.rows.size());
  for (std::size_t i = 0; i < a.table.rows.size(); ++i) {
    EXPECT_EQ(a.table.rows[i].error, b.table.rows[i].error);
    EXPECT_EQ(a.table.rows[i].stderr_, b.table.rows[i].stderr_);
  }
  auto c = small_config();
  c.scheme.seed = 99;
  EXPECT_NE(strong_rate_vs_dt(p, c).table.rows[0].error, a.table.rows[0].error);
}

TEST(StrongRate, StandardErrorShrinksWithReplications) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto c = small_config();
  c.m_ladder = {4, 8};
  c.m_ref = 32;
  c.n_mc = 100;
  const auto a = strong_rate_vs_dt(p, c);
  c.n_mc = 200;
  const auto b = strong_rate_vs_dt(p, c);
  for (std::size_t i = 0; i < a.table.rows.size(); ++i) {
    const double ratio = a.table.rows[i].stderr_ / b.table.rows[i].stderr_;
    EXPECT_NEAR(ratio, std::sqrt(2.0), 0.25) << a.table.rows[i].param;
  }
}

TEST(StrongRate, ErrorDecreasesWithStep) {
  for (const char* name : {"cubic-mf", "linear"}) {
    const auto p = model::find_problem(name).problem;
    auto c = small_config();
    c.scheme.n_particles = 16;
    c.m_ladder = {4, 8, 16, 32};
    c.m_ref = 128;
    c.n_mc = 200;
    const auto r = strong_rate_vs_dt(p, c);
    // rows sorted by Delta: finer steps first
    for (std::size_t i = 0; i + 1 < r.table.rows.size(); ++i) {
      const auto& fine = r.table.rows[i];
      const auto& coarse = r.table.rows[i + 1];
      const double se = std::hypot(fine.stderr_, coarse.stderr_);
      EXPECT_LE(fine.error, coarse.error + 2 * se) << name << " delta " << fine.param;
    }
  }
}

TEST(Chaos, ReferenceSizeIsExact) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto c = small_config();
  c.n_ladder = {c.n_ref};
  const auto r = poc_rate_vs_N(p, c);
  EXPECT_EQ(r.table.rows[0].error, 0.0);
}

TEST(Chaos, MeasureFreeCoefficientsDecouple) {
  const auto noise = poc_rate_vs_N(model::find_problem("noise-only").problem, small_config());
  for (const auto& row : noise.table.rows) EXPECT_EQ(row.error, 0.0);
  const auto local = poc_rate_vs_N(model::find_problem("cubic-local").problem, small_config());
  for (const auto& row : local.table.rows) EXPECT_LT(row.error, 1e-10);
}

TEST(Chaos, ErrorDropsWithN) {
  const auto p = model::find_problem("cubic-mf").problem;
  auto c = small_config();
  c.n_ladder = {4, 16};
  c.n_ref = 128;
  c.n_mc = 20;
  const auto r = poc_rate_vs_N(p, c);
  EXPECT_GT(r.table.rows[0].error, r.table.rows[1].error);
}

TEST(Moments, ConstantWithoutDriftOrNoise) {
  const auto rep = moment_bound_suite(still_problem(), small_config());
  for (const auto& row : rep.table.rows) EXPECT_DOUBLE_EQ(row.error, 1.5);
  EXPECT_EQ(rep.spread, 0.0);
  EXPECT_TRUE(rep.passed());
}

TEST(Moments, RejectsLowOrder) {
  auto c = small_config();
  c.p = 1.2;
  EXPECT_THROW(moment_bound_suite(model::find_problem("cubic-mf").problem, c), ConfigError);
}

TEST(Continuity, ZeroModulusWithoutDynamics) {
  const auto rep = continuity_modulus_suite(still_problem(), small_config());
  for (const auto& row : rep.table.rows) EXPECT_EQ(row.error, 0.0);
  EXPECT_FALSE(rep.fitted);
  EXPECT_FALSE(rep.passed());
}

TEST(Continuity, TargetAndTolerance) {
  auto c = small_config();
  c.scheme.alpha = 0.3;
  const auto rep = continuity_modulus_suite(model::find_problem("noise-only").problem, c);
  EXPECT_DOUBLE_EQ(rep.target, 0.7 * 2.0);
  EXPECT_DOUBLE_EQ(rep.tolerance, 0.3);
  ASSERT_TRUE(rep.fitted);
  EXPECT_GT(rep.rate.slope, 0.0);
}
