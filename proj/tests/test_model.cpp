#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mvfbm/error.hpp"
#include "mvfbm/model.hpp"
#include "oracles.hpp"

using namespace mvfbm;
using namespace mvfbm::model;

namespace {

using ScalarDrift = std::function<double(double, double, const MeasureHandle&)>;
using ScalarNeutral = std::function<double(double)>;
using ScalarSigma = std::function<double(const MeasureHandle&)>;

Problem scalar_problem(ScalarDrift b, ScalarNeutral d, ScalarSigma s) {
  Problem p;
  p.name = "test";
  p.drift = [b](std::span<const double> x, std::span<const double> y, const MeasureHandle& mu,
                std::span<double> out) { out[0] = b(x[0], y[0], mu); };
  p.neutral = [d](std::span<const double> y, std::span<double> out) { out[0] = d(y[0]); };
  p.diffusion = [s](const MeasureHandle& mu, std::span<double> out) { out[0] = s(mu); };
  p.initial = [](double, std::span<double> out) { out[0] = 1.0; };
  return p;
}

double zero_drift(double, double, const MeasureHandle&) { return 0.0; }
double const_sigma(const MeasureHandle&) { return 0.4; }

ScanOptions budget(std::size_t n, double lo = -5.0, double hi = 5.0) {
  ScanOptions s;
  s.budget = n;
  s.box_lo = lo;
  s.box_hi = hi;
  return s;
}

std::vector<double> small_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(NeutralContraction, LinearPasses) {
  AssumptionConstants k;
  k.lambda = 0.5;
  const auto p = scalar_problem(zero_drift, [](double y) { return 0.5 * y; }, const_sigma);
  const auto r = validate_neutral_contraction(p, k, budget(5000));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.worst_ratio(), 0.5, 1e-12);
}

TEST(NeutralContraction, IdentityFails) {
  AssumptionConstants k;
  k.lambda = 0.9;
  const auto p = scalar_problem(zero_drift, [](double y) { return y; }, const_sigma);
  const auto r = validate_neutral_contraction(p, k, budget(5000));
  EXPECT_FALSE(r.passed());
  EXPECT_NEAR(r.worst_ratio(), 1.0, 1e-12);
  EXPECT_FALSE(r.inequalities.back().witness.empty());
}

TEST(NeutralContraction, OffsetAtOriginFails) {
  AssumptionConstants k;
  k.lambda = 0.5;
  const auto p = scalar_problem(zero_drift, [](double y) { return 0.1 + 0.5 * y; }, const_sigma);
  EXPECT_FALSE(validate_neutral_contraction(p, k, budget(100)).passed());
}

TEST(NeutralContraction, SineAgainstDenseGrid) {
  auto D = [](double y) { return 0.3 * std::sin(y); };
  double oracle_max = 0.0;
  const int n = 4001;
  for (int i = 0; i + 1 < n; ++i) {
    const double a = -10.0 + 20.0 * i / (n - 1);
    const double b = -10.0 + 20.0 * (i + 1) / (n - 1);
    oracle_max = std::max(oracle_max, std::abs(D(a) - D(b)) / (b - a));
  }
  EXPECT_LE(oracle_max, 0.3);
  EXPECT_GT(oracle_max, 0.2999);

  AssumptionConstants k;
  k.lambda = 0.3;
  const auto r = validate_neutral_contraction(scalar_problem(zero_drift, D, const_sigma), k,
                                              budget(20000, -10, 10));
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.worst_ratio(), oracle_max + 1e-9);
}

TEST(OneSided, MonotoneCubicPasses) {
  AssumptionConstants k;
  k.K2 = 1.0;
  k.K3 = 1.0;
  k.l = 2.0;
  const auto p = scalar_problem([](double x, double y, const MeasureHandle&) { return -x * x * x + y; },
                                [](double) { return 0.0; }, const_sigma);
  const auto r = validate_one_sided(p, k, budget(20000));
  EXPECT_TRUE(r.inequalities[0].passed) << r.inequalities[0].observed;
}

TEST(OneSided, SquareFailsWithWitness) {
  auto b = [](double x) { return x * x; };
  bool oracle_found = false;
  for (double x = 1.0; x <= 100.0 && !oracle_found; x += 1.0) {
    const double xb = x - 1.0;
    oracle_found = (x - xb) * (b(x) - b(xb)) > 1.0 * (x - xb) * (x - xb);
  }
  ASSERT_TRUE(oracle_found);

  AssumptionConstants k;
  k.K2 = 1.0;
  k.K3 = 100.0;
  const auto p = scalar_problem([b](double x, double, const MeasureHandle&) { return b(x); },
                                [](double) { return 0.0; }, const_sigma);
  const auto r = validate_one_sided(p, k, budget(5000, 0, 100));
  EXPECT_FALSE(r.inequalities[0].passed);
  EXPECT_GT(r.inequalities[0].observed, 1.0);
  EXPECT_FALSE(r.inequalities[0].witness.empty());
}

TEST(OneSided, MeanTermBoundedByWasserstein) {
  auto b = [](double x, double, const MeasureHandle& mu) { return -x * x * x + mu.mean()[0]; };
  // <x - xb, mean(mu) - mean(nu)> <= |x - xb| W <= (|x - xb|^2 + W^2) / 2
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = size(rng);
    const auto a = small_cloud(rng, n, -5, 5);
    const auto c = small_cloud(rng, n, -5, 5);
    const double x = u(rng), xb = u(rng);
    const MeasureHandle mu(a, n, 1, measure::WassersteinOrder(2));
    const MeasureHandle nu(c, n, 1, measure::WassersteinOrder(2));
    const double w = oracle::brute_force_wasserstein(a, c, 2.0);
    const double lhs = (x - xb) * (b(x, 0, mu) - b(xb, 0, nu));
    EXPECT_LE(lhs, 0.5 * ((x - xb) * (x - xb) + w * w) + 1e-12);
  }
  AssumptionConstants k;
  k.K2 = 0.5;
  k.K3 = 1.0;
  k.l = 2.0;
  const auto r = validate_one_sided(scalar_problem(b, [](double) { return 0.0; }, const_sigma), k,
                                    budget(20000));
  EXPECT_TRUE(r.inequalities[0].passed) << r.inequalities[0].observed;
}

TEST(Sigma, ConstantPassesWithZeroK4) {
  AssumptionConstants k;
  k.K4 = 0.0;
  k.K5 = 0.4;
  k.K6 = 0.4;
  const auto r = validate_sigma(scalar_problem(zero_drift, [](double) { return 0.0; }, const_sigma),
                                k, budget(5000));
  EXPECT_TRUE(r.passed());
}

TEST(Sigma, ReverseTriangle) {
  auto s = [](const MeasureHandle& mu) { return 0.4 + 0.1 * mu.distance_to_dirac0(); };
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = size(rng);
    const auto a = small_cloud(rng, n, -5, 5);
    const auto c = small_cloud(rng, n, -5, 5);
    const MeasureHandle mu(a, n, 1, measure::WassersteinOrder(2));
    const MeasureHandle nu(c, n, 1, measure::WassersteinOrder(2));
    EXPECT_LE(std::abs(s(mu) - s(nu)), 0.1 * oracle::brute_force_wasserstein(a, c, 2.0) + 1e-12);
  }
  AssumptionConstants k;
  k.K4 = 0.1;
  k.K5 = 0.4;
  k.K6 = 0.4;
  const auto r =
      validate_sigma(scalar_problem(zero_drift, [](double) { return 0.0; }, s), k, budget(20000));
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.inequalities[0].observed, 0.1 * (1 + 1e-9));
}

TEST(Sigma, SquaredMeanFailsGrowth) {
  auto s = [](const MeasureHandle& mu) { return mu.mean()[0] * mu.mean()[0]; };
  // clouds concentrated at c: sigma = c^2, W(mu, delta_0) = |c|
  double prev = 0.0;
  for (double c : {1.0, 10.0, 100.0, 1000.0}) {
    const std::vector<double> cloud(4, c);
    const MeasureHandle mu(cloud, 4, 1, measure::WassersteinOrder(2));
    const double ratio = s(mu) / (1.0 + mu.distance_to_dirac0());
    EXPECT_GT(ratio, prev);
    prev = ratio;
  }
  AssumptionConstants k;
  k.K4 = 100.0;
  k.K5 = 1.0;
  k.K6 = 1.0;
  const auto r = validate_sigma(scalar_problem(zero_drift, [](double) { return 0.0; }, s), k,
                                budget(5000, -20, 20));
  EXPECT_FALSE(r.inequalities[1].passed);
  EXPECT_FALSE(r.inequalities[1].witness.empty());
}

TEST(InitialSegment, LinearSegment) {
  const auto entry = find_problem("cubic-mf");
  AssumptionConstants k = entry.constants;
  EXPECT_TRUE(validate_initial_segment(entry.problem, k, budget(2000)).passed());
  k.K0 = 0.4;
  EXPECT_FALSE(validate_initial_segment(entry.problem, k, budget(2000)).passed());
}

TEST(Constants, Check) {
  AssumptionConstants k;
  k.lambda = 1.0;
  EXPECT_THROW(k.check(), ConfigError);
  k.lambda = 0.5;
  k.l = 0.5;
  EXPECT_THROW(k.check(), ConfigError);
  k.l = 1.0;
  k.K3 = -1.0;
  EXPECT_THROW(k.check(), ConfigError);
}

TEST(Catalog, ContainsRequiredEntries) {
  const auto cat = builtin_catalog();
  for (const char* name : {"cubic-mf", "linear", "pure-delay-cubic", "noise-only", "cubic-local"}) {
    EXPECT_NO_THROW(find_problem(name)) << name;
  }
  EXPECT_THROW(find_problem("nope"), ConfigError);
  const auto cubic = find_problem("cubic-mf");
  EXPECT_LE(cubic.constants.K2, 2.0);
  EXPECT_EQ(cubic.constants.l, 2.0);
  EXPECT_EQ(cubic.problem.tau, 1.0);
}

TEST(Catalog, CubicMfCoefficientsMatchHandFormulas) {
  const auto p = find_problem("cubic-mf").problem;
  const std::vector<double> cloud{0.3, -1.1, 2.0};
  const MeasureHandle mu(cloud, 3, 1, measure::WassersteinOrder(2));
  std::vector<double> out(1);
  for (double x : {-2.0, 0.0, 1.5}) {
    for (double y : {-1.0, 0.7}) {
      p.drift(std::vector<double>{x}, std::vector<double>{y}, mu, out);
      EXPECT_NEAR(out[0], oracle::CubicMf::drift(x, y, oracle::CubicMf::mean(cloud)), 1e-15);
    }
    p.neutral(std::vector<double>{x}, out);
    EXPECT_EQ(out[0], oracle::CubicMf::neutral(x));
  }
  p.diffusion(mu, out);
  EXPECT_NEAR(out[0], oracle::CubicMf::sigma(cloud), 1e-15);
  p.initial(-0.5, out);
  EXPECT_DOUBLE_EQ(out[0], 0.75);
}

TEST(Catalog, EveryEntryPassesEveryValidator) {
  for (const auto& entry : builtin_catalog()) {
    for (const auto& rep : validate_all(entry.problem, entry.constants, budget(100000))) {
      EXPECT_TRUE(rep.passed()) << entry.name << ": " << rep.check;
    }
  }
}

TEST(Catalog, TamedDriftKeepsOneSidedConstant) {
  for (const auto& entry : builtin_catalog()) {
    for (double delta : {0.5, 1.0 / 16, 1.0 / 256}) {
      ScanOptions s = budget(20000);
      s.taming_delta = delta;
      s.taming_alpha = 0.5;
      const auto r = validate_one_sided(entry.problem, entry.constants, s);
      EXPECT_TRUE(r.inequalities[0].passed)
          << entry.name << " delta " << delta << " observed " << r.inequalities[0].observed;
    }
  }
}
