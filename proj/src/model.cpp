#include "mvfbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mvfbm/error.hpp"
#include "mvfbm/rng.hpp"
#include "mvfbm/scheme.hpp"

namespace mvfbm::model {

using measure::EmpiricalMeasure;

void AssumptionConstants::check() const {
  std::vector<std::string> bad;
  if (!(lambda > 0.0 && lambda < 1.0)) bad.push_back("lambda must lie in (0, 1)");
  if (!(l >= 1.0)) bad.push_back("l must be >= 1");
  const std::pair<const char*, double> ks[] = {{"K0", K0}, {"K2", K2}, {"K3", K3},
                                               {"K4", K4}, {"K5", K5}, {"K6", K6}};
  for (const auto& [name, v] : ks) {
    if (!(v >= 0.0 && std::isfinite(v))) bad.push_back(fmt::format("{} must be finite and >= 0", name));
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

bool ValidationReport::passed() const {
  return std::all_of(inequalities.begin(), inequalities.end(),
                     [](const InequalityResult& r) { return r.passed; });
}

double ValidationReport::worst_ratio() const {
  double w = 0.0;
  for (const auto& r : inequalities) w = std::max(w, r.observed);
  return w;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
  return s;
}

// One randomized scan point: states (x, y), (xb, yb) and two same-size clouds.
struct Sample {
  std::vector<double> x, y, xb, yb;
  std::vector<double> mu, nu;  // n x d
  std::size_t n = 1;
  double s = 0.0, t = 0.0;  // times in [-tau, 0]
};

std::vector<double> draw_cloud(std::mt19937_64& eng, std::size_t n, std::size_t d,
                               const ScanOptions& scan) {
  std::uniform_real_distribution<double> box(scan.box_lo, scan.box_hi);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> spread(0.0, 0.5 * (scan.box_hi - scan.box_lo));
  std::vector<double> center(d);
  for (auto& c : center) c = box(eng);
  const double w = spread(eng);
  std::vector<double> cloud(n * d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      cloud[j * d + c] = std::clamp(center[c] + w * unit(eng), scan.box_lo, scan.box_hi);
    }
  }
  return cloud;
}

Sample draw_sample(const Problem& p, const ScanOptions& scan, std::size_t index) {
  auto eng = make_engine(scan.seed, index);
  std::uniform_real_distribution<double> box(scan.box_lo, scan.box_hi);
  std::uniform_real_distribution<double> lag(-p.tau, 0.0);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, scan.max_cloud));
  Sample s;
  auto fill = [&](std::vector<double>& v) {
    v.resize(p.d);
    for (auto& e : v) e = box(eng);
  };
  fill(s.x);
  fill(s.y);
  fill(s.xb);
  fill(s.yb);
  if (index % 4 == 3) {
    s.xb = s.x;
    s.yb = s.y;
  }
  s.n = size(eng);
  s.mu = draw_cloud(eng, s.n, p.d, scan);
  s.nu = draw_cloud(eng, s.n, p.d, scan);
  s.s = lag(eng);
  s.t = lag(eng);
  return s;
}

std::string describe(const Sample& s) {
  return fmt::format("x={} y={} xbar={} ybar={} mu={} nu={} s={} t={}", s.x, s.y, s.xb, s.yb,
                     s.mu, s.nu, s.s, s.t);
}

double wq(const Problem& p, std::span<const double> a, std::span<const double> b,
          std::size_t n) {
  const EmpiricalMeasure mu({a.begin(), a.end()}, n, p.d);
  const EmpiricalMeasure nu({b.begin(), b.end()}, n, p.d);
  return measure::wasserstein_or_bound(mu, nu, p.q);
}

// lhs <= K * factor, as the smallest admissible K for this sample.
double ratio(double lhs, double factor) {
  if (std::isnan(lhs) || std::isnan(factor)) return std::numeric_limits<double>::infinity();
  if (factor > 0.0) return lhs / factor;
  return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

bool within(double observed, double declared) {
  return observed <= declared * (1.0 + 1e-9);
}

// Drift with optional taming, as the scan sees it.
struct DriftEval {
  const Problem& p;
  const ScanOptions& scan;
  std::vector<double> operator()(std::span<const double> x, std::span<const double> y,
                                 const MeasureHandle& mu) const {
    std::vector<double> out(p.d);
    p.drift(x, y, mu, out);
    if (scan.taming_delta) scheme::tame_drift(out, *scan.taming_delta, scan.taming_alpha, out);
    return out;
  }
};

std::vector<double> sigma_of(const Problem& p, const MeasureHandle& mu) {
  std::vector<double> out(p.d * p.d);
  p.diffusion(mu, out);
  return out;
}

std::vector<double> neutral_of(const Problem& p, std::span<const double> y) {
  std::vector<double> out(p.d);
  p.neutral(y, out);
  return out;
}

// Evaluates `eval(sample, ratios)` for every scan index and reduces each
// inequality to its maximum ratio in index order.
template <class Eval>
ValidationReport scan(std::string check, std::vector<std::pair<std::string, double>> ineqs,
                      const Problem& p, const ScanOptions& opts, Eval eval) {
  if (opts.budget < 1) throw DomainError("sampler budget must be >= 1");
  if (!(opts.box_lo < opts.box_hi)) throw DomainError("scan box must satisfy lo < hi");
  const std::size_t k = ineqs.size();
  const std::size_t budget = opts.budget;
  std::vector<double> ratios(budget * k);

  auto one = [&](std::ptrdiff_t idx) {
    const auto i = static_cast<std::size_t>(idx);
    const Sample s = draw_sample(p, opts, i);
    eval(s, std::span<double>(ratios.data() + i * k, k));
  };
  const auto n = static_cast<std::ptrdiff_t>(budget);
  if (opts.exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }

  ValidationReport report{std::move(check), budget, {}};
  for (std::size_t j = 0; j < k; ++j) {
    double worst = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < budget; ++i) {
      if (ratios[i * k + j] > worst) {
        worst = ratios[i * k + j];
        arg = i;
      }
    }
    InequalityResult r{ineqs[j].first, ineqs[j].second, worst, within(worst, ineqs[j].second), {}};
    if (!r.passed) r.witness = fmt::format("sample {}: {}", arg, describe(draw_sample(p, opts, arg)));
    report.inequalities.push_back(std::move(r));
  }
  return report;
}

}  // namespace

ValidationReport validate_neutral_contraction(const Problem& problem,
                                              const AssumptionConstants& constants,
                                              const ScanOptions& opts) {
  const std::vector<double> zero(problem.d, 0.0);
  const double d0 = norm(neutral_of(problem, zero));
  auto report = scan("neutral contraction", {{"|D(x) - D(xbar)| <= lambda |x - xbar|",
                                              constants.lambda}},
                     problem, opts, [&](const Sample& s, std::span<double> out) {
                       const double lhs =
                           dist(neutral_of(problem, s.x), neutral_of(problem, s.xb));
                       out[0] = ratio(lhs, dist(s.x, s.xb));
                     });
  InequalityResult origin{"D(0) = 0", 0.0, d0, d0 == 0.0, {}};
  if (!origin.passed) origin.witness = fmt::format("|D(0)| = {}", d0);
  report.inequalities.insert(report.inequalities.begin(), std::move(origin));
  return report;
}

ValidationReport validate_one_sided(const Problem& problem,
                                    const AssumptionConstants& constants,
                                    const ScanOptions& opts) {
  const DriftEval drift{problem, opts};
  const double l = constants.l;
  return scan(
      "one-sided and polynomial Lipschitz",
      {{"<x - D(y) - xbar + D(ybar), b - bbar> <= K2 (|x-xbar|^2 + |y-ybar|^2 + W^2)",
        constants.K2},
       {"|b - bbar| <= K3 [(1 + |x|^l + |xbar|^l + |y|^l + |ybar|^l)(|x-xbar| + |y-ybar|) + W]",
        constants.K3}},
      problem, opts, [&](const Sample& s, std::span<double> out) {
        const MeasureHandle mu(s.mu, s.n, problem.d, problem.q);
        const MeasureHandle nu(s.nu, s.n, problem.d, problem.q);
        const auto b = drift(s.x, s.y, mu);
        const auto bb = drift(s.xb, s.yb, nu);
        const auto dy = neutral_of(problem, s.y);
        const auto dyb = neutral_of(problem, s.yb);
        std::vector<double> lead(problem.d), diff(problem.d);
        for (std::size_t c = 0; c < problem.d; ++c) {
          lead[c] = s.x[c] - dy[c] - s.xb[c] + dyb[c];
          diff[c] = b[c] - bb[c];
        }
        const double w = wq(problem, s.mu, s.nu, s.n);
        const double dx = dist(s.x, s.xb);
        const double dyy = dist(s.y, s.yb);
        out[0] = ratio(dot(lead, diff), dx * dx + dyy * dyy + w * w);
        const double poly = 1.0 + std::pow(norm(s.x), l) + std::pow(norm(s.xb), l) +
                            std::pow(norm(s.y), l) + std::pow(norm(s.yb), l);
        out[1] = ratio(norm(diff), poly * (dx + dyy) + w);
      });
}

ValidationReport validate_sigma(const Problem& problem, const AssumptionConstants& constants,
                                const ScanOptions& opts) {
  const DriftEval drift{problem, opts};
  const std::vector<double> zero(problem.d, 0.0);
  auto report = scan(
      "diffusion and growth at the origin",
      {{"||sigma(mu) - sigma(nu)|| <= K4 W(mu, nu)", constants.K4},
       {"|b(0,0,mu)| v ||sigma(mu)|| <= K5 (1 + W(mu, delta_0))", constants.K5}},
      problem, opts, [&](const Sample& s, std::span<double> out) {
        const MeasureHandle mu(s.mu, s.n, problem.d, problem.q);
        const MeasureHandle nu(s.nu, s.n, problem.d, problem.q);
        out[0] = ratio(dist(sigma_of(problem, mu), sigma_of(problem, nu)),
                       wq(problem, s.mu, s.nu, s.n));
        const double lhs = std::max(norm(drift(zero, zero, mu)), norm(sigma_of(problem, mu)));
        out[1] = ratio(lhs, 1.0 + mu.distance_to_dirac0());
      });

  const MeasureHandle dirac(zero, 1, problem.d, problem.q);
  const double k6 = std::max(norm(drift(zero, zero, dirac)), norm(sigma_of(problem, dirac)));
  InequalityResult at_zero{"|b(0,0,delta_0)| v ||sigma(delta_0)|| <= K6", constants.K6, k6,
                           within(k6, constants.K6), {}};
  if (!at_zero.passed) at_zero.witness = fmt::format("value at delta_0 = {}", k6);
  report.inequalities.push_back(std::move(at_zero));
  return report;
}

ValidationReport validate_initial_segment(const Problem& problem,
                                          const AssumptionConstants& constants,
                                          const ScanOptions& opts) {
  return scan("initial segment", {{"|xi(s) - xi(t)| <= K0 |s - t|", constants.K0}}, problem,
              opts, [&](const Sample& s, std::span<double> out) {
                std::vector<double> a(problem.d), b(problem.d);
                problem.initial(s.s, a);
                problem.initial(s.t, b);
                out[0] = ratio(dist(a, b), std::abs(s.s - s.t));
              });
}

ValidationReport validate_growth(const Problem& problem, const AssumptionConstants& constants,
                                 const ScanOptions& opts) {
  const DriftEval drift{problem, opts};
  const double l1 = constants.l + 1.0;
  return scan("polynomial growth",
              {{"|b(x,y,mu)| <= (K3 v K5)(1 + |x|^(l+1) + |y|^(l+1) + W(mu, delta_0))",
                std::max(constants.K3, constants.K5)}},
              problem, opts, [&](const Sample& s, std::span<double> out) {
                const MeasureHandle mu(s.mu, s.n, problem.d, problem.q);
                const double rhs = 1.0 + std::pow(norm(s.x), l1) + std::pow(norm(s.y), l1) +
                                   mu.distance_to_dirac0();
                out[0] = ratio(norm(drift(s.x, s.y, mu)), rhs);
              });
}

std::vector<ValidationReport> validate_all(const Problem& problem,
                                           const AssumptionConstants& constants,
                                           const ScanOptions& opts) {
  constants.check();
  return {validate_neutral_contraction(problem, constants, opts),
          validate_one_sided(problem, constants, opts), validate_sigma(problem, constants, opts),
          validate_initial_segment(problem, constants, opts),
          validate_growth(problem, constants, opts)};
}

// ---------------------------------------------------------------------------
// Catalog

Problem make_linear_problem(const std::string& name, const LinearCoefficients& k, double tau,
                            double horizon, double hurst) {
  Problem p;
  p.name = name;
  p.d = 1;
  p.tau = tau;
  p.horizon = horizon;
  p.hurst = fbm::HurstParam(hurst);
  p.drift = [k](std::span<const double> x, std::span<const double> y, const MeasureHandle& mu,
                std::span<double> out) { out[0] = k.a * x[0] + k.c * y[0] + k.e * mu.mean()[0]; };
  p.neutral = [k](std::span<const double> y, std::span<double> out) { out[0] = k.lambda * y[0]; };
  p.diffusion = [k](const MeasureHandle& mu, std::span<double> out) {
    out[0] = k.s0 + k.s1 * mu.distance_to_dirac0();
  };
  p.initial = [k](double, std::span<double> out) { out[0] = k.xi0; };
  return p;
}

namespace {

Problem cubic_problem(std::string name, double tau, bool mean_field) {
  Problem p;
  p.name = std::move(name);
  p.d = 1;
  p.tau = tau;
  p.horizon = 2.0;
  p.drift = [mean_field](std::span<const double> x, std::span<const double> y,
                         const MeasureHandle& mu, std::span<double> out) {
    const double v = x[0];
    out[0] = v - v * v * v + 0.5 * y[0] + (mean_field ? 0.5 * mu.mean()[0] : 0.0);
  };
  p.neutral = [](std::span<const double> y, std::span<double> out) { out[0] = 0.25 * y[0]; };
  if (mean_field) {
    p.diffusion = [](const MeasureHandle& mu, std::span<double> out) {
      out[0] = 0.5 + 0.1 * mu.distance_to_dirac0();
    };
  } else {
    p.diffusion = [](const MeasureHandle&, std::span<double> out) { out[0] = 0.5; };
  }
  p.initial = [tau](double t, std::span<double> out) { out[0] = 1.0 + t / (2.0 * tau); };
  return p;
}

Problem pure_delay_cubic() {
  Problem p;
  p.name = "pure-delay-cubic";
  p.d = 1;
  p.tau = 1.0;
  p.horizon = 2.0;
  p.drift = [](std::span<const double> x, std::span<const double> y, const MeasureHandle&,
               std::span<double> out) { out[0] = -x[0] * x[0] * x[0] - y[0] * y[0] * y[0]; };
  p.neutral = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.diffusion = [](const MeasureHandle& mu, std::span<double> out) {
    out[0] = 0.3 + 0.1 * mu.distance_to_dirac0();
  };
  p.initial = [](double t, std::span<double> out) { out[0] = 1.0 + 0.5 * t; };
  return p;
}

}  // namespace

std::vector<CatalogEntry> builtin_catalog() {
  std::vector<CatalogEntry> cat;

  AssumptionConstants cubic;
  cubic.lambda = 0.25;
  cubic.l = 2.0;
  cubic.K0 = 0.5;
  cubic.K2 = 2.0;
  cubic.K3 = 2.0;
  cubic.K4 = 0.1;
  cubic.K5 = 0.5;
  cubic.K6 = 0.5;
  cat.push_back({"cubic-mf", cubic_problem("cubic-mf", 1.0, true), cubic,
                 "b = x - x^3 + 0.5 y + 0.5 mean(mu), D = 0.25 y, "
                 "sigma = 0.5 + 0.1 W_q(mu, delta_0), xi(t) = 1 + t/(2 tau), T = 2"});

  AssumptionConstants lin;
  lin.lambda = 0.2;
  lin.l = 1.0;
  lin.K0 = 0.0;
  lin.K2 = 1.0;
  lin.K3 = 1.0;
  lin.K4 = 0.0;
  lin.K5 = 0.5;
  lin.K6 = 0.4;
  cat.push_back({"linear", make_linear_problem("linear", LinearCoefficients{}), lin,
                 "b = -x + 0.5 y + 0.5 mean(mu), D = 0.2 y, sigma = 0.4, xi = 1, T = 2"});

  AssumptionConstants pdc;
  pdc.lambda = 0.5;
  pdc.l = 2.0;
  pdc.K0 = 0.5;
  pdc.K2 = 40.0;
  pdc.K3 = 2.0;
  pdc.K4 = 0.1;
  pdc.K5 = 0.3;
  pdc.K6 = 0.3;
  cat.push_back({"pure-delay-cubic", pure_delay_cubic(), pdc,
                 "b = -x^3 - y^3, D = 0, sigma = 0.3 + 0.1 W_q(mu, delta_0), xi(t) = 1 + t/2, "
                 "T = 2; K2 covers the delayed cubic on the scan box only"});

  LinearCoefficients zero;
  zero.a = 0.0;
  zero.c = 0.0;
  zero.e = 0.0;
  zero.lambda = 0.0;
  zero.s0 = 0.5;
  AssumptionConstants noise;
  noise.lambda = 0.5;
  noise.l = 1.0;
  noise.K2 = 1.0;
  noise.K3 = 1.0;
  noise.K5 = 0.5;
  noise.K6 = 0.5;
  cat.push_back({"noise-only", make_linear_problem("noise-only", zero), noise,
                 "b = 0, D = 0, sigma = 0.5, xi = 1, T = 2"});

  AssumptionConstants local = cubic;
  local.K4 = 0.0;
  cat.push_back({"cubic-local", cubic_problem("cubic-local", 1.0, false), local,
                 "b = x - x^3 + 0.5 y, D = 0.25 y, sigma = 0.5, xi(t) = 1 + t/(2 tau), T = 2; "
                 "no measure dependence"});
  return cat;
}

CatalogEntry find_problem(const std::string& name) {
  auto cat = builtin_catalog();
  std::vector<std::string> names;
  for (auto& e : cat) {
    if (e.name == name) return std::move(e);
    names.push_back(e.name);
  }
  throw ConfigError({fmt::format("unknown problem '{}' (known: {})", name,
                                 fmt::join(names, ", "))});
}

}  // namespace mvfbm::model
