#include "mvfbm/measure.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mvfbm/error.hpp"

namespace mvfbm::measure {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_moment_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw DomainError(fmt::format("moment order must be >= 1, got {}", p));
  }
}

}  // namespace

WassersteinOrder::WassersteinOrder(double q) : q_(q) {
  if (!(q >= 1.0) || !std::isfinite(q)) {
    throw DomainError(fmt::format("Wasserstein order must be >= 1, got {}", q));
  }
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> samples, std::size_t n,
                                   std::size_t d)
    : samples_(std::move(samples)), n_(n), d_(d) {
  if (n_ < 1 || d_ < 1) throw DomainError("empirical measure needs N >= 1 and d >= 1");
  if (samples_.size() != n_ * d_) {
    throw DomainError(fmt::format("sample buffer has {} entries, expected {} x {}",
                                  samples_.size(), n_, d_));
  }
  for (double x : samples_) {
    if (!std::isfinite(x)) throw DomainError("empirical measure samples must be finite");
  }
}

EmpiricalMeasure EmpiricalMeasure::line(std::vector<double> samples) {
  const std::size_t n = samples.size();
  return EmpiricalMeasure(std::move(samples), n, 1);
}

double order_invariant_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                      WassersteinOrder q) {
  if (mu.dim() != 1 || nu.dim() != 1) {
    throw DomainError("wasserstein_1d: unsupported dimension (exact W_q only for d = 1)");
  }
  if (mu.size() != nu.size()) {
    throw DomainError(fmt::format("wasserstein_1d: unequal sample counts {} vs {} unsupported",
                                  mu.size(), nu.size()));
  }
  std::vector<double> x(mu.samples().begin(), mu.samples().end());
  std::vector<double> y(nu.samples().begin(), nu.samples().end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += std::pow(std::abs(x[k] - y[k]), q.value());
  return std::pow(acc / static_cast<double>(x.size()), 1.0 / q.value());
}

double coupling_bound(std::span<const double> z1, std::span<const double> z2,
                      std::size_t n, std::size_t d, WassersteinOrder q) {
  if (n < 1 || d < 1 || z1.size() != n * d || z2.size() != n * d) {
    throw DomainError(fmt::format("coupling_bound: shape mismatch ({} and {} entries for {} x {})",
                                  z1.size(), z2.size(), n, d));
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = z1[j * d + c] - z2[j * d + c];
      s += diff * diff;
    }
    acc += std::pow(std::sqrt(s), q.value());
  }
  return std::pow(acc / static_cast<double>(n), 1.0 / q.value());
}

double empirical_moment(const EmpiricalMeasure& mu, double p) {
  check_moment_order(p);
  std::vector<double> terms(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) terms[j] = std::pow(norm(mu.sample(j)), p);
  return order_invariant_sum(std::move(terms)) / static_cast<double>(mu.size());
}

double distance_to_dirac0(const EmpiricalMeasure& mu, WassersteinOrder q) {
  return std::pow(empirical_moment(mu, q.value()), 1.0 / q.value());
}

double wasserstein_or_bound(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                            WassersteinOrder q) {
  if (mu.dim() == 1) return wasserstein_1d(mu, nu, q);
  if (mu.size() != nu.size() || mu.dim() != nu.dim()) {
    throw DomainError("wasserstein_or_bound: measures must share N and d");
  }
  return coupling_bound(mu.samples(), nu.samples(), mu.size(), mu.dim(), q);
}

MeasureHandle::MeasureHandle(std::span<const double> samples, std::size_t n,
                             std::size_t d, WassersteinOrder q)
    : samples_(samples), n_(n), d_(d), q_(q.value()), mean_(d, 0.0) {
  if (n_ < 1 || d_ < 1 || samples_.size() != n_ * d_) {
    throw DomainError("MeasureHandle: sample span does not match N x d");
  }
  std::vector<double> column(n_);
  for (std::size_t c = 0; c < d_; ++c) {
    for (std::size_t j = 0; j < n_; ++j) column[j] = samples_[j * d_ + c];
    mean_[c] = order_invariant_sum(column) / static_cast<double>(n_);
  }
  dist0_ = std::pow(empirical_moment(q_), 1.0 / q_);
}

double MeasureHandle::empirical_moment(double p) const {
  check_moment_order(p);
  std::vector<double> terms(n_);
  for (std::size_t j = 0; j < n_; ++j) {
    terms[j] = std::pow(norm(samples_.subspan(j * d_, d_)), p);
  }
  return order_invariant_sum(std::move(terms)) / static_cast<double>(n_);
}

}  // namespace mvfbm::measure
