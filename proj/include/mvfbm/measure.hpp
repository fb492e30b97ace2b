#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvfbm::measure {

class WassersteinOrder {
 public:
  explicit WassersteinOrder(double q);
  double value() const noexcept { return q_; }

 private:
  double q_;
};

/// Equal-weight Dirac mixture (1/N) sum_j delta_{x_j} over N samples in R^d,
/// stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> samples, std::size_t n, std::size_t d);
  /// Convenience for d = 1.
  static EmpiricalMeasure line(std::vector<double> samples);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  std::span<const double> sample(std::size_t j) const noexcept {
    return {samples_.data() + j * d_, d_};
  }
  std::span<const double> samples() const noexcept { return samples_; }

 private:
  std::vector<double> samples_;
  std::size_t n_;
  std::size_t d_;
};

/// Exact W_q between equal-size empirical measures on the line (sorted
/// matching). Throws for d > 1 or unequal sizes.
double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                      WassersteinOrder q);

/// ((1/N) sum_j |z1_j - z2_j|^q)^{1/q}: the identity-coupling upper bound on
/// W_q of the two empirical measures. Row-major N x d inputs.
double coupling_bound(std::span<const double> z1, std::span<const double> z2,
                      std::size_t n, std::size_t d, WassersteinOrder q);

/// W_q(mu, delta_0) = ((1/N) sum_j |x_j|^q)^{1/q}.
double distance_to_dirac0(const EmpiricalMeasure& mu, WassersteinOrder q);

/// (1/N) sum_j |x_j|^p.
double empirical_moment(const EmpiricalMeasure& mu, double p);

/// W_q used by the assumption validators: exact for d = 1, identity-coupling
/// upper bound otherwise.
double wasserstein_or_bound(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                            WassersteinOrder q);

/// Read-only query surface that coefficient callbacks receive.
///
/// Every statistic is computed from sorted values, so it is invariant under
/// any permutation of the particles, bit for bit. The mean and W_q(mu,
/// delta_0) for the problem's q are evaluated once at construction; the
/// handle borrows the sample storage and must not outlive it.
class MeasureHandle {
 public:
  MeasureHandle(std::span<const double> samples, std::size_t n, std::size_t d,
                WassersteinOrder q);
  MeasureHandle(const EmpiricalMeasure& mu, WassersteinOrder q)
      : MeasureHandle(mu.samples(), mu.size(), mu.dim(), q) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  double order() const noexcept { return q_; }

  std::span<const double> mean() const noexcept { return mean_; }
  /// W_q(mu, delta_0) at the handle's order q.
  double distance_to_dirac0() const noexcept { return dist0_; }
  /// (1/N) sum |x_j|^p for arbitrary p; O(N log N) per call.
  double empirical_moment(double p) const;

 private:
  std::span<const double> samples_;
  std::size_t n_;
  std::size_t d_;
  double q_;
  std::vector<double> mean_;
  double dist0_;
};

/// Sum of values after sorting; the result does not depend on input order.
double order_invariant_sum(std::vector<double> values);

}  // namespace mvfbm::measure
