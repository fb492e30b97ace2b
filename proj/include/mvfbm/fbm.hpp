#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mvfbm/exec.hpp"

namespace mvfbm::fbm {

/// Hurst exponent restricted to [1/2, 1). H = 1/2 is admitted as the
/// Brownian test case; the kernel phi vanishes identically there.
class HurstParam {
 public:
  explicit HurstParam(double h);
  double value() const noexcept { return h_; }
  bool is_brownian() const noexcept { return h_ == 0.5; }

 private:
  double h_;
};

/// Uniform grid t_k = k * dt, k = 0..n_steps.
struct TimeGrid {
  TimeGrid(double dt, std::size_t n_steps);

  double dt;
  std::size_t n_steps;

  double t(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  std::size_t n_points() const noexcept { return n_steps + 1; }
};

struct FbmPath {
  TimeGrid grid;
  std::vector<double> values;  // values[0] == 0
  std::uint64_t stream_id = 0;
};

/// R_H(s, t) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2.
double fbm_covariance(double s, double t, HurstParam h);

/// phi(s, t) = H (2H - 1) |s - t|^{2H - 2}; singular on the diagonal.
double phi_kernel(double s, double t, HurstParam h);

/// Autocovariance of unit-spaced fractional Gaussian noise scaled by dt^{2H}.
double increment_autocovariance(std::ptrdiff_t lag, double dt, HurstParam h);

/// Maximum grid size accepted by the Cholesky generator.
inline constexpr std::size_t kCholeskyMaxSteps = 4096;

/// Exact sampler: factorizes the covariance of (B_{t_1}, ..., B_{t_n}).
/// Reference generator; O(n^3) setup, O(n^2) per path.
class CholeskyGenerator {
 public:
  CholeskyGenerator(TimeGrid grid, HurstParam h);

  const TimeGrid& grid() const noexcept { return grid_; }
  FbmPath sample(std::uint64_t seed, std::uint64_t stream_id) const;

 private:
  TimeGrid grid_;
  HurstParam h_;
  Eigen::MatrixXd lower_;
};

/// Circulant-embedding (Davies-Harte) sampler of the increments. The
/// stationary increment covariance is embedded in a circulant of size
/// next_pow2(2(n - 1)); if any eigenvalue drops below -1e-10 the generator
/// switches to Cholesky and reports it through used_fallback().
class CirculantGenerator {
 public:
  CirculantGenerator(TimeGrid grid, HurstParam h);
  ~CirculantGenerator();
  CirculantGenerator(const CirculantGenerator&) = delete;
  CirculantGenerator& operator=(const CirculantGenerator&) = delete;

  const TimeGrid& grid() const noexcept { return grid_; }
  bool used_fallback() const noexcept { return fallback_ != nullptr; }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  std::size_t embedding_size() const noexcept { return size_; }

  FbmPath sample(std::uint64_t seed, std::uint64_t stream_id) const;

 private:
  struct Plan;

  TimeGrid grid_;
  HurstParam h_;
  std::size_t size_ = 0;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_k / size)
  double min_eigenvalue_ = 0.0;
  std::unique_ptr<Plan> plan_;
  std::unique_ptr<CholeskyGenerator> fallback_;
};

/// n_paths paths with stream ids 0..n_paths-1.
std::vector<FbmPath> sample_fbm_cholesky(const TimeGrid& grid, HurstParam h,
                                         std::uint64_t seed,
                                         std::size_t n_paths,
                                         Exec exec = Exec::serial);

struct FastSample {
  std::vector<FbmPath> paths;
  bool used_fallback = false;
};

FastSample sample_fbm_fast(const TimeGrid& grid, HurstParam h,
                           std::uint64_t seed, std::size_t n_paths,
                           Exec exec = Exec::serial);

/// values[k + 1] - values[k].
std::vector<double> increments(const FbmPath& path);
std::vector<double> increments(std::span<const double> values);

}  // namespace mvfbm::fbm
