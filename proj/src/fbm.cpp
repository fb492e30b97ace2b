#include "mvfbm/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <string>

#include <fftw3.h>
#include <fmt/format.h>

#include "mvfbm/error.hpp"
#include "mvfbm/rng.hpp"

namespace mvfbm::fbm {

HurstParam::HurstParam(double h) : h_(h) {
  if (!(h >= 0.5 && h < 1.0)) {
    throw DomainError(fmt::format("Hurst exponent must lie in [0.5, 1), got {}", h));
  }
}

TimeGrid::TimeGrid(double dt_, std::size_t n_steps_) : dt(dt_), n_steps(n_steps_) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError(fmt::format("grid spacing must be positive, got {}", dt));
  }
  if (n_steps < 1) throw DomainError("grid needs at least one step");
}

double fbm_covariance(double s, double t, HurstParam h) {
  if (s < 0.0 || t < 0.0) {
    throw DomainError(fmt::format("fbm_covariance: negative time ({}, {})", s, t));
  }
  const double two_h = 2.0 * h.value();
  return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) -
                std::pow(std::abs(t - s), two_h));
}

double phi_kernel(double s, double t, HurstParam h) {
  if (s == t) throw DomainError("phi_kernel is singular on the diagonal s == t");
  const double hv = h.value();
  return hv * (2.0 * hv - 1.0) * std::pow(std::abs(s - t), 2.0 * hv - 2.0);
}

double increment_autocovariance(std::ptrdiff_t lag, double dt, HurstParam h) {
  const double two_h = 2.0 * h.value();
  const double k = std::abs(static_cast<double>(lag));
  const double unit = 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                             std::pow(std::abs(k - 1.0), two_h));
  return std::pow(dt, two_h) * unit;
}

// ---------------------------------------------------------------------------
// Cholesky

CholeskyGenerator::CholeskyGenerator(TimeGrid grid, HurstParam h) : grid_(grid), h_(h) {
  const std::size_t n = grid_.n_steps;
  if (n > kCholeskyMaxSteps) {
    throw DomainError(fmt::format("Cholesky generator limited to {} steps, got {}",
                                  kCholeskyMaxSteps, n));
  }
  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = fbm_covariance(grid_.t(i + 1), grid_.t(j + 1), h_);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(fmt::format(
        "fBm covariance not positive definite (n={}, dt={}, H={}, min diag={})", n,
        grid_.dt, h_.value(), cov.diagonal().minCoeff()));
  }
  lower_ = llt.matrixL();
}

FbmPath CholeskyGenerator::sample(std::uint64_t seed, std::uint64_t id) const {
  const std::size_t n = grid_.n_steps;
  auto engine = make_engine(seed, id);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = normal(engine);

  FbmPath path{grid_, std::vector<double>(n + 1, 0.0), id};
  // Lower-triangular product written out so the summation order is fixed.
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += lower_(i, j) * z(j);
    path.values[i + 1] = acc;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Circulant embedding

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

struct CirculantGenerator::Plan {
  fftw_plan forward = nullptr;
};

CirculantGenerator::CirculantGenerator(TimeGrid grid, HurstParam h)
    : grid_(grid), h_(h), plan_(std::make_unique<Plan>()) {
  const std::size_t n = grid_.n_steps;
  size_ = next_pow2(std::max<std::size_t>(2, 2 * (n - 1)));
  const std::size_t half = size_ / 2;

  FftwBuffer in(size_);
  FftwBuffer out(size_);
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan_->forward =
        fftw_plan_dft_1d(static_cast<int>(size_), in.data, out.data, FFTW_FORWARD,
                         FFTW_ESTIMATE);
  }
  for (std::size_t j = 0; j < size_; ++j) {
    const std::size_t lag = j <= half ? j : size_ - j;
    in.data[j][0] = increment_autocovariance(static_cast<std::ptrdiff_t>(lag), grid_.dt, h_);
    in.data[j][1] = 0.0;
  }
  fftw_execute_dft(plan_->forward, in.data, out.data);

  sqrt_eigen_.resize(size_);
  min_eigenvalue_ = out.data[0][0];
  for (std::size_t k = 0; k < size_; ++k) {
    const double lambda = out.data[k][0];
    min_eigenvalue_ = std::min(min_eigenvalue_, lambda);
    sqrt_eigen_[k] = std::sqrt(std::max(lambda, 0.0) / static_cast<double>(size_));
  }
  if (min_eigenvalue_ < -1e-10) {
    fallback_ = std::make_unique<CholeskyGenerator>(grid_, h_);
  }
}

CirculantGenerator::~CirculantGenerator() {
  if (plan_ && plan_->forward != nullptr) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->forward);
  }
}

FbmPath CirculantGenerator::sample(std::uint64_t seed, std::uint64_t id) const {
  if (fallback_) return fallback_->sample(seed, id);

  auto engine = make_engine(seed, id);
  std::normal_distribution<double> normal(0.0, 1.0);
  FftwBuffer in(size_);
  FftwBuffer out(size_);
  for (std::size_t k = 0; k < size_; ++k) {
    const double u = normal(engine);
    const double v = normal(engine);
    in.data[k][0] = sqrt_eigen_[k] * u;
    in.data[k][1] = sqrt_eigen_[k] * v;
  }
  fftw_execute_dft(plan_->forward, in.data, out.data);

  // Re(FFT(w)) has exactly the circulant covariance; its first n entries are
  // the increments.
  const std::size_t n = grid_.n_steps;
  FbmPath path{grid_, std::vector<double>(n + 1, 0.0), id};
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += out.data[j][0];
    path.values[j + 1] = acc;
  }
  return path;
}

// ---------------------------------------------------------------------------

namespace {

template <class Generator>
std::vector<FbmPath> sample_batch(const Generator& gen, std::uint64_t seed,
                                  std::size_t n_paths, Exec exec) {
  std::vector<FbmPath> paths(n_paths, FbmPath{gen.grid(), {}, 0});
  const auto count = static_cast<std::ptrdiff_t>(n_paths);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      paths[i] = gen.sample(seed, static_cast<std::uint64_t>(i));
    }
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      paths[i] = gen.sample(seed, static_cast<std::uint64_t>(i));
    }
  }
  return paths;
}

}  // namespace

std::vector<FbmPath> sample_fbm_cholesky(const TimeGrid& grid, HurstParam h,
                                         std::uint64_t seed, std::size_t n_paths,
                                         Exec exec) {
  const CholeskyGenerator gen(grid, h);
  return sample_batch(gen, seed, n_paths, exec);
}

FastSample sample_fbm_fast(const TimeGrid& grid, HurstParam h, std::uint64_t seed,
                           std::size_t n_paths, Exec exec) {
  const CirculantGenerator gen(grid, h);
  return {sample_batch(gen, seed, n_paths, exec), gen.used_fallback()};
}

std::vector<double> increments(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("increments need at least two grid points");
  std::vector<double> out(values.size() - 1);
  for (std::size_t k = 0; k + 1 < values.size(); ++k) out[k] = values[k + 1] - values[k];
  return out;
}

std::vector<double> increments(const FbmPath& path) { return increments(path.values); }

}  // namespace mvfbm::fbm
