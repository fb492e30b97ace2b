#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mvfbm {

/// N x d block of particle states, row-major.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(std::size_t n, std::size_t d, double fill = 0.0)
      : n_(n), d_(d), data_(n * d, fill) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * d_, d_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * d_, d_};
  }
  double& operator()(std::size_t i, std::size_t c) noexcept { return data_[i * d_ + c]; }
  double operator()(std::size_t i, std::size_t c) const noexcept { return data_[i * d_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool all_finite() const noexcept {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> data_;
};

}  // namespace mvfbm
