#ifndef MADELUNG_LAB_FFT_HPP
#define MADELUNG_LAB_FFT_HPP

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "madelung_lab/fields.hpp"

namespace madelung_lab {

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Owns an aligned FFTW buffer and the forward/backward plans over it.
/// Instances are not shared between threads.
class FourierTransform {
 public:
  explicit FourierTransform(std::size_t n) : n_(n) {
    std::lock_guard lock(detail::planner_mutex());
    buffer_ = fftw_alloc_complex(n);
    const int len = static_cast<int>(n);
    forward_ = fftw_plan_dft_1d(len, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(len, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;

  ~FourierTransform() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::size_t size() const noexcept { return n_; }

  /// In-place access to the transform buffer.
  std::span<Complex> data() noexcept {
    return {reinterpret_cast<Complex*>(buffer_), n_};
  }

  void forward() noexcept { fftw_execute(forward_); }

  /// Inverse transform including the 1/n normalization.
  void backward() noexcept {
    fftw_execute(backward_);
    const double scale = 1.0 / double(n_);
    for (auto& v : data()) v *= scale;
  }

 private:
  std::size_t n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Angular wavenumbers in FFT order. The Nyquist entry is returned as -n/2.
inline std::vector<double> wavenumbers(const SpatialGrid& grid) {
  const auto n = grid.size();
  const double base = 2.0 * std::numbers::pi / grid.length();
  std::vector<double> k(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double index = j < n / 2 ? double(j) : double(j) - double(n);
    k[j] = base * index;
  }
  return k;
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_FFT_HPP
