#ifndef MADELUNG_LAB_DERIVATIVE_HPP
#define MADELUNG_LAB_DERIVATIVE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "madelung_lab/error.hpp"
#include "madelung_lab/fft.hpp"
#include "madelung_lab/fields.hpp"

namespace madelung_lab {

enum class Scheme { spectral, central4 };

inline std::string to_string(Scheme s) { return s == Scheme::spectral ? "spectral" : "central4"; }

inline Scheme default_scheme(const SpatialGrid& g) {
  return g.periodic() ? Scheme::spectral : Scheme::central4;
}

/// Fourier modes whose magnitude falls below this fraction of the largest
/// mode are treated as round-off and dropped before differentiation.
/// Without it, (ik)^3 amplifies transform noise by kmax^3 and every
/// diagnostic that divides by a small density is swamped in the tails.
inline constexpr double spectral_noise_floor = 1e-15;

/// Fornberg's recursion: weights of the order-th derivative at z using the
/// given nodes. Nodes are in units of grid spacing.
inline std::vector<double> finite_difference_weights(double z, std::span<const double> nodes,
                                                     int order) {
  const auto n = nodes.size();
  require(n > std::size_t(order), ErrorCode::InvalidArgument, "stencil too short for order");
  std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const int mn = std::min<int>(int(i), order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][order];
  return w;
}

namespace detail {

inline void check_order(int order) {
  require(order >= 1 && order <= 3, ErrorCode::InvalidArgument,
          "derivative order must be 1, 2 or 3");
}

template <typename T>
Field<T> spectral_derivative(const Field<T>& f, int order) {
  const auto& g = f.grid();
  require(g.periodic(), ErrorCode::SchemeBoundaryMismatch,
          "spectral derivative requires a periodic grid");
  const auto n = g.size();
  FourierTransform fft(n);
  auto buf = fft.data();
  for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(f[i]);
  fft.forward();

  double peak = 0.0;
  for (const auto& v : buf) peak = std::max(peak, std::abs(v));
  const double floor = spectral_noise_floor * peak;

  const auto k = wavenumbers(g);
  const Complex ik(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(buf[j]) < floor || ((order % 2 == 1) && j == n / 2)) {
      buf[j] = 0.0;
      continue;
    }
    Complex factor = 1.0;
    for (int p = 0; p < order; ++p) factor *= ik * k[j];
    buf[j] *= factor;
  }
  fft.backward();

  Field<T> out(g);
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<T, Complex>) {
      out[i] = buf[i];
    } else {
      out[i] = buf[i].real();
    }
  }
  return out;
}

// Fourth-order stencils: centered in the interior (and everywhere on periodic
// grids); one-sided closures of width order+4 near vanishing boundaries.
template <typename T>
Field<T> central4_derivative(const Field<T>& f, int order) {
  const auto& g = f.grid();
  const auto n = static_cast<long>(g.size());
  const long half = order == 3 ? 3 : 2;
  const double scale = 1.0 / std::pow(g.dx(), order);

  std::vector<double> centered_nodes;
  for (long o = -half; o <= half; ++o) centered_nodes.push_back(double(o));
  const auto centered = finite_difference_weights(0.0, centered_nodes, order);

  Field<T> out(g);
  if (g.periodic()) {
    for (long i = 0; i < n; ++i) {
      T acc{};
      for (long o = -half; o <= half; ++o) {
        const long j = ((i + o) % n + n) % n;
        acc += centered[o + half] * f[j];
      }
      out[i] = acc * scale;
    }
    return out;
  }

  const long width = order + 4;
  for (long i = 0; i < n; ++i) {
    if (i - half >= 0 && i + half < n) {
      T acc{};
      for (long o = -half; o <= half; ++o) acc += centered[o + half] * f[i + o];
      out[i] = acc * scale;
      continue;
    }
    const long start = i - half < 0 ? 0 : n - width;
    std::vector<double> nodes(width);
    for (long s = 0; s < width; ++s) nodes[s] = double(start + s);
    const auto w = finite_difference_weights(double(i), nodes, order);
    T acc{};
    for (long s = 0; s < width; ++s) acc += w[s] * f[start + s];
    out[i] = acc * scale;
  }
  return out;
}

}  // namespace detail

/// Derivative of order 1, 2 or 3. The spectral scheme multiplies by (ik)^order
/// in Fourier space, so the third derivative is never built by chaining.
template <typename T>
Field<T> derivative(const Field<T>& f, int order, Scheme scheme) {
  detail::check_order(order);
  require(f.all_finite(), ErrorCode::NonFinite, "cannot differentiate a non-finite field");
  auto out = scheme == Scheme::spectral ? detail::spectral_derivative(f, order)
                                        : detail::central4_derivative(f, order);
  require(out.all_finite(), ErrorCode::NonFinite, "derivative produced non-finite values");
  return out;
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_DERIVATIVE_HPP
