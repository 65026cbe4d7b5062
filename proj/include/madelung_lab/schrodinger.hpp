#ifndef MADELUNG_LAB_SCHRODINGER_HPP
#define MADELUNG_LAB_SCHRODINGER_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "madelung_lab/derivative.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fft.hpp"
#include "madelung_lab/fields.hpp"

namespace madelung_lab {

struct PhysicalConstants {
  double hbar = 1.0;
  double mass = 1.0;

  void validate() const {
    require(hbar > 0.0 && std::isfinite(hbar), ErrorCode::InvalidArgument, "hbar must be > 0");
    require(mass > 0.0 && std::isfinite(mass), ErrorCode::InvalidArgument, "mass must be > 0");
  }

  friend bool operator==(const PhysicalConstants&, const PhysicalConstants&) = default;
};

enum class Method { splitstep, implicit };

inline std::string to_string(Method m) { return m == Method::splitstep ? "splitstep" : "implicit"; }

/// Initial states must leave less than this density at the grid edges.
inline constexpr double initial_edge_density_limit = 1e-14;
/// Evolved states abort when the edge density exceeds this (wrap-around or
/// reflection would contaminate every diagnostic).
inline constexpr double snapshot_edge_density_limit = 1e-12;
inline constexpr double norm_drift_limit = 1e-6;

struct WaveState {
  ComplexField psi;
  double time = 0.0;
  PhysicalConstants constants;

  const SpatialGrid& grid() const noexcept { return psi.grid(); }

  RealField density() const {
    return transform(psi, [](Complex z) { return std::norm(z); });
  }

  double norm() const { return integrate(density()); }

  /// Largest density on the outermost nodes that carry a free value.
  double edge_density() const {
    const auto n = psi.size();
    if (grid().periodic()) return std::max(std::norm(psi[0]), std::norm(psi[n - 1]));
    return std::max(std::norm(psi[1]), std::norm(psi[n - 2]));
  }
};

/// Gaussian packet (2 pi s0^2)^(-1/4) exp(-(x-c)^2 / 4 s0^2 + i p x / hbar).
inline WaveState initial_gaussian(const SpatialGrid& grid, double sigma0, double center,
                                  double momentum, const PhysicalConstants& constants) {
  constants.validate();
  require(sigma0 > 0.0 && std::isfinite(sigma0), ErrorCode::InvalidArgument,
          "sigma0 must be > 0");
  auto density_at = [&](double x) {
    const double d = x - center;
    return std::exp(-d * d / (2.0 * sigma0 * sigma0)) / (sigma0 * std::sqrt(2.0 * std::numbers::pi));
  };
  const double edge = std::max(density_at(grid.x_min()), density_at(grid.x_max()));
  require(edge < initial_edge_density_limit, ErrorCode::GridTooNarrow,
          "initial density at grid edge is " + std::to_string(edge) + " (limit 1e-14)");

  const double amplitude = std::pow(2.0 * std::numbers::pi * sigma0 * sigma0, -0.25);
  auto psi = ComplexField::sample(grid, [&](double x) {
    const double d = x - center;
    return amplitude * std::exp(Complex(-d * d / (4.0 * sigma0 * sigma0), momentum * x / constants.hbar));
  });
  return WaveState{std::move(psi), 0.0, constants};
}

namespace detail {

// Free evolution is diagonal in momentum space: one transform pair covers
// any number of steps exactly.
inline ComplexField splitstep_evolve(const ComplexField& psi, double total_time,
                                     const PhysicalConstants& c) {
  const auto& g = psi.grid();
  require(g.periodic(), ErrorCode::MethodBoundaryMismatch, "splitstep requires a periodic grid");
  const auto n = g.size();
  FourierTransform fft(n);
  auto buf = fft.data();
  for (std::size_t i = 0; i < n; ++i) buf[i] = psi[i];
  fft.forward();
  const auto k = wavenumbers(g);
  for (std::size_t j = 0; j < n; ++j) {
    const double phase = -c.hbar * k[j] * k[j] * total_time / (2.0 * c.mass);
    buf[j] *= std::polar(1.0, phase);
  }
  fft.backward();
  ComplexField out(g);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i];
  return out;
}

// Crank-Nicolson with the compact fourth-order Laplacian
// (1 + d2/12)^-1 d2 / dx^2 on interior nodes, psi = 0 on the end points.
// Both sides are functions of the same Dirichlet second-difference matrix,
// so the step operator is exactly unitary.
inline ComplexField implicit_evolve(const ComplexField& psi, double dt, std::size_t n_steps,
                                    const PhysicalConstants& c) {
  const auto& g = psi.grid();
  require(!g.periodic(), ErrorCode::MethodBoundaryMismatch,
          "implicit method requires a vanishing-boundary grid");
  const auto n = g.size();
  const auto m = n - 2;
  const Complex a(0.0, -c.hbar * dt / (4.0 * c.mass * g.dx() * g.dx()));
  const Complex lhs_off = 1.0 / 12.0 + a;
  const Complex lhs_diag = 10.0 / 12.0 - 2.0 * a;
  const Complex rhs_off = 1.0 / 12.0 - a;
  const Complex rhs_diag = 10.0 / 12.0 + 2.0 * a;

  // Thomas factorization of the constant left-hand matrix.
  std::vector<Complex> upper(m), pivot(m);
  pivot[0] = lhs_diag;
  upper[0] = lhs_off / pivot[0];
  for (std::size_t i = 1; i < m; ++i) {
    pivot[i] = lhs_diag - lhs_off * upper[i - 1];
    upper[i] = lhs_off / pivot[i];
  }

  std::vector<Complex> state(m), rhs(m);
  for (std::size_t i = 0; i < m; ++i) state[i] = psi[i + 1];
  for (std::size_t step = 0; step < n_steps; ++step) {
    for (std::size_t i = 0; i < m; ++i) {
      Complex v = rhs_diag * state[i];
      if (i > 0) v += rhs_off * state[i - 1];
      if (i + 1 < m) v += rhs_off * state[i + 1];
      rhs[i] = v;
    }
    rhs[0] /= pivot[0];
    for (std::size_t i = 1; i < m; ++i) rhs[i] = (rhs[i] - lhs_off * rhs[i - 1]) / pivot[i];
    state[m - 1] = rhs[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) state[i] = rhs[i] - upper[i] * state[i + 1];
  }

  ComplexField out(g);
  for (std::size_t i = 0; i < m; ++i) out[i + 1] = state[i];
  return out;
}

}  // namespace detail

/// Advances the free-particle state by n_steps * dt.
inline WaveState propagate(const WaveState& state, double dt, std::size_t n_steps, Method method) {
  require(dt > 0.0 && std::isfinite(dt), ErrorCode::InvalidArgument, "dt must be > 0");
  state.constants.validate();
  if (n_steps == 0) return state;

  const double total = dt * double(n_steps);
  auto psi = method == Method::splitstep
                 ? detail::splitstep_evolve(state.psi, total, state.constants)
                 : detail::implicit_evolve(state.psi, dt, n_steps, state.constants);

  WaveState out{std::move(psi), state.time + total, state.constants};
  require(out.psi.all_finite(), ErrorCode::NonFinite, "propagation produced non-finite values");
  const double before = state.norm();
  const double after = out.norm();
  require(std::abs(after - before) <= norm_drift_limit, ErrorCode::NormDrift,
          "norm changed from " + std::to_string(before) + " to " + std::to_string(after));
  require(out.edge_density() <= snapshot_edge_density_limit, ErrorCode::GridTooNarrow,
          "density reached the grid edge at t = " + std::to_string(out.time));
  return out;
}

/// Propagates to an absolute time using steps of at most dt.
inline WaveState propagate_to(const WaveState& state, double time, double dt, Method method) {
  const double span = time - state.time;
  require(span >= 0.0, ErrorCode::InvalidArgument, "cannot propagate backwards in time");
  if (span == 0.0) return state;
  const auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  auto out = propagate(state, span / double(steps), steps, method);
  out.time = time;
  return out;
}

/// Re of the integral of -(hbar^2/2m) psi* psi''.
inline double energy(const WaveState& state, Scheme scheme) {
  const auto d2 = derivative(state.psi, 2, scheme);
  const double pref = -state.constants.hbar * state.constants.hbar / (2.0 * state.constants.mass);
  return integrate_with(state.grid(), [&](std::size_t i, double) {
    return pref * (std::conj(state.psi[i]) * d2[i]).real();
  });
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_SCHRODINGER_HPP
