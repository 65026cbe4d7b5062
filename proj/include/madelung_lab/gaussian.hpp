#ifndef MADELUNG_LAB_GAUSSIAN_HPP
#define MADELUNG_LAB_GAUSSIAN_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "madelung_lab/error.hpp"
#include "madelung_lab/fft.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/schrodinger.hpp"

// Closed-form dynamic Gaussian and its two classical comparison regimes.
// Everything here evaluates analytic expressions directly; it is the trust
// anchor the numerical pipeline is certified against.

namespace madelung_lab {

struct QuantumRegime {};

/// Classical diffusion, sigma = sqrt(2 D t).
struct DiffusionRegime {
  double D = 0.5;
};

/// Non-deterministic classical spreading, sigma = sigma0 + lambda t.
struct NikolicRegime {
  double lambda = 0.5;
};

using Regime = std::variant<QuantumRegime, DiffusionRegime, NikolicRegime>;

inline std::string regime_name(const Regime& r) {
  switch (r.index()) {
    case 0: return "quantum";
    case 1: return "diffusion";
    default: return "nikolic";
  }
}

struct GaussianParams {
  double sigma0 = 1.0;
  PhysicalConstants constants;
  Regime regime = QuantumRegime{};
  double center = 0.0;
  double momentum = 0.0;  // the packet centre moves at momentum / mass

  bool quantum() const noexcept { return std::holds_alternative<QuantumRegime>(regime); }

  void validate() const {
    require(sigma0 > 0.0 && std::isfinite(sigma0), ErrorCode::InvalidArgument, "sigma0 must be > 0");
    constants.validate();
    require(std::isfinite(center) && std::isfinite(momentum), ErrorCode::InvalidArgument,
            "center and momentum must be finite");
    if (auto* d = std::get_if<DiffusionRegime>(&regime))
      require(d->D > 0.0, ErrorCode::InvalidArgument, "diffusion coefficient must be > 0");
    if (auto* n = std::get_if<NikolicRegime>(&regime))
      require(n->lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
  }
};

namespace gaussian {

namespace detail {

inline void check_time(const GaussianParams& p, double t) {
  require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidArgument, "time must be >= 0");
  if (std::holds_alternative<DiffusionRegime>(p.regime))
    require(t > 0.0, ErrorCode::DiffusionAtZero, "diffusion width is zero at t = 0");
}

inline void require_quantum(const GaussianParams& p) {
  require(p.quantum(), ErrorCode::RegimeMismatch,
          "force and pressure fields exist only for the quantum regime");
}

// (hbar / 2 m sigma0)^2
inline double spreading_rate_sq(const GaussianParams& p) {
  const double v = p.constants.hbar / (2.0 * p.constants.mass * p.sigma0);
  return v * v;
}

}  // namespace detail

/// Position relative to the moving packet centre.
inline double offset(const GaussianParams& p, double x, double t) {
  return x - p.center - p.momentum / p.constants.mass * t;
}

inline double sigma(const GaussianParams& p, double t) {
  p.validate();
  detail::check_time(p, t);
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, QuantumRegime>) {
          return std::sqrt(p.sigma0 * p.sigma0 + detail::spreading_rate_sq(p) * t * t);
        } else if constexpr (std::is_same_v<R, DiffusionRegime>) {
          return std::sqrt(2.0 * r.D * t);
        } else {
          return p.sigma0 + r.lambda * t;
        }
      },
      p.regime);
}

/// d sigma / dt.
inline double sigma_rate(const GaussianParams& p, double t) {
  const double s = sigma(p, t);
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, QuantumRegime>) {
          return detail::spreading_rate_sq(p) * t / s;
        } else if constexpr (std::is_same_v<R, DiffusionRegime>) {
          return r.D / s;
        } else {
          return r.lambda;
        }
      },
      p.regime);
}

inline double density(const GaussianParams& p, double x, double t) {
  const double s = sigma(p, t);
  x = offset(p, x, t);
  return std::exp(-x * x / (2.0 * s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

/// u = p/m + x d(ln sigma)/dt, valid in every regime.
inline double velocity(const GaussianParams& p, double x, double t) {
  return p.momentum / p.constants.mass + offset(p, x, t) * sigma_rate(p, t) / sigma(p, t);
}

inline double osmotic_velocity(const GaussianParams& p, double x, double t) {
  detail::require_quantum(p);
  const double s = sigma(p, t);
  return p.constants.hbar * offset(p, x, t) / (2.0 * p.constants.mass * s * s);
}

inline double bohm_potential(const GaussianParams& p, double x, double t) {
  detail::require_quantum(p);
  const double s2 = sigma(p, t) * sigma(p, t);
  const auto& c = p.constants;
  x = offset(p, x, t);
  return c.hbar * c.hbar / (2.0 * c.mass) * (1.0 / (2.0 * s2) - x * x / (4.0 * s2 * s2));
}

/// Du/Dt = -(1/m) dQ/dx = (hbar/2m)^2 x / sigma^4.
inline double material_acceleration(const GaussianParams& p, double x, double t) {
  detail::require_quantum(p);
  const double s2 = sigma(p, t) * sigma(p, t);
  const double c = p.constants.hbar / (2.0 * p.constants.mass);
  return c * c * offset(p, x, t) / (s2 * s2);
}

/// F_bar = m Du/Dt (3 - x^2/sigma^2).
inline double local_mean_force(const GaussianParams& p, double x, double t) {
  const double s = sigma(p, t);
  const double y = offset(p, x, t);
  return p.constants.mass * material_acceleration(p, x, t) * (3.0 - y * y / (s * s));
}

/// -(m/rho) d(rho u'^2)/dx = m Du/Dt ((x/sigma)^2 - 2).
inline double gas_pressure_force(const GaussianParams& p, double x, double t) {
  const double s = sigma(p, t);
  const double y = offset(p, x, t);
  return p.constants.mass * material_acceleration(p, x, t) * (y * y / (s * s) - 2.0);
}

inline double gas_pressure(const GaussianParams& p, double x, double t) {
  const double u1 = osmotic_velocity(p, x, t);
  return density(p, x, t) * p.constants.mass * u1 * u1;
}

inline double vacuum_pressure(const GaussianParams& p, double x, double t) {
  detail::require_quantum(p);
  const double s = sigma(p, t);
  const double a = p.constants.hbar / (2.0 * s);
  const double y = offset(p, x, t);
  return density(p, x, t) / p.constants.mass * a * a * (1.0 - y * y / (s * s));
}

/// p_g + p_v = (rho/m)(hbar / 2 sigma)^2.
inline double total_pressure(const GaussianParams& p, double x, double t) {
  detail::require_quantum(p);
  const double a = p.constants.hbar / (2.0 * sigma(p, t));
  return density(p, x, t) / p.constants.mass * a * a;
}

/// p^2/2m + (m/2)(hbar / 2 m sigma0)^2, the quadrature of
/// (m/2)(u^2 + u'^2) rho.
inline double mean_energy(const GaussianParams& p) {
  p.validate();
  detail::require_quantum(p);
  return 0.5 * p.momentum * p.momentum / p.constants.mass +
         0.5 * p.constants.mass * detail::spreading_rate_sq(p);
}

/// Closed-form hydrodynamic fields sampled on a grid, with the same masking
/// rule as the numerical extraction.
inline MadelungFields fields_closed_form(const GaussianParams& p, const SpatialGrid& grid,
                                         double t) {
  p.validate();
  detail::require_quantum(p);
  MadelungFields f(grid);
  f.constants = p.constants;
  f.time = t;
  const double rate = sigma_rate(p, t) / sigma(p, t);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.x(i);
    f.rho[i] = density(p, x, t);
    f.sqrt_rho[i] = std::sqrt(f.rho[i]);
    f.sqrt_rho_u[i] = f.sqrt_rho[i] * velocity(p, x, t);
    f.sqrt_rho_u_prime[i] = f.sqrt_rho[i] * osmotic_velocity(p, x, t);
    f.p_g[i] = gas_pressure(p, x, t);
    f.p_v[i] = vacuum_pressure(p, x, t);
  }
  f.mask = density_mask(f.rho);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!f.valid(i)) continue;
    const double x = grid.x(i);
    const double y = offset(p, x, t);
    f.phase_S[i] = p.momentum * x + 0.5 * p.constants.mass * y * y * rate;
    f.u[i] = velocity(p, x, t);
    f.u_prime[i] = osmotic_velocity(p, x, t);
    f.Q[i] = bohm_potential(p, x, t);
    f.F_bar[i] = local_mean_force(p, x, t);
  }
  return f;
}

/// Exact heat-kernel evolution of a density on a periodic grid.
inline RealField diffuse_density(const RealField& rho, double D, double span) {
  const auto& g = rho.grid();
  require(g.periodic(), ErrorCode::SchemeBoundaryMismatch, "diffusion uses a periodic grid");
  require(D > 0.0 && span >= 0.0, ErrorCode::InvalidArgument, "need D > 0 and span >= 0");
  FourierTransform fft(g.size());
  auto buf = fft.data();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] = rho[i];
  fft.forward();
  const auto k = wavenumbers(g);
  for (std::size_t j = 0; j < g.size(); ++j) buf[j] *= std::exp(-D * k[j] * k[j] * span);
  fft.backward();
  RealField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace gaussian
}  // namespace madelung_lab

#endif  // MADELUNG_LAB_GAUSSIAN_HPP
