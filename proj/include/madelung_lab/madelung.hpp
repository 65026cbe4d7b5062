#ifndef MADELUNG_LAB_MADELUNG_HPP
#define MADELUNG_LAB_MADELUNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <vector>

#include "madelung_lab/derivative.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/schrodinger.hpp"

namespace madelung_lab {

/// Nodes whose density is below this fraction of the peak are excluded from
/// every diagnostic that divides by rho.
inline constexpr double density_mask_threshold = 1e-8;

using Mask = std::vector<std::uint8_t>;

/// Hydrodynamic view of a wave function at one time. Fields that divide by
/// rho hold 0 off the mask. The sqrt_rho* members are the bounded products
/// sqrt(rho), sqrt(rho) u and sqrt(rho) u' on the whole grid; derivatives of
/// ratio fields are taken through them.
struct MadelungFields {
  explicit MadelungFields(const SpatialGrid& g)
      : grid(g), rho(g), phase_S(g), u(g), u_prime(g), Q(g), F_bar(g), p_g(g), p_v(g),
        mask(g.size(), 0), sqrt_rho(g), sqrt_rho_u(g), sqrt_rho_u_prime(g) {}

  SpatialGrid grid;
  PhysicalConstants constants;
  Scheme scheme = Scheme::spectral;
  double time = 0.0;

  RealField rho;
  RealField phase_S;
  RealField u;
  RealField u_prime;
  RealField Q;
  RealField F_bar;
  RealField p_g;
  RealField p_v;
  Mask mask;

  RealField sqrt_rho;
  RealField sqrt_rho_u;
  RealField sqrt_rho_u_prime;

  bool valid(std::size_t i) const noexcept { return mask[i] != 0; }
  std::size_t mask_count() const noexcept {
    return std::size_t(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
};

inline Mask density_mask(const RealField& rho) {
  const double peak = *std::max_element(rho.begin(), rho.end());
  Mask m(rho.size(), 0);
  for (std::size_t i = 0; i < rho.size(); ++i) m[i] = rho[i] > density_mask_threshold * peak;
  return m;
}

/// Fraction of the total probability carried by masked nodes.
inline double mask_coverage(const RealField& rho, const Mask& mask) {
  CompensatedSum total, covered;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    total.add(rho[i]);
    if (mask[i]) covered.add(rho[i]);
  }
  return total.value() > 0.0 ? covered.value() / total.value() : 0.0;
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  Mask m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = a[i] && b[i];
  return m;
}

/// g/rho on the mask, 0 elsewhere.
inline RealField divide_on_mask(const RealField& g, const RealField& rho, const Mask& mask) {
  RealField out(g.grid());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = mask[i] ? g[i] / rho[i] : 0.0;
  return out;
}

/// Derivative of q = g/rho from the smooth numerator: (g' - q rho')/rho.
inline RealField quotient_derivative(const RealField& g, const RealField& rho, const RealField& q,
                                     const Mask& mask, Scheme scheme) {
  const auto dg = derivative(g, 1, scheme);
  const auto drho = derivative(rho, 1, scheme);
  RealField out(g.grid());
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = mask[i] ? (dg[i] - q[i] * drho[i]) / rho[i] : 0.0;
  return out;
}

/// rho Q = -(hbar^2/2m) sqrt(rho) d2 sqrt(rho), defined on the whole grid.
inline RealField bohm_density(const MadelungFields& f, Scheme scheme) {
  const auto d2 = derivative(f.sqrt_rho, 2, scheme);
  const double pref = -f.constants.hbar * f.constants.hbar / (2.0 * f.constants.mass);
  RealField out(f.grid);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pref * f.sqrt_rho[i] * d2[i];
  return out;
}

inline RealField bohm_density(const MadelungFields& f) { return bohm_density(f, f.scheme); }

/// Bohm potential -(hbar^2/2m) (d2 sqrt(rho)) / sqrt(rho) on the mask.
inline RealField bohm_potential(const MadelungFields& f) {
  return divide_on_mask(bohm_density(f), f.rho, f.mask);
}

/// Local-mean stochastic force m (hbar/2m)^2 rho''' / rho on the mask.
inline RealField local_mean_force(const MadelungFields& f) {
  const auto d3 = derivative(f.rho, 3, f.scheme);
  const double c = f.constants.hbar / (2.0 * f.constants.mass);
  RealField out(f.grid);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = f.valid(i) ? f.constants.mass * c * c * d3[i] / f.rho[i] : 0.0;
  return out;
}

struct PressureFields {
  RealField p_g;
  RealField p_v;
  /// Q - I - p_v / rho on the mask, I = m u'^2 / 2.
  RealField enthalpy_residual;
  double max_enthalpy_residual = 0.0;
};

/// Gas pressure rho m u'^2 and vacuum pressure -(1/m)(hbar/2)^2 rho''. Both
/// are defined on the whole grid. rho'' is taken through sqrt(rho) so that its
/// round-off shrinks with the density in the tails.
inline PressureFields pressures(const MadelungFields& f) {
  const auto& c = f.constants;
  const auto a1 = derivative(f.sqrt_rho, 1, f.scheme);
  const auto a2 = derivative(f.sqrt_rho, 2, f.scheme);
  PressureFields out{RealField(f.grid), RealField(f.grid), RealField(f.grid), 0.0};
  const double vac = -(c.hbar / 2.0) * (c.hbar / 2.0) / c.mass;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    out.p_g[i] = c.mass * f.sqrt_rho_u_prime[i] * f.sqrt_rho_u_prime[i];
    out.p_v[i] = vac * 2.0 * (a1[i] * a1[i] + f.sqrt_rho[i] * a2[i]);
    if (f.valid(i)) {
      const double internal = 0.5 * c.mass * f.u_prime[i] * f.u_prime[i];
      out.enthalpy_residual[i] = f.Q[i] - internal - out.p_v[i] / f.rho[i];
      out.max_enthalpy_residual =
          std::max(out.max_enthalpy_residual, std::abs(out.enthalpy_residual[i]));
    }
  }
  return out;
}

/// -(1/m) dQ/dx on the mask, differentiated through rho Q.
inline RealField bohm_acceleration(const MadelungFields& f, Scheme scheme) {
  const auto rq = bohm_density(f, scheme);
  const auto q = divide_on_mask(rq, f.rho, f.mask);
  auto dq = quotient_derivative(rq, f.rho, q, f.mask, scheme);
  for (auto& v : dq) v *= -1.0 / f.constants.mass;
  return dq;
}

/// Residual of the Holland split of the Bohm force:
/// -(1/m) Q' - [(hbar/2m)^2 rho'''/rho - (1/rho)(rho u'^2)'] on the mask.
inline RealField force_decomposition_residual(const MadelungFields& f, Scheme scheme) {
  const auto lhs = bohm_acceleration(f, scheme);
  const auto d3 = derivative(f.rho, 3, scheme);
  RealField flux(f.grid);
  for (std::size_t i = 0; i < flux.size(); ++i)
    flux[i] = f.sqrt_rho_u_prime[i] * f.sqrt_rho_u_prime[i];
  const auto dflux = derivative(flux, 1, scheme);
  const double c = f.constants.hbar / (2.0 * f.constants.mass);
  RealField r(f.grid);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!f.valid(i)) continue;
    const double rhs = c * c * d3[i] / f.rho[i] - dflux[i] / f.rho[i];
    r[i] = lhs[i] - rhs;
  }
  return r;
}

inline double max_on_mask(const RealField& f, const Mask& mask) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (mask[i]) m = std::max(m, std::abs(f[i]));
  return m;
}

/// Hydrodynamic fields of a wave function. u and u' are read off the
/// unit-phase-rotated derivative conj(psi/|psi|) psi', never from the
/// unwrapped phase.
inline MadelungFields extract(const WaveState& state, Scheme scheme) {
  const auto& g = state.grid();
  const auto& c = state.constants;
  c.validate();
  MadelungFields f(g);
  f.constants = c;
  f.scheme = scheme;
  f.time = state.time;

  const auto dpsi = derivative(state.psi, 1, scheme);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Complex z = state.psi[i];
    const double amp = std::abs(z);
    f.rho[i] = std::norm(z);
    f.sqrt_rho[i] = amp;
    const Complex w = amp > 0.0 ? std::conj(z / amp) * dpsi[i] : Complex{};
    f.sqrt_rho_u[i] = c.hbar / c.mass * w.imag();
    f.sqrt_rho_u_prime[i] = -c.hbar / c.mass * w.real();
  }
  f.mask = density_mask(f.rho);

  require(mask_coverage(f.rho, f.mask) >= 0.5, ErrorCode::DegenerateDensity,
          "mask covers less than half of the probability");

  bool started = false;
  double previous = 0.0;
  double unwrapped = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!f.valid(i)) continue;
    const double a = std::arg(state.psi[i]);
    if (!started) {
      unwrapped = a;
      started = true;
    } else {
      unwrapped += std::remainder(a - previous, 2.0 * std::numbers::pi);
    }
    previous = a;
    f.phase_S[i] = c.hbar * unwrapped;
    f.u[i] = f.sqrt_rho_u[i] / f.sqrt_rho[i];
    f.u_prime[i] = f.sqrt_rho_u_prime[i] / f.sqrt_rho[i];
  }

  f.Q = bohm_potential(f);
  f.F_bar = local_mean_force(f);
  auto p = pressures(f);
  f.p_g = std::move(p.p_g);
  f.p_v = std::move(p.p_v);
  return f;
}

inline MadelungFields extract(const WaveState& state) {
  return extract(state, default_scheme(state.grid()));
}

/// drho/dt (centered) + d(rho u)/dx at the middle snapshot, on the mask.
inline RealField continuity_residual(const MadelungFields& before, const MadelungFields& now,
                                     const MadelungFields& after, Scheme scheme) {
  const double span = after.time - before.time;
  require(span > 0.0, ErrorCode::InvalidArgument, "snapshots must be ordered in time");
  RealField current(now.grid);
  for (std::size_t i = 0; i < current.size(); ++i)
    current[i] = now.sqrt_rho[i] * now.sqrt_rho_u[i];
  const auto dj = derivative(current, 1, scheme);
  RealField r(now.grid);
  for (std::size_t i = 0; i < r.size(); ++i)
    if (now.valid(i)) r[i] = (after.rho[i] - before.rho[i]) / span + dj[i];
  return r;
}

/// Du/Dt = du/dt + u du/dx at the middle snapshot on the common mask.
inline RealField material_acceleration(const MadelungFields& before, const MadelungFields& now,
                                       const MadelungFields& after, Scheme scheme) {
  const double span = after.time - before.time;
  require(span > 0.0, ErrorCode::InvalidArgument, "snapshots must be ordered in time");
  const auto mask = mask_and(mask_and(before.mask, now.mask), after.mask);
  RealField current(now.grid);
  for (std::size_t i = 0; i < current.size(); ++i)
    current[i] = now.sqrt_rho[i] * now.sqrt_rho_u[i];
  const auto du = quotient_derivative(current, now.rho, now.u, mask, scheme);
  RealField a(now.grid);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask[i]) a[i] = (after.u[i] - before.u[i]) / span + now.u[i] * du[i];
  return a;
}

/// Velocity recovered from the continuity equation alone:
/// u(x) = -(1/rho) integral_{x_min}^{x} drho/dt dx', drho/dt centered.
inline RealField velocity_from_continuity(const RealField& rho_before, const RealField& rho_now,
                                          const RealField& rho_after, double span) {
  require(span > 0.0, ErrorCode::InvalidArgument, "time span must be > 0");
  const auto& g = rho_now.grid();
  const auto mask = density_mask(rho_now);
  RealField rate(g);
  for (std::size_t i = 0; i < g.size(); ++i) rate[i] = (rho_after[i] - rho_before[i]) / span;
  // Cumulative trapezoid with the Euler-Maclaurin end correction (4th order).
  const auto slope = derivative(rate, 1, Scheme::central4);
  RealField u(g);
  CompensatedSum flux;
  for (std::size_t i = 1; i < g.size(); ++i) {
    flux.add(0.5 * (rate[i - 1] + rate[i]) * g.dx());
    const double corrected = flux.value() - g.dx() * g.dx() / 12.0 * (slope[i] - slope[0]);
    if (mask[i]) u[i] = -corrected / rho_now[i];
  }
  return u;
}

/// Columns x, rho, u, u_prime, Q, F_bar, p_g, p_v, mask.
inline void write_fields_csv(std::ostream& os, const MadelungFields& f) {
  os << "x,rho,u,u_prime,Q,F_bar,p_g,p_v,mask\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    os << f.grid.x(i) << ',' << f.rho[i] << ',' << f.u[i] << ',' << f.u_prime[i] << ',' << f.Q[i]
       << ',' << f.F_bar[i] << ',' << f.p_g[i] << ',' << f.p_v[i] << ',' << int(f.mask[i])
       << '\n';
  }
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_MADELUNG_HPP
