#ifndef MADELUNG_LAB_STATISTICS_HPP
#define MADELUNG_LAB_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "madelung_lab/derivative.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/schrodinger.hpp"

namespace madelung_lab {

/// Global moment integral of x^k * density over the full grid.
inline double raw_moment(const RealField& density, int k) {
  return integrate_with(density.grid(), [&](std::size_t i, double x) {
    return std::pow(x, k) * density[i];
  });
}

struct MomentRow {
  int k = 0;
  double lhs = 0.0;  // <X^k F> by quadrature
  double rhs = 0.0;  // closed form from the Fourier moment expansion
  double residual = 0.0;
};

struct EnergyPartition {
  double E_total = 0.0;
  double K_mean = 0.0;
  double I_mean = 0.0;
  double Q_mean = 0.0;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  EnergyPartition energy;
  double uncertainty_product = std::numeric_limits<double>::quiet_NaN();

  double time = 0.0;
  std::size_t n_points = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  double dx = 0.0;
  Scheme scheme = Scheme::spectral;
  double relative_tolerance = 1e-6;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["time"] = time;
    j["grid"] = {{"n_points", n_points}, {"x_min", x_min}, {"x_max", x_max}, {"dx", dx}};
    j["scheme"] = to_string(scheme);
    j["relative_tolerance"] = relative_tolerance;
    auto& rows_json = j["force_moments"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
      rows_json.push_back({{"k", r.k}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"residual", r.residual}});
    j["energy"] = {{"E_total", energy.E_total},
                   {"K_mean", energy.K_mean},
                   {"I_mean", energy.I_mean},
                   {"Q_mean", energy.Q_mean}};
    if (std::isfinite(uncertainty_product)) j["uncertainty_product"] = uncertainty_product;
    return j;
  }

  void print_table(std::ostream& os) const {
    char line[160];
    std::snprintf(line, sizeof line, "%3s  %24s  %24s  %12s\n", "k", "<X^k F>", "closed form",
                  "residual");
    os << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%3d  %24.16e  %24.16e  %12.3e\n", r.k, r.lhs, r.rhs,
                    r.residual);
      os << line;
    }
    std::snprintf(line, sizeof line, "<E> %.16e  <K> %.16e  <I> %.16e  <Q> %.16e\n",
                  energy.E_total, energy.K_mean, energy.I_mean, energy.Q_mean);
    os << line;
  }
};

/// Moments <X^k F> = m (hbar/2m)^2 integral x^k rho''' dx for k = 0..k_max,
/// against <X^(k+3) F> = -(1/m)(hbar/2)^2 (k+1)(k+2)(k+3) <X^k> and zero
/// for the three lowest ranks.
inline MomentReport force_moments(const MadelungFields& f, int k_max = 4) {
  require(k_max >= 0, ErrorCode::InvalidArgument, "k_max must be >= 0");
  const auto& g = f.grid;
  const auto& c = f.constants;
  const double peak = *std::max_element(f.rho.begin(), f.rho.end());
  for (int k = 0; k <= k_max; ++k) {
    for (std::size_t i : {std::size_t{0}, g.size() - 1}) {
      const double edge = std::abs(std::pow(g.x(i), k) * f.rho[i]);
      require(edge <= 1e-12 * peak, ErrorCode::TailTruncation,
              "x^" + std::to_string(k) + " rho is not negligible at the grid edge");
    }
  }

  const auto d3 = derivative(f.rho, 3, f.scheme);
  const double pref = c.hbar * c.hbar / (4.0 * c.mass);
  MomentReport report;
  report.time = f.time;
  report.n_points = g.size();
  report.x_min = g.x_min();
  report.x_max = g.x_max();
  report.dx = g.dx();
  report.scheme = f.scheme;
  for (int k = 0; k <= k_max; ++k) {
    MomentRow row;
    row.k = k;
    row.lhs = pref * raw_moment(d3, k);
    if (k >= 3) {
      const int j = k - 3;
      row.rhs = -pref * double((j + 1) * (j + 2) * (j + 3)) * raw_moment(f.rho, j);
    }
    row.residual = row.lhs - row.rhs;
    report.rows.push_back(row);
  }
  return report;
}

/// <E> from the Schrodinger integrand, and its kinetic, internal and Bohm
/// parts from the hydrodynamic fields.
inline EnergyPartition energy_partition(const WaveState& state, const MadelungFields& f) {
  const double half_m = 0.5 * f.constants.mass;
  EnergyPartition e;
  e.E_total = energy(state, f.scheme);
  e.K_mean = integrate_with(f.grid, [&](std::size_t i, double) {
    return half_m * f.sqrt_rho_u[i] * f.sqrt_rho_u[i];
  });
  e.I_mean = integrate_with(f.grid, [&](std::size_t i, double) {
    return half_m * f.sqrt_rho_u_prime[i] * f.sqrt_rho_u_prime[i];
  });
  e.Q_mean = integrate(bohm_density(f));
  return e;
}

struct UncertaintyRow {
  double time = 0.0;
  double position_variance = 0.0;  // <X^2> - <X>^2
  double velocity_variance = 0.0;  // <Xdot^2> - <Xdot>^2 with <Xdot^2|x> = u^2 + u'^2
  double product = 0.0;            // sqrt of both variances multiplied
  bool bound_satisfied = false;

  double x4 = 0.0;  // <X^4>
  double v4 = 0.0;  // <Xdot^4> under the local normal closure
  double xv_sq = 0.0;  // <(X Xdot)^2>
  bool cauchy_schwarz = false;

  bool has_identity = false;  // interior snapshots only
  double x3v = 0.0;           // <X^3 Xdot>
  double identity_rhs = 0.0;  // hbar^2/2m^2 + (1/3) d/dt <X^3 Xdot>
  double identity_residual = 0.0;
  double opposite_sign_rhs = 0.0;  // hbar^2/2m^2 - (1/3) d/dt <X^3 Xdot>
};

struct UncertaintyReport {
  std::vector<UncertaintyRow> rows;
  double bound = 0.0;  // hbar / 2m
  double min_product = 0.0;
  double min_product_time = 0.0;
  double max_identity_residual = 0.0;
  bool all_bounds_satisfied = false;
};

/// Uncertainty product per snapshot and the second-moment identity
/// <(X Xdot)^2> = hbar^2/2m^2 + (1/3) d/dt <X^3 Xdot>, which follows from
/// d/dt <X^3 Xdot> = 3 <X^2 Xdot^2> + <X^3 F>/m and <X^3 F> = -3 hbar^2/2m.
/// Time derivatives use three-point differences over neighbouring snapshots.
inline UncertaintyReport uncertainty_check(std::span<const MadelungFields> series) {
  require(series.size() >= 3, ErrorCode::InsufficientSnapshots,
          "need at least 3 snapshots, got " + std::to_string(series.size()));
  const auto& c = series.front().constants;
  UncertaintyReport report;
  report.bound = c.hbar / (2.0 * c.mass);

  for (const auto& f : series) {
    UncertaintyRow row;
    row.time = f.time;
    const auto& g = f.grid;
    RealField speed_sq(g), current(g), v4_density(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = f.sqrt_rho_u[i];
      const double b = f.sqrt_rho_u_prime[i];
      speed_sq[i] = a * a + b * b;
      current[i] = f.sqrt_rho[i] * a;
      if (f.valid(i)) {
        const double u2 = f.u[i] * f.u[i];
        const double w2 = f.u_prime[i] * f.u_prime[i];
        v4_density[i] = f.rho[i] * (u2 * u2 + 6.0 * u2 * w2 + 3.0 * w2 * w2);
      }
    }
    const double mean_x = raw_moment(f.rho, 1);
    const double mean_v = integrate(current);
    row.position_variance = raw_moment(f.rho, 2) - mean_x * mean_x;
    row.velocity_variance = integrate(speed_sq) - mean_v * mean_v;
    row.product = std::sqrt(row.position_variance) * std::sqrt(row.velocity_variance);
    row.x4 = raw_moment(f.rho, 4);
    row.v4 = integrate(v4_density);
    row.xv_sq = raw_moment(speed_sq, 2);
    row.cauchy_schwarz = std::sqrt(row.x4 * row.v4) >= row.xv_sq;
    row.x3v = raw_moment(current, 3);
    report.rows.push_back(row);
  }

  const double floor = c.hbar * c.hbar / (2.0 * c.mass * c.mass);
  for (std::size_t i = 1; i + 1 < report.rows.size(); ++i) {
    auto& r = report.rows[i];
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i + 1];
    const double h1 = r.time - a.time;
    const double h2 = b.time - r.time;
    require(h1 > 0.0 && h2 > 0.0, ErrorCode::InvalidArgument, "snapshots must be increasing in time");
    const double rate = -h2 / (h1 * (h1 + h2)) * a.x3v + (h2 - h1) / (h1 * h2) * r.x3v +
                        h1 / (h2 * (h1 + h2)) * b.x3v;
    r.has_identity = true;
    r.identity_rhs = floor + rate / 3.0;
    r.opposite_sign_rhs = floor - rate / 3.0;
    r.identity_residual = r.xv_sq - r.identity_rhs;
    report.max_identity_residual = std::max(report.max_identity_residual, std::abs(r.identity_residual));
  }

  report.all_bounds_satisfied = true;
  report.min_product = std::numeric_limits<double>::infinity();
  for (auto& r : report.rows) {
    // Round-off allowance at the minimum-uncertainty state.
    r.bound_satisfied = r.product >= report.bound * (1.0 - 1e-9);
    report.all_bounds_satisfied = report.all_bounds_satisfied && r.bound_satisfied;
    if (r.product < report.min_product) {
      report.min_product = r.product;
      report.min_product_time = r.time;
    }
  }
  return report;
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_STATISTICS_HPP
