#ifndef MADELUNG_LAB_ENSEMBLE_HPP
#define MADELUNG_LAB_ENSEMBLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "madelung_lab/derivative.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/statistics.hpp"

namespace madelung_lab {

/// Positions and velocities of n independent realizations at one time.
struct TrajectoryEnsemble {
  std::vector<double> positions;
  std::vector<double> velocities;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  PhysicalConstants constants;
};

/// Samples per random substream. Fixed so that output does not depend on the
/// number of workers.
inline constexpr std::size_t ensemble_chunk_size = 1u << 16;

namespace detail {

inline double unit_uniform(std::mt19937_64& eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

// Inverse CDF of the piecewise-linear interpolant of a density.
class DensitySampler {
 public:
  explicit DensitySampler(const RealField& rho) : grid_(rho.grid()), rho_(rho.size()), cdf_(rho.size()) {
    for (std::size_t i = 0; i < rho.size(); ++i) rho_[i] = std::max(rho[i], 0.0);
    CompensatedSum acc;
    cdf_[0] = 0.0;
    for (std::size_t i = 1; i < rho_.size(); ++i) {
      acc.add(0.5 * (rho_[i - 1] + rho_[i]) * grid_.dx());
      cdf_[i] = acc.value();
    }
    require(cdf_.back() > 0.0, ErrorCode::DegenerateDensity, "density has no mass to sample");
  }

  double operator()(double uniform) const {
    const double target = uniform * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t j = std::size_t(it - cdf_.begin());
    j = std::clamp<std::size_t>(j, 1, cdf_.size() - 1) - 1;
    const double r = target - cdf_[j];
    const double a = rho_[j];
    const double b = (rho_[j + 1] - rho_[j]) / grid_.dx();
    // a s + b s^2 / 2 = r, solved in the cancellation-free form.
    const double disc = std::max(a * a + 2.0 * b * r, 0.0);
    const double denom = a + std::sqrt(disc);
    double s = denom > 0.0 ? 2.0 * r / denom : 0.0;
    s = std::clamp(s, 0.0, grid_.dx());
    return grid_.x(j) + s;
  }

 private:
  SpatialGrid grid_;
  std::vector<double> rho_;
  std::vector<double> cdf_;
};

// Linear interpolation of a masked field, falling back to the valid end of
// a half-masked cell.
inline double interpolate_masked(const RealField& f, const Mask& mask, double x) {
  const auto& g = f.grid();
  const double s = (x - g.x_min()) / g.dx();
  if (s <= 0.0) return mask[0] ? f[0] : 0.0;
  const std::size_t n = g.size();
  if (s >= double(n - 1)) return mask[n - 1] ? f[n - 1] : 0.0;
  const auto i = std::size_t(s);
  const double w = s - double(i);
  const bool a = mask[i] != 0, b = mask[i + 1] != 0;
  if (a && b) return (1.0 - w) * f[i] + w * f[i + 1];
  if (a) return f[i];
  if (b) return f[i + 1];
  return 0.0;
}

}  // namespace detail

/// Draws n realizations consistent with the fields: X from rho by inverse
/// CDF, Xdot from a normal law with mean u(X) and standard deviation |u'(X)|.
/// Every sample consumes three uniforms, so ensembles built from the same
/// seed at different times share their random numbers sample by sample.
inline TrajectoryEnsemble sample_ensemble(const MadelungFields& f, std::size_t n, std::uint64_t seed,
                                          unsigned threads = 1) {
  require(n >= 1, ErrorCode::InvalidArgument, "ensemble size must be >= 1");
  TrajectoryEnsemble ens;
  ens.positions.resize(n);
  ens.velocities.resize(n);
  ens.time = f.time;
  ens.seed = seed;
  ens.n_samples = n;
  ens.constants = f.constants;

  const detail::DensitySampler sampler(f.rho);
  const std::size_t n_chunks = (n + ensemble_chunk_size - 1) / ensemble_chunk_size;
  auto run_chunk = [&](std::size_t chunk) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(chunk)};
    std::mt19937_64 eng(seq);
    const std::size_t begin = chunk * ensemble_chunk_size;
    const std::size_t end = std::min(n, begin + ensemble_chunk_size);
    for (std::size_t i = begin; i < end; ++i) {
      const double x = sampler(detail::unit_uniform(eng));
      // Box-Muller, cosine branch only.
      const double r1 = 1.0 - detail::unit_uniform(eng);
      const double r2 = detail::unit_uniform(eng);
      const double z = std::sqrt(-2.0 * std::log(r1)) * std::cos(2.0 * std::numbers::pi * r2);
      const double u = detail::interpolate_masked(f.u, f.mask, x);
      const double w = detail::interpolate_masked(f.u_prime, f.mask, x);
      ens.positions[i] = x;
      ens.velocities[i] = u + std::abs(w) * z;
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, unsigned(n_chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < n_chunks; c += threads) run_chunk(c);
      });
    }
  }
  return ens;
}

using Observable = std::function<double(double x, double v)>;

struct MeanEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Arithmetic mean of an observable over the realizations.
inline MeanEstimate global_mean(const TrajectoryEnsemble& ens, const Observable& obs) {
  require(!ens.positions.empty(), ErrorCode::EmptyEnsemble, "ensemble has no samples");
  CompensatedSum s;
  for (std::size_t i = 0; i < ens.positions.size(); ++i) s.add(obs(ens.positions[i], ens.velocities[i]));
  const double n = double(ens.positions.size());
  const double mean = s.value() / n;
  CompensatedSum ss;
  for (std::size_t i = 0; i < ens.positions.size(); ++i) {
    const double d = obs(ens.positions[i], ens.velocities[i]) - mean;
    ss.add(d * d);
  }
  const double var = n > 1 ? ss.value() / (n - 1) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// Top-hat local means on a grid. Empty bins carry NaN and are excluded from
/// the mask.
struct LocalMeanEstimate {
  SpatialGrid grid;
  RealField estimate;
  std::vector<std::size_t> counts;
  RealField standard_error;
  RealField density;  // count / (n * bandwidth)
  Mask mask;
  double bandwidth = 0.0;

  LocalMeanEstimate(const SpatialGrid& g, double bw)
      : grid(g), estimate(g), counts(g.size(), 0), standard_error(g), density(g), mask(g.size(), 0),
        bandwidth(bw) {}
};

inline LocalMeanEstimate local_mean(const TrajectoryEnsemble& ens, const Observable& obs,
                                    const SpatialGrid& grid, double bandwidth) {
  require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorCode::InvalidArgument, "bandwidth must be > 0");
  require(!ens.positions.empty(), ErrorCode::EmptyEnsemble, "ensemble has no samples");
  LocalMeanEstimate out(grid, bandwidth);
  const std::size_t n = grid.size();
  std::vector<double> mean(n, 0.0), m2(n, 0.0);
  const double half = 0.5 * bandwidth;
  for (std::size_t s = 0; s < ens.positions.size(); ++s) {
    const double x = ens.positions[s];
    const double lo = std::ceil((x - half - grid.x_min()) / grid.dx());
    const double hi = std::floor((x + half - grid.x_min()) / grid.dx());
    if (hi < 0.0 || lo > double(n - 1)) continue;
    const double value = obs(x, ens.velocities[s]);
    for (auto j = std::size_t(std::max(lo, 0.0)); j <= std::size_t(std::min(hi, double(n - 1))); ++j) {
      if (!(std::abs(x - grid.x(j)) < half)) continue;
      const double c = double(++out.counts[j]);
      const double d = value - mean[j];
      mean[j] += d / c;
      m2[j] += d * (value - mean[j]);
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double total = double(ens.positions.size());
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = out.counts[j];
    out.density[j] = double(c) / (total * bandwidth);
    out.mask[j] = c > 0;
    out.estimate[j] = c > 0 ? mean[j] : nan;
    out.standard_error[j] = c > 1 ? std::sqrt(m2[j] / double(c - 1) / double(c)) : nan;
  }
  return out;
}

inline LocalMeanEstimate local_mean(const TrajectoryEnsemble& ens, const Observable& obs,
                                    const SpatialGrid& grid) {
  return local_mean(ens, obs, grid, 4.0 * grid.dx());
}

/// Integral of local mean times estimated density, which reproduces the
/// global mean of the samples inside the grid.
inline double integrate_local_mean(const LocalMeanEstimate& est) {
  CompensatedSum s;
  for (std::size_t j = 0; j < est.grid.size(); ++j)
    if (est.mask[j]) s.add(est.estimate[j] * est.density[j] * est.grid.dx());
  return s.value();
}

struct ConsistencyOptions {
  std::size_t batches = 32;
  double bins_per_sigma = 4.0;
  double extent_sigmas = 3.0;  // half-width of the estimation grid
  double region_sigmas = 2.0;  // half-width of the reported region
};

struct ConsistencyRow {
  double time = 0.0;
  double x = 0.0;
  double continuity = 0.0;  // d rho/dt + d(rho u)/dx
  double continuity_se = 0.0;
  double momentum = 0.0;  // Du/Dt + (1/rho) d(rho u'^2)/dx - F/m
  double momentum_se = 0.0;
  double flux = 0.0;  // d(rho u)/dt + d(rho <v^2>)/dx - (hbar/2m)^2 rho'''
  double flux_se = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  std::size_t n_samples = 0;
  std::size_t batches = 0;
  double bin_width = 0.0;
  double max_continuity_z = 0.0;
  double max_momentum_z = 0.0;
  double max_flux_z = 0.0;
  double mean_momentum_se = 0.0;
  double mean_flux_se = 0.0;
  double mean_continuity_se = 0.0;
};

namespace detail {

struct BinSums {
  std::vector<double> count, sum_v, sum_v2;
};

inline BinSums bin_sums(const TrajectoryEnsemble& e, const SpatialGrid& g, std::size_t begin,
                        std::size_t end) {
  BinSums b{std::vector<double>(g.size()), std::vector<double>(g.size()), std::vector<double>(g.size())};
  const double h = g.dx();
  for (std::size_t s = begin; s < end; ++s) {
    const double pos = (e.positions[s] - g.x_min()) / h + 0.5;
    if (pos < 0.0 || pos >= double(g.size())) continue;
    const auto j = std::size_t(pos);
    const double v = e.velocities[s];
    b.count[j] += 1.0;
    b.sum_v[j] += v;
    b.sum_v2[j] += v * v;
  }
  return b;
}

struct SliceEstimate {
  RealField rho, flux, stress, u, variance;
};

inline SliceEstimate slice_estimate(const BinSums& b, const SpatialGrid& g, double n) {
  SliceEstimate s{RealField(g), RealField(g), RealField(g), RealField(g), RealField(g)};
  const double norm = 1.0 / (n * g.dx());
  for (std::size_t j = 0; j < g.size(); ++j) {
    s.rho[j] = b.count[j] * norm;
    s.flux[j] = b.sum_v[j] * norm;
    s.stress[j] = b.sum_v2[j] * norm;
    if (b.count[j] > 0) {
      s.u[j] = b.sum_v[j] / b.count[j];
      s.variance[j] = std::max(b.sum_v2[j] / b.count[j] - s.u[j] * s.u[j], 0.0);
    }
  }
  return s;
}

// Three-point derivative on a nonuniform stencil, evaluated at the middle.
inline double middle_rate(double h1, double h2, double a, double b, double c) {
  return -h2 / (h1 * (h1 + h2)) * a + (h2 - h1) / (h1 * h2) * b + h1 / (h2 * (h1 + h2)) * c;
}

struct Residuals {
  std::vector<double> continuity, momentum, flux;
};

inline Residuals residuals(const SliceEstimate& a, const SliceEstimate& b, const SliceEstimate& c,
                           double h1, double h2, const PhysicalConstants& k) {
  const auto& g = b.rho.grid();
  const double q = std::pow(k.hbar / (2.0 * k.mass), 2);
  const auto d_flux = derivative(b.flux, 1, Scheme::central4);
  const auto d_stress = derivative(b.stress, 1, Scheme::central4);
  const auto d3_rho = derivative(b.rho, 3, Scheme::central4);
  const auto d_u = derivative(b.u, 1, Scheme::central4);
  RealField pressure(g);
  for (std::size_t j = 0; j < g.size(); ++j) pressure[j] = b.rho[j] * b.variance[j];
  const auto d_pressure = derivative(pressure, 1, Scheme::central4);
  Residuals r{std::vector<double>(g.size()), std::vector<double>(g.size()), std::vector<double>(g.size())};
  for (std::size_t j = 0; j < g.size(); ++j) {
    r.continuity[j] = middle_rate(h1, h2, a.rho[j], b.rho[j], c.rho[j]) + d_flux[j];
    r.flux[j] = middle_rate(h1, h2, a.flux[j], b.flux[j], c.flux[j]) + d_stress[j] - q * d3_rho[j];
    if (b.rho[j] > 0.0) {
      const double du_dt = middle_rate(h1, h2, a.u[j], b.u[j], c.u[j]);
      r.momentum[j] = du_dt + b.u[j] * d_u[j] + d_pressure[j] / b.rho[j] - q * d3_rho[j] / b.rho[j];
    }
  }
  return r;
}

}  // namespace detail

/// Field identities reproduced from the samples alone: continuity and the
/// momentum balance with the local-mean force taken from the estimated
/// density, at every interior slice. Bins have width sigma / bins_per_sigma
/// on a grid spanning extent_sigmas around the mean. Standard errors come
/// from the spread of the same residuals over contiguous sample batches.
inline ConsistencyReport consistency_check(std::span<const TrajectoryEnsemble> series,
                                           std::span<const MadelungFields> fields,
                                           const ConsistencyOptions& opt = {}) {
  require(series.size() >= 3, ErrorCode::InsufficientSnapshots,
          "need at least 3 ensemble slices, got " + std::to_string(series.size()));
  require(fields.size() == series.size(), ErrorCode::InvalidArgument,
          "need one field snapshot per ensemble slice");
  require(opt.batches >= 2, ErrorCode::InvalidArgument, "need at least 2 batches");
  const std::size_t n = series.front().positions.size();
  for (const auto& e : series) {
    require(e.seed == series.front().seed, ErrorCode::SeedMismatch,
            "ensemble slices must share one seed");
    require(e.positions.size() == n && n > 0, ErrorCode::SeedMismatch,
            "ensemble slices must share one sample count");
  }
  require(n >= 16 * opt.batches, ErrorCode::EmptyEnsemble, "too few samples for batch errors");

  ConsistencyReport report;
  report.n_samples = n;
  report.batches = opt.batches;
  std::size_t n_rows = 0;
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    const auto& f = fields[i];
    const double mean_x = raw_moment(f.rho, 1);
    const double sigma = std::sqrt(raw_moment(f.rho, 2) - mean_x * mean_x);
    const double h = sigma / opt.bins_per_sigma;
    const auto half = std::size_t(std::llround(opt.extent_sigmas * opt.bins_per_sigma));
    const SpatialGrid g(mean_x - double(half) * h, mean_x + double(half) * h, 2 * half + 1,
                        Boundary::vanishing);
    report.bin_width = h;
    const double h1 = series[i].time - series[i - 1].time;
    const double h2 = series[i + 1].time - series[i].time;
    require(h1 > 0.0 && h2 > 0.0, ErrorCode::InvalidArgument, "slices must be increasing in time");

    auto residuals_over = [&](std::size_t begin, std::size_t end) {
      const double m = double(end - begin);
      auto a = detail::slice_estimate(detail::bin_sums(series[i - 1], g, begin, end), g, m);
      auto b = detail::slice_estimate(detail::bin_sums(series[i], g, begin, end), g, m);
      auto c = detail::slice_estimate(detail::bin_sums(series[i + 1], g, begin, end), g, m);
      return detail::residuals(a, b, c, h1, h2, f.constants);
    };
    const auto full = residuals_over(0, n);
    std::vector<detail::Residuals> reps;
    for (std::size_t b = 0; b < opt.batches; ++b)
      reps.push_back(residuals_over(b * n / opt.batches, (b + 1) * n / opt.batches));

    auto batch_se = [&](auto member, std::size_t j) {
      double mean = 0.0;
      for (const auto& r : reps) mean += (r.*member)[j];
      mean /= double(reps.size());
      double ss = 0.0;
      for (const auto& r : reps) ss += ((r.*member)[j] - mean) * ((r.*member)[j] - mean);
      const double B = double(reps.size());
      // Batch residuals scatter sqrt(B) times wider than the full-sample one.
      return std::sqrt(ss / (B - 1.0) / B);
    };

    for (std::size_t j = 0; j < g.size(); ++j) {
      if (std::abs(g.x(j) - mean_x) > opt.region_sigmas * sigma + 1e-9 * h) continue;
      ConsistencyRow row;
      row.time = series[i].time;
      row.x = g.x(j);
      row.continuity = full.continuity[j];
      row.continuity_se = batch_se(&detail::Residuals::continuity, j);
      row.momentum = full.momentum[j];
      row.momentum_se = batch_se(&detail::Residuals::momentum, j);
      row.flux = full.flux[j];
      row.flux_se = batch_se(&detail::Residuals::flux, j);
      report.max_continuity_z = std::max(report.max_continuity_z, std::abs(row.continuity) / row.continuity_se);
      report.max_momentum_z = std::max(report.max_momentum_z, std::abs(row.momentum) / row.momentum_se);
      report.max_flux_z = std::max(report.max_flux_z, std::abs(row.flux) / row.flux_se);
      report.mean_continuity_se += row.continuity_se;
      report.mean_momentum_se += row.momentum_se;
      report.mean_flux_se += row.flux_se;
      report.rows.push_back(row);
      ++n_rows;
    }
  }
  if (n_rows > 0) {
    report.mean_continuity_se /= double(n_rows);
    report.mean_momentum_se /= double(n_rows);
    report.mean_flux_se /= double(n_rows);
  }
  return report;
}

/// Columns x, v at full precision.
inline void write_ensemble_csv(std::ostream& os, const TrajectoryEnsemble& ens) {
  os << "x,v\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ens.positions.size(); ++i)
    os << ens.positions[i] << ',' << ens.velocities[i] << '\n';
}

inline nlohmann::ordered_json ensemble_sidecar(const TrajectoryEnsemble& ens, const std::string& scenario_hash) {
  nlohmann::ordered_json j;
  j["seed"] = ens.seed;
  j["n"] = ens.n_samples;
  j["time"] = ens.time;
  j["scenario_hash"] = scenario_hash;
  return j;
}

/// Columns x, estimate, stderr, count. Empty bins print nan.
inline void write_estimate_csv(std::ostream& os, const LocalMeanEstimate& est) {
  os << "x,estimate,stderr,count\n" << std::setprecision(17);
  for (std::size_t j = 0; j < est.grid.size(); ++j) {
    os << est.grid.x(j) << ',';
    if (est.mask[j]) os << est.estimate[j]; else os << "nan";
    os << ',';
    if (std::isfinite(est.standard_error[j])) os << est.standard_error[j]; else os << "nan";
    os << ',' << est.counts[j] << '\n';
  }
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_ENSEMBLE_HPP
