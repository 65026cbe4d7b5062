#ifndef MADELUNG_LAB_SUITE_HPP
#define MADELUNG_LAB_SUITE_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "madelung_lab/config.hpp"
#include "madelung_lab/ensemble.hpp"
#include "madelung_lab/gaussian.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/schrodinger.hpp"
#include "madelung_lab/statistics.hpp"
#include "madelung_lab/svg.hpp"

namespace madelung_lab {

/// One verified identity. Passing means value <= limit, value >= limit or
/// lo <= value <= hi depending on the relation.
struct CheckRow {
  enum class Relation { at_most, at_least, within };

  std::string stage;
  std::string identity;
  double time = std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  Relation relation = Relation::at_most;
  double lo = 0.0;
  double hi = 0.0;

  bool pass() const {
    if (!std::isfinite(value)) return false;
    switch (relation) {
      case Relation::at_most: return value <= hi;
      case Relation::at_least: return value >= lo;
      default: return value >= lo && value <= hi;
    }
  }

  std::string tolerance() const {
    char buf[64];
    switch (relation) {
      case Relation::at_most: std::snprintf(buf, sizeof buf, "<= %.3g", hi); break;
      case Relation::at_least: std::snprintf(buf, sizeof buf, ">= %.10g", lo); break;
      default: std::snprintf(buf, sizeof buf, "in [%.3g, %.3g]", lo, hi);
    }
    return buf;
  }
};

struct SuiteReport {
  std::string regime;
  std::string config_hash;
  std::vector<CheckRow> rows;

  bool all_pass() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass(); });
  }

  std::vector<const CheckRow*> failures() const {
    std::vector<const CheckRow*> out;
    for (const auto& r : rows)
      if (!r.pass()) out.push_back(&r);
    return out;
  }

  const CheckRow* find(const std::string& identity, double time = std::numeric_limits<double>::quiet_NaN()) const {
    for (const auto& r : rows)
      if (r.identity == identity && (std::isnan(time) ? true : r.time == time)) return &r;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["config_hash"] = config_hash;
    j["regime"] = regime;
    j["all_pass"] = all_pass();
    auto& list = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row;
      row["stage"] = r.stage;
      row["identity"] = r.identity;
      if (std::isfinite(r.time)) row["time"] = r.time;
      else row["time"] = nullptr;
      row["value"] = std::isfinite(r.value) ? nlohmann::ordered_json(r.value) : nlohmann::ordered_json(nullptr);
      row["tolerance"] = r.tolerance();
      row["status"] = r.pass() ? "PASS" : "FAIL";
      list.push_back(row);
    }
    return j;
  }

  void print(std::ostream& os) const {
    char line[200];
    std::snprintf(line, sizeof line, "%-6s %-10s %-32s %8s %14s  %s\n", "status", "stage", "identity", "t",
                  "value", "tolerance");
    os << line;
    for (const auto& r : rows) {
      char t[16] = "-";
      if (std::isfinite(r.time)) std::snprintf(t, sizeof t, "%g", r.time);
      std::snprintf(line, sizeof line, "%-6s %-10s %-32s %8s %14.6e  %s\n", r.pass() ? "PASS" : "FAIL",
                    r.stage.c_str(), r.identity.c_str(), t, r.value, r.tolerance().c_str());
      os << line;
    }
    const auto bad = failures();
    os << (bad.empty() ? "all " + std::to_string(rows.size()) + " identities PASS\n"
                       : std::to_string(bad.size()) + " of " + std::to_string(rows.size()) + " identities FAIL\n");
  }
};

/// Writes files into one directory and records them for the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    require(bool(out), ErrorCode::InvalidArgument, "cannot write " + (dir_ / name).string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    files_.push_back({name, bytes.size(), hex64(fnv1a(bytes))});
  }

  /// Manifest of everything written so far. No timestamps, so reruns are
  /// byte-identical. verify writes manifest.json, other commands
  /// manifest_<command>.json so they can share a directory.
  void write_manifest(const ScenarioConfig& cfg, const std::string& command) {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["command"] = command;
    j["config_hash"] = config_hash(cfg);
    auto resolved = to_json(cfg);
    resolved.erase("output");
    resolved.erase("threads");
    j["config"] = resolved;
    auto& list = j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& f : files_) list.push_back({{"file", f.name}, {"bytes", f.bytes}, {"fnv1a", f.hash}});
    const std::string text = j.dump(2) + "\n";
    std::string name = "manifest.json";
    if (command != "verify") {
      name = "manifest_" + command + ".json";
      std::replace(name.begin(), name.end(), ' ', '_');
    }
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out.write(text.data(), std::streamsize(text.size()));
  }

 private:
  struct Entry {
    std::string name;
    std::size_t bytes;
    std::string hash;
  };
  std::filesystem::path dir_;
  std::vector<Entry> files_;
};

namespace detail {

inline std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

template <typename Fn>
std::string to_text(Fn fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

inline double centred_sigma(const RealField& rho) {
  const double mean = raw_moment(rho, 1);
  return std::sqrt(raw_moment(rho, 2) - mean * mean);
}

// rho-weighted average of g over [x - width/2, x + width/2] by Simpson.
template <typename G>
double window_average(const GaussianParams& p, double t, double x, double width, G g) {
  const int m = 64;
  const double h = width / m;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double y = x - 0.5 * width + i * h;
    const double r = gaussian::density(p, y, t);
    num += w * r * g(y);
    den += w * r;
  }
  return num / den;
}

// Finite-difference truncation error sets the central4 limits; the spectral
// ones are the round-off level targets.
struct Tolerances {
  double decomposition;
  double gradient;
  double enthalpy;
  double bound_slack;
  double partition;
  double force_closed_form;
};

inline Tolerances tolerances(Scheme s) {
  if (s == Scheme::spectral) return {1e-6, 1e-6, 1e-8, 1e-9, 1e-8, 1e-5};
  return {1e-3, 1e-4, 1e-5, 1e-6, 1e-6, 1e-4};
}

class RowSink {
 public:
  explicit RowSink(std::vector<CheckRow>& rows) : rows_(rows) {}
  void at_most(const std::string& stage, const std::string& id, double t, double value, double limit) {
    rows_.push_back({stage, id, t, value, CheckRow::Relation::at_most, 0.0, limit});
  }
  void at_least(const std::string& stage, const std::string& id, double t, double value, double limit) {
    rows_.push_back({stage, id, t, value, CheckRow::Relation::at_least, limit, 0.0});
  }
  void within(const std::string& stage, const std::string& id, double t, double value, double lo, double hi) {
    rows_.push_back({stage, id, t, value, CheckRow::Relation::within, lo, hi});
  }

 private:
  std::vector<CheckRow>& rows_;
};

// Sign change of f nearest to x_guess, by linear interpolation.
inline double root_near(const RealField& f, double x_guess) {
  const auto& g = f.grid();
  const double s = (x_guess - g.x_min()) / g.dx();
  if (s < 1.0 || s > double(g.size()) - 2.0) return std::numeric_limits<double>::quiet_NaN();
  const auto i0 = std::size_t(s);
  for (std::size_t r = 0; r < 64; ++r) {
    for (long di : {-long(r), long(r)}) {
      const long i = long(i0) + di;
      if (i < 0 || i + 1 >= long(g.size())) continue;
      const double a = f[std::size_t(i)], b = f[std::size_t(i) + 1];
      if (a == 0.0) return g.x(std::size_t(i));
      if ((a > 0) != (b > 0)) return g.x(std::size_t(i)) + g.dx() * a / (a - b);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline std::string sigma_regimes_csv(const ScenarioConfig& cfg, double t_max) {
  auto base = cfg.gaussian();
  base.regime = QuantumRegime{};
  auto diff = base;
  auto nik = base;
  const double rate = cfg.constants.hbar / (2.0 * cfg.constants.mass * cfg.initial.sigma0);
  diff.regime = std::holds_alternative<DiffusionRegime>(cfg.regime) ? cfg.regime
                                                                    : Regime{DiffusionRegime{cfg.constants.hbar / (2.0 * cfg.constants.mass)}};
  nik.regime = std::holds_alternative<NikolicRegime>(cfg.regime) ? cfg.regime : Regime{NikolicRegime{rate}};
  std::ostringstream os;
  os << "t,quantum,diffusion,nikolic\n" << std::setprecision(17);
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    const double t = t_max * i / n;
    os << t << ',' << gaussian::sigma(base, t) << ',';
    if (t > 0.0) os << gaussian::sigma(diff, t); else os << 0.0;
    os << ',' << gaussian::sigma(nik, t) << '\n';
  }
  return os.str();
}

struct Snapshot {
  WaveState state;
  MadelungFields fields;
};

inline MadelungFields extract_at(const WaveState& from, double t, const ScenarioConfig& cfg) {
  return extract(propagate_to(from, t, cfg.time.dt, cfg.solver()), cfg.scheme);
}

}  // namespace detail

/// Solver stage: snapshots at the configured times.
inline std::vector<detail::Snapshot> run_solver(const ScenarioConfig& cfg) {
  const auto grid = cfg.spatial_grid();
  auto state = initial_gaussian(grid, cfg.initial.sigma0, cfg.initial.center, cfg.initial.momentum, cfg.constants);
  std::vector<detail::Snapshot> out;
  for (double t : cfg.time.snapshots) {
    state = propagate_to(state, t, cfg.time.dt, cfg.solver());
    out.push_back({state, extract(state, cfg.scheme)});
  }
  return out;
}

namespace detail {

inline void quantum_field_rows(const ScenarioConfig& cfg, const std::vector<Snapshot>& snaps, RowSink& sink,
                               ArtifactWriter* art) {
  const auto gp = cfg.gaussian();
  const auto tol = tolerances(cfg.scheme);
  const auto& k = cfg.constants;
  const double delta = cfg.time.dt;
  const auto s0 = initial_gaussian(cfg.spatial_grid(), cfg.initial.sigma0, cfg.initial.center, cfg.initial.momentum, k);
  const double e_initial = energy(s0, cfg.scheme);
  const WaveState* anchor = &s0;

  for (const auto& snap : snaps) {
    const double t = snap.state.time;
    const auto& f = snap.fields;
    const auto& g = f.grid;
    if (art) art->write("fields_t" + time_tag(t) + ".csv", to_text([&](std::ostream& os) { write_fields_csv(os, f); }));

    const double s = gaussian::sigma(gp, t);
    sink.at_most("solver", "spreading_width", t, std::abs(centred_sigma(f.rho) - s) / s, 1e-6);
    sink.at_most("solver", "norm", t, std::abs(snap.state.norm() - 1.0), 1e-8);
    sink.at_most("solver", "energy_conservation", t, std::abs(energy(snap.state, cfg.scheme) - e_initial), 1e-8);

    // Time differences around te = max(t, delta).
    const double te = std::max(t, delta);
    if (anchor->time > te - delta) anchor = &s0;
    const auto before_state = propagate_to(*anchor, te - delta, cfg.time.dt, cfg.solver());
    const auto now_state = propagate_to(before_state, te, cfg.time.dt, cfg.solver());
    const auto after_state = propagate_to(now_state, te + delta, cfg.time.dt, cfg.solver());
    const auto before = extract(before_state, cfg.scheme);
    const auto now = extract(now_state, cfg.scheme);
    const auto after = extract(after_state, cfg.scheme);
    sink.at_most("madelung", "continuity", te, max_on_mask(continuity_residual(before, now, after, cfg.scheme), now.mask),
                 1e-5);
    {
      const auto du = material_acceleration(before, now, after, cfg.scheme);
      const auto bohm = bohm_acceleration(now, cfg.scheme);
      const double se = gaussian::sigma(gp, te);
      double worst = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (now.valid(i) && std::abs(gaussian::offset(gp, g.x(i), te)) <= 3.0 * se)
          worst = std::max(worst, std::abs(du[i] - bohm[i]));
      sink.at_most("madelung", "bohm_gradient_drives_flow", te, worst, tol.gradient);
    }

    sink.at_most("madelung", "force_decomposition", t,
                 max_on_mask(force_decomposition_residual(f, cfg.scheme), f.mask), tol.decomposition);
    {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!f.valid(i) || std::abs(gaussian::offset(gp, g.x(i), t)) > 3.0 * s) continue;
        const double ref = gaussian::local_mean_force(gp, g.x(i), t);
        num += (f.F_bar[i] - ref) * (f.F_bar[i] - ref);
        den += ref * ref;
      }
      sink.at_most("madelung", "local_mean_force_closed_form", t, std::sqrt(num / den), tol.force_closed_form);
    }
    const auto pr = pressures(f);
    sink.at_most("madelung", "enthalpy_identity", t, pr.max_enthalpy_residual, tol.enthalpy);
    {
      const double a = k.hbar / (2.0 * s);
      double worst = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (f.valid(i)) worst = std::max(worst, std::abs(pr.p_g[i] + pr.p_v[i] - f.rho[i] / k.mass * a * a));
      sink.at_most("madelung", "pressure_partition", t, worst, tol.partition);
      const double c = gaussian::offset(gp, 0.0, t) * -1.0;
      const double miss = std::max(std::abs(root_near(pr.p_v, c + s) - (c + s)),
                                   std::abs(root_near(pr.p_v, c - s) - (c - s)));
      sink.at_most("madelung", "vacuum_pressure_sign_change_cells", t, miss / g.dx(), 1.0);
    }

    const auto moments = force_moments(f, 4);
    sink.at_most("statistics", "mean_force", t, std::abs(moments.rows[0].lhs), 1e-8);
    sink.at_most("statistics", "force_dipole_moment", t, std::abs(moments.rows[1].lhs), 1e-8);
    sink.at_most("statistics", "force_quadrupole_moment", t, std::abs(moments.rows[2].lhs), 1e-8);
    const double x3f = -3.0 * k.hbar * k.hbar / (2.0 * k.mass);
    sink.at_most("statistics", "third_force_moment_rel", t, std::abs(moments.rows[3].lhs - x3f) / std::abs(x3f), 1e-6);
    double hierarchy = 0.0;
    for (const auto& row : moments.rows) hierarchy = std::max(hierarchy, std::abs(row.residual) / (1.0 + std::abs(row.rhs)));
    sink.at_most("statistics", "force_moment_hierarchy", t, hierarchy, 1e-6);
    if (art) art->write("moments_t" + time_tag(t) + ".json", moments.to_json().dump(2) + "\n");

    const auto e = energy_partition(snap.state, f);
    sink.at_most("statistics", "energy_partition", t, std::abs(e.E_total - e.K_mean - e.I_mean), tol.partition);
    sink.at_most("statistics", "bohm_equals_internal", t, std::abs(e.Q_mean - e.I_mean), 1e-6);
    sink.at_most("statistics", "gaussian_mean_energy", t, std::abs(e.E_total - gaussian::mean_energy(gp)), 1e-6);
    anchor = &snap.state;
  }
}

inline void uncertainty_rows(const ScenarioConfig& cfg, const std::vector<Snapshot>& snaps, RowSink& sink,
                             ArtifactWriter* art) {
  const auto& k = cfg.constants;
  const double bound = k.hbar / (2.0 * k.mass);
  if (snaps.size() >= 3) {
    std::vector<MadelungFields> fs;
    for (const auto& s : snaps) fs.push_back(s.fields);
    const auto r = uncertainty_check(fs);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : r.rows) worst = std::min(worst, row.product / bound);
    sink.at_least("statistics", "uncertainty_bound_ratio", std::numeric_limits<double>::quiet_NaN(), worst,
                  1.0 - tolerances(cfg.scheme).bound_slack);
  }
  for (const auto& s : snaps) {
    if (s.state.time != 0.0) continue;
    const auto& f = s.fields;
    const double mx = raw_moment(f.rho, 1);
    const double vx = raw_moment(f.rho, 2) - mx * mx;
    const double mv = integrate_with(f.grid, [&](std::size_t i, double) { return f.sqrt_rho[i] * f.sqrt_rho_u[i]; });
    const double vv = integrate_with(f.grid, [&](std::size_t i, double) {
      return f.sqrt_rho_u[i] * f.sqrt_rho_u[i] + f.sqrt_rho_u_prime[i] * f.sqrt_rho_u_prime[i];
    }) - mv * mv;
    sink.at_most("statistics", "minimum_uncertainty", 0.0, std::abs(std::sqrt(vx * vv) - bound), 1e-6);
  }

  // Second-moment identity from a symmetric triple around each later snapshot.
  const double h = identity_step;
  nlohmann::ordered_json detail_json = nlohmann::ordered_json::array();
  for (const auto& s : snaps) {
    const double t = s.state.time;
    if (t - h < 0.0) continue;
    const auto before = extract_at(initial_gaussian(cfg.spatial_grid(), cfg.initial.sigma0, cfg.initial.center,
                                                    cfg.initial.momentum, k),
                                   t - h, cfg);
    std::vector<MadelungFields> triple{before, s.fields, extract_at(s.state, t + h, cfg)};
    const auto r = uncertainty_check(triple);
    const auto& mid = r.rows[1];
    sink.at_most("statistics", "second_moment_identity", t, std::abs(mid.identity_residual), 1e-4);
    detail_json.push_back({{"time", t},
                           {"xv_sq", mid.xv_sq},
                           {"identity_rhs", mid.identity_rhs},
                           {"opposite_sign_rhs", mid.opposite_sign_rhs},
                           {"residual", mid.identity_residual},
                           {"x4", mid.x4},
                           {"v4", mid.v4},
                           {"cauchy_schwarz", mid.cauchy_schwarz}});
  }
  if (art) art->write("second_moment_identity.json", detail_json.dump(2) + "\n");
}

inline void ensemble_rows(const ScenarioConfig& cfg, RowSink& sink, ArtifactWriter* art) {
  const auto gp = cfg.gaussian();
  const auto& k = cfg.constants;
  const auto grid = cfg.spatial_grid();
  const double te = cfg.ensemble.time;
  const double sp = cfg.ensemble.slice_spacing;
  const auto s0 = initial_gaussian(grid, cfg.initial.sigma0, cfg.initial.center, cfg.initial.momentum, k);
  std::vector<MadelungFields> fs;
  std::vector<TrajectoryEnsemble> es;
  for (double t : {te - sp, te, te + sp}) {
    fs.push_back(extract_at(s0, t, cfg));
    es.push_back(sample_ensemble(fs.back(), cfg.ensemble.n, cfg.ensemble.seed, cfg.threads));
  }
  const auto& mid = es[1];

  const double bw = cfg.bandwidth();
  auto u_hat = local_mean(mid, [](double, double v) { return v; }, grid, bw);
  auto w_hat = local_mean(mid, [&](double x, double v) {
    const double d = v - gaussian::velocity(gp, x, te);
    return d * d;
  }, grid, bw);
  double z_u = 0.0, z_w = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (u_hat.counts[j] < 100) continue;
    const double x = grid.x(j);
    const double u_ref = window_average(gp, te, x, bw, [&](double y) { return gaussian::velocity(gp, y, te); });
    const double w_ref = window_average(gp, te, x, bw, [&](double y) {
      const double w = gaussian::osmotic_velocity(gp, y, te);
      return w * w;
    });
    z_u = std::max(z_u, std::abs(u_hat.estimate[j] - u_ref) / u_hat.standard_error[j]);
    z_w = std::max(z_w, std::abs(w_hat.estimate[j] - w_ref) / w_hat.standard_error[j]);
  }
  sink.at_most("ensemble", "local_mean_flow_z", te, z_u, 5.0);
  sink.at_most("ensemble", "local_mean_osmotic_variance_z", te, z_w, 5.0);

  auto obs = [](double, double v) { return v; };
  const auto glob = global_mean(mid, obs);
  sink.at_most("ensemble", "global_local_mean_z", te,
               std::abs(glob.value - integrate_local_mean(u_hat)) / glob.standard_error, 5.0);
  const auto kin = global_mean(mid, [&](double, double v) { return 0.5 * k.mass * v * v; });
  sink.at_most("ensemble", "sampled_energy_z", te, std::abs(kin.value - gaussian::mean_energy(gp)) / kin.standard_error,
               5.0);

  ConsistencyOptions opt;
  opt.batches = cfg.ensemble.batches;
  const auto rep = consistency_check(es, fs, opt);
  sink.at_most("ensemble", "sampled_continuity_z", te, rep.max_continuity_z, 5.0);
  sink.at_most("ensemble", "sampled_momentum_balance_z", te, rep.max_momentum_z, 5.0);
  sink.at_most("ensemble", "sampled_momentum_flux_z", te, rep.max_flux_z, 5.0);

  // The first n/4 samples of a chunked ensemble are the n/4 ensemble.
  const std::size_t quarter = cfg.ensemble.n / 4;
  if (quarter >= 16 * opt.batches) {
    std::vector<TrajectoryEnsemble> small = es;
    for (auto& e : small) {
      e.positions.resize(quarter);
      e.velocities.resize(quarter);
      e.n_samples = quarter;
    }
    const auto rq = consistency_check(small, fs, opt);
    sink.within("ensemble", "error_ratio_quarter_samples", te, rq.mean_momentum_se / rep.mean_momentum_se, 1.0, 4.0);
  }

  if (art) {
    art->write("local_mean_u.csv", to_text([&](std::ostream& os) { write_estimate_csv(os, u_hat); }));
    art->write("local_mean_u_prime_sq.csv", to_text([&](std::ostream& os) { write_estimate_csv(os, w_hat); }));
    art->write("consistency.csv", to_text([&](std::ostream& os) {
                 os << "t,x,continuity,continuity_se,momentum,momentum_se,flux,flux_se\n" << std::setprecision(17);
                 for (const auto& r : rep.rows)
                   os << r.time << ',' << r.x << ',' << r.continuity << ',' << r.continuity_se << ',' << r.momentum
                      << ',' << r.momentum_se << ',' << r.flux << ',' << r.flux_se << '\n';
               }));
    art->write("ensemble.json", ensemble_sidecar(mid, config_hash(cfg)).dump(2) + "\n");
  }
}

inline void classical_rows(const ScenarioConfig& cfg, RowSink& sink, ArtifactWriter* art) {
  const auto gp = cfg.gaussian();
  const auto grid = cfg.spatial_grid();
  const double delta = cfg.time.dt;
  const bool diffusion = std::holds_alternative<DiffusionRegime>(cfg.regime);
  const double t0 = diffusion ? cfg.regime_start : 0.0;
  const auto rho_start = RealField::sample(grid, [&](double x) { return gaussian::density(gp, x, t0); });
  auto density_at = [&](double t) {
    if (diffusion) return gaussian::diffuse_density(rho_start, std::get<DiffusionRegime>(cfg.regime).D, t - t0);
    return RealField::sample(grid, [&](double x) { return gaussian::density(gp, x, t); });
  };
  for (double t : cfg.time.snapshots) {
    const double te = std::max(t, t0 + delta);
    const auto rho = density_at(te);
    const double s = gaussian::sigma(gp, te);
    sink.at_most("regime", "spreading_width", te, std::abs(centred_sigma(rho) - s) / s, 1e-6);
    const auto u = velocity_from_continuity(density_at(te - delta), rho, density_at(te + delta), 2.0 * delta);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(gaussian::offset(gp, grid.x(i), te)) > 3.0 * s) continue;
      const double ref = gaussian::velocity(gp, grid.x(i), te);
      worst = std::max(worst, std::abs(u[i] - ref));
      scale = std::max(scale, std::abs(ref));
    }
    sink.at_most("regime", "flow_from_continuity_rel", te, worst / std::max(scale, 1e-300), 1e-5);
    if (art)
      art->write("density_t" + time_tag(te) + ".csv", to_text([&](std::ostream& os) {
                   os << "x,rho,u,u_closed_form\n" << std::setprecision(17);
                   for (std::size_t i = 0; i < grid.size(); ++i)
                     os << grid.x(i) << ',' << rho[i] << ',' << u[i] << ',' << gaussian::velocity(gp, grid.x(i), te)
                        << '\n';
                 }));
  }
}

}  // namespace detail

/// Full verification suite. Artifacts go to cfg.output when write is set.
inline SuiteReport run_verify(const ScenarioConfig& cfg, bool write = true) {
  validate(cfg);
  SuiteReport report;
  report.regime = regime_name(cfg.regime);
  report.config_hash = config_hash(cfg);
  std::optional<ArtifactWriter> art;
  if (write) art.emplace(cfg.output);
  ArtifactWriter* a = art ? &*art : nullptr;
  detail::RowSink sink(report.rows);

  double t_max = 0.0;
  for (double t : cfg.time.snapshots) t_max = std::max(t_max, t);
  if (cfg.regime.index() == 0) {
    const auto snaps = run_solver(cfg);
    detail::quantum_field_rows(cfg, snaps, sink, a);
    detail::uncertainty_rows(cfg, snaps, sink, a);
    detail::ensemble_rows(cfg, sink, a);
  } else {
    detail::classical_rows(cfg, sink, a);
  }
  if (a) {
    a->write("sigma_regimes.csv", detail::sigma_regimes_csv(cfg, std::max(t_max, 1.0)));
    a->write("summary.json", report.to_json().dump(2) + "\n");
    a->write("summary.txt", detail::to_text([&](std::ostream& os) { report.print(os); }));
    a->write_manifest(cfg, "verify");
  }
  return report;
}

/// Snapshots of the hydrodynamic fields only.
inline void run_fields(const ScenarioConfig& cfg) {
  validate(cfg);
  require(cfg.regime.index() == 0, ErrorCode::RegimeMismatch, "fields are computed for the quantum regime");
  ArtifactWriter art(cfg.output);
  for (const auto& s : run_solver(cfg))
    art.write("fields_t" + detail::time_tag(s.state.time) + ".csv",
              detail::to_text([&](std::ostream& os) { write_fields_csv(os, s.fields); }));
  art.write_manifest(cfg, "fields");
}

/// Samples at the ensemble time with local-mean estimates of u and u'^2.
inline void run_ensemble(const ScenarioConfig& cfg) {
  validate(cfg);
  require(cfg.regime.index() == 0, ErrorCode::RegimeMismatch, "ensembles are sampled for the quantum regime");
  ArtifactWriter art(cfg.output);
  const auto s0 = initial_gaussian(cfg.spatial_grid(), cfg.initial.sigma0, cfg.initial.center, cfg.initial.momentum,
                                   cfg.constants);
  const auto f = detail::extract_at(s0, cfg.ensemble.time, cfg);
  const auto e = sample_ensemble(f, cfg.ensemble.n, cfg.ensemble.seed, cfg.threads);
  art.write("ensemble.csv", detail::to_text([&](std::ostream& os) { write_ensemble_csv(os, e); }));
  art.write("ensemble.json", ensemble_sidecar(e, config_hash(cfg)).dump(2) + "\n");
  const auto u = local_mean(e, [](double, double v) { return v; }, f.grid, cfg.bandwidth());
  const auto w = local_mean(e, [&](double x, double v) {
    const double d = v - detail::interpolate_masked(f.u, f.mask, x);
    return d * d;
  }, f.grid, cfg.bandwidth());
  art.write("local_mean_u.csv", detail::to_text([&](std::ostream& os) { write_estimate_csv(os, u); }));
  art.write("local_mean_u_prime_sq.csv", detail::to_text([&](std::ostream& os) { write_estimate_csv(os, w); }));
  art.write_manifest(cfg, "ensemble");
}

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"sigma0", "hbar", "mass", "dt", "n_points", "n_samples"};
  return names;
}

struct SweepReport {
  std::string parameter;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  double at(std::size_t row, const std::string& column) const {
    const auto it = std::find(columns.begin(), columns.end(), column);
    require(it != columns.end(), ErrorCode::InvalidArgument, "no sweep column " + column);
    return rows.at(row).at(std::size_t(it - columns.begin()));
  }

  /// Least-squares slope of log(-y) or log(y) against log(x).
  double log_slope(const std::string& x, const std::string& y) const {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double a = std::log(std::abs(at(i, x))), b = std::log(std::abs(at(i, y)));
      sx += a;
      sy += b;
      sxx += a * a;
      sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }

  /// Scalings read off the whole sweep.
  nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    if (rows.size() < 2) return j;
    if (parameter == "n_points") {
      j["decomposition_order"] = log_slope("dx", "max_decomposition_residual");
      j["force_order"] = log_slope("dx", "max_force_rel_l2");
    } else if (parameter == "n_samples") {
      j["momentum_se_exponent"] = -log_slope("n_samples", "mean_momentum_se");
      j["continuity_se_exponent"] = -log_slope("n_samples", "mean_continuity_se");
    } else {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        lo = std::min(lo, at(i, "third_force_moment_m_over_hbar2"));
        hi = std::max(hi, at(i, "third_force_moment_m_over_hbar2"));
      }
      j["normalized_third_force_moment_spread"] = hi - lo;
      if (parameter == "hbar") j["third_force_moment_hbar_exponent"] = log_slope("hbar", "third_force_moment");
      if (parameter == "mass") j["third_force_moment_mass_exponent"] = log_slope("mass", "third_force_moment");
    }
    return j;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["parameter"] = parameter;
    j["columns"] = columns;
    auto& list = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      auto row = nlohmann::ordered_json::array();
      for (double v : r) row.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr));
      list.push_back(row);
    }
    j["summary"] = summary();
    return j;
  }

  std::string csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) os << ',';
        if (std::isfinite(r[i])) os << r[i]; else os << "nan";
      }
      os << '\n';
    }
    return os.str();
  }
};

/// Re-runs the solver or ensemble stage for each value of one parameter and
/// records residuals, so orders and scalings can be read off.
inline SweepReport run_sweep(const ScenarioConfig& base, const std::string& parameter,
                             const std::vector<double>& values, bool write = true) {
  const auto& known = sweep_parameters();
  require(std::find(known.begin(), known.end(), parameter) != known.end(), ErrorCode::UnknownParameter,
          "cannot sweep '" + parameter + "'; choose one of sigma0, hbar, mass, dt, n_points, n_samples");
  require(!values.empty(), ErrorCode::InvalidArgument, "sweep needs at least one value");
  require(base.regime.index() == 0, ErrorCode::RegimeMismatch, "sweeps run in the quantum regime");
  SweepReport rep;
  rep.parameter = parameter;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (parameter == "n_samples") {
    rep.columns = {"n_samples", "mean_continuity_se", "mean_momentum_se", "mean_flux_se", "max_momentum_z",
                   "max_flow_deviation", "se_exponent", "se_ratio_per_4x"};
  } else {
    rep.columns = {parameter,           "dx",          "max_decomposition_residual", "max_force_rel_l2",
                   "third_force_moment", "third_force_moment_m_over_hbar2", "max_hierarchy_residual",
                   "energy_drift",      "observed_order"};
  }

  for (double v : values) {
    ScenarioConfig cfg = base;
    if (parameter == "sigma0") cfg.initial.sigma0 = v;
    else if (parameter == "hbar") cfg.constants.hbar = v;
    else if (parameter == "mass") cfg.constants.mass = v;
    else if (parameter == "dt") cfg.time.dt = v;
    else if (parameter == "n_points") cfg.grid.n_points = std::size_t(std::llround(v));
    else cfg.ensemble.n = std::size_t(std::llround(v));
    validate(cfg);
    const auto gp = cfg.gaussian();

    if (parameter == "n_samples") {
      const auto s0 = initial_gaussian(cfg.spatial_grid(), cfg.initial.sigma0, cfg.initial.center,
                                       cfg.initial.momentum, cfg.constants);
      const double te = cfg.ensemble.time, sp = cfg.ensemble.slice_spacing;
      std::vector<MadelungFields> fs;
      std::vector<TrajectoryEnsemble> es;
      for (double t : {te - sp, te, te + sp}) {
        fs.push_back(detail::extract_at(s0, t, cfg));
        es.push_back(sample_ensemble(fs.back(), cfg.ensemble.n, cfg.ensemble.seed, cfg.threads));
      }
      ConsistencyOptions opt;
      opt.batches = cfg.ensemble.batches;
      const auto r = consistency_check(es, fs, opt);
      const double s = gaussian::sigma(gp, te);
      const double h = s / 4.0;
      const double c = -gaussian::offset(gp, 0.0, te);
      const SpatialGrid coarse(c - 8 * h, c + 8 * h, 17, Boundary::vanishing);
      const auto est = local_mean(es[1], [](double, double v) { return v; }, coarse, h);
      double dev = 0.0;
      for (std::size_t j = 0; j < coarse.size(); ++j) {
        const double ref = detail::window_average(gp, te, coarse.x(j), h, [&](double y) { return gaussian::velocity(gp, y, te); });
        if (est.mask[j]) dev = std::max(dev, std::abs(est.estimate[j] - ref));
      }
      double exponent = nan;
      if (!rep.rows.empty())
        exponent = std::log(rep.rows.back()[2] / r.mean_momentum_se) / std::log(v / rep.rows.back()[0]);
      rep.rows.push_back({v, r.mean_continuity_se, r.mean_momentum_se, r.mean_flux_se, r.max_momentum_z, dev, exponent,
                          std::pow(4.0, exponent)});
      continue;
    }

    const auto snaps = run_solver(cfg);
    const double e0 = energy(initial_gaussian(cfg.spatial_grid(), cfg.initial.sigma0, cfg.initial.center,
                                              cfg.initial.momentum, cfg.constants),
                             cfg.scheme);
    double decomposition = 0.0, force = 0.0, hierarchy = 0.0, drift = 0.0, x3f = 0.0;
    for (const auto& snap : snaps) {
      const auto& f = snap.fields;
      const double t = snap.state.time;
      decomposition = std::max(decomposition, max_on_mask(force_decomposition_residual(f, cfg.scheme), f.mask));
      const double s = gaussian::sigma(gp, t);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < f.grid.size(); ++i) {
        if (!f.valid(i) || std::abs(gaussian::offset(gp, f.grid.x(i), t)) > 3.0 * s) continue;
        const double ref = gaussian::local_mean_force(gp, f.grid.x(i), t);
        num += (f.F_bar[i] - ref) * (f.F_bar[i] - ref);
        den += ref * ref;
      }
      force = std::max(force, std::sqrt(num / den));
      const auto m = force_moments(f, 4);
      for (const auto& row : m.rows) hierarchy = std::max(hierarchy, std::abs(row.residual) / (1.0 + std::abs(row.rhs)));
      x3f = m.rows[3].lhs;
      drift = std::max(drift, std::abs(energy(snap.state, cfg.scheme) - e0));
    }
    double order = nan;
    if (!rep.rows.empty() && parameter == "n_points") {
      const auto& prev = rep.rows.back();
      order = std::log(prev[2] / decomposition) / std::log(prev[1] / cfg.spatial_grid().dx());
    }
    rep.rows.push_back({v, cfg.spatial_grid().dx(), decomposition, force, x3f,
                        x3f * cfg.constants.mass / (cfg.constants.hbar * cfg.constants.hbar), hierarchy, drift, order});
  }

  if (write) {
    ArtifactWriter art(base.output);
    art.write("sweep_" + parameter + ".csv", rep.csv());
    auto j = rep.to_json();
    j["config_hash"] = config_hash(base);
    art.write("sweep_" + parameter + ".json", j.dump(2) + "\n");
    art.write_manifest(base, "sweep " + parameter);
  }
  return rep;
}

/// Numeric CSV with a header row; "nan" cells read as NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorCode::MissingArtifact, "CSV has no column " + name);
    return columns[std::size_t(it - header.begin())];
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), ErrorCode::MissingArtifact, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  t.columns.resize(t.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::size_t c = 0;
    for (std::string cell; std::getline(ls, cell, ',') && c < t.columns.size(); ++c)
      t.columns[c].push_back(std::strtod(cell.c_str(), nullptr));
  }
  return t;
}

/// SVG figures from the CSV artifacts in a directory. Returns the files
/// written.
inline std::vector<std::string> run_plot(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::MissingArtifact, "no artifact directory " + dir.string());
  std::vector<std::pair<double, fs::path>> snapshots;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("fields_t", 0) == 0 && entry.path().extension() == ".csv")
      snapshots.emplace_back(std::strtod(name.substr(8).c_str(), nullptr), entry.path());
  }
  require(!snapshots.empty(), ErrorCode::MissingArtifact,
          "no fields_t*.csv in " + dir.string() + "; run verify or fields first");
  std::sort(snapshots.begin(), snapshots.end());

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const svg::LinePlot& plot) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << svg::render(plot);
    written.push_back(name);
  };
  auto masked = [](const CsvTable& t, const std::string& col) {
    auto v = t.column(col);
    const auto& m = t.column("mask");
    for (std::size_t i = 0; i < v.size(); ++i)
      if (m[i] == 0.0) v[i] = std::numeric_limits<double>::quiet_NaN();
    return v;
  };
  // Central window where the density is visible.
  auto trimmed = [](const CsvTable& t, std::vector<double> v) {
    const auto& rho = t.column("rho");
    const double peak = *std::max_element(rho.begin(), rho.end());
    for (std::size_t i = 0; i < v.size(); ++i)
      if (rho[i] < 1e-4 * peak) v[i] = std::numeric_limits<double>::quiet_NaN();
    return v;
  };

  std::vector<CsvTable> tables;
  for (const auto& s : snapshots) tables.push_back(read_csv(s.second));
  struct Panel {
    const char* column;
    const char* file;
    const char* title;
  };
  for (const Panel& p : {Panel{"rho", "density.svg", "density rho(x)"}, Panel{"u", "flow_velocity.svg", "flow velocity u(x)"},
                         Panel{"Q", "bohm_potential.svg", "Bohm potential Q(x)"},
                         Panel{"F_bar", "local_mean_force.svg", "local-mean force F(x)"}}) {
    svg::LinePlot plot{p.title, "x", p.column, {}};
    for (std::size_t i = 0; i < tables.size(); ++i)
      plot.series.push_back({"t = " + detail::time_tag(snapshots[i].first), tables[i].column("x"),
                             trimmed(tables[i], std::string(p.column) == "rho" ? tables[i].column("rho")
                                                                               : masked(tables[i], p.column))});
    emit(p.file, plot);
  }
  {
    const auto& t = tables.back();
    auto pg = trimmed(t, t.column("p_g"));
    auto pv = trimmed(t, t.column("p_v"));
    std::vector<double> sum(pg.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = pg[i] + pv[i];
    emit("pressure_partition.svg",
         svg::LinePlot{"pressure partition at t = " + detail::time_tag(snapshots.back().first), "x", "pressure",
                       {{"gas p_g", t.column("x"), pg}, {"vacuum p_v", t.column("x"), pv}, {"p_g + p_v", t.column("x"), sum}}});
  }
  if (fs::exists(dir / "sigma_regimes.csv")) {
    const auto t = read_csv(dir / "sigma_regimes.csv");
    emit("sigma_regimes.svg", svg::LinePlot{"packet width by regime", "t", "sigma(t)",
                                            {{"quantum", t.column("t"), t.column("quantum")},
                                             {"diffusion", t.column("t"), t.column("diffusion")},
                                             {"linear spreading", t.column("t"), t.column("nikolic")}}});
  }
  if (fs::exists(dir / "sweep_n_points.csv")) {
    const auto t = read_csv(dir / "sweep_n_points.csv");
    emit("convergence.svg", svg::LinePlot{"force decomposition residual", "dx", "max residual",
                                          {{"residual", t.column("dx"), t.column("max_decomposition_residual"), true}},
                                          true, true});
  }
  return written;
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_SUITE_HPP
