#ifndef MADELUNG_LAB_CONFIG_HPP
#define MADELUNG_LAB_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "madelung_lab/derivative.hpp"
#include "madelung_lab/error.hpp"
#include "madelung_lab/fields.hpp"
#include "madelung_lab/gaussian.hpp"
#include "madelung_lab/schrodinger.hpp"

namespace madelung_lab {

inline constexpr const char* version = "1.0.0";

/// One scenario: grid, constants, initial packet, time stepping, ensemble
/// and regime. Defaults form the reference scenario.
struct ScenarioConfig {
  struct GridSpec {
    double x_min = -40.0;
    double x_max = 40.0;
    std::size_t n_points = 4096;
    Boundary boundary = Boundary::periodic;
  } grid;

  PhysicalConstants constants;

  struct InitialSpec {
    double sigma0 = 1.0;
    double center = 0.0;
    double momentum = 0.0;
  } initial;

  struct TimeSpec {
    double dt = 1e-3;
    std::vector<double> snapshots{0.0, 1.0, 2.0, 4.0};
    std::optional<Method> method;  // follows the boundary when unset
  } time;

  struct EnsembleSpec {
    std::size_t n = 100000;
    std::uint64_t seed = 42;
    double bandwidth = 0.0;      // 0 selects 4 dx
    double time = 2.0;           // centre slice of the consistency check
    double slice_spacing = 0.05;
    std::size_t batches = 32;
  } ensemble;

  Scheme scheme = Scheme::spectral;
  Regime regime = QuantumRegime{};
  double regime_start = 0.5;  // first time of a diffusion run
  std::string output = "madelung-lab-out";
  unsigned threads = 1;

  SpatialGrid spatial_grid() const { return SpatialGrid(grid.x_min, grid.x_max, grid.n_points, grid.boundary); }

  Method solver() const {
    return time.method.value_or(grid.boundary == Boundary::periodic ? Method::splitstep : Method::implicit);
  }

  GaussianParams gaussian() const {
    return GaussianParams{initial.sigma0, constants, regime, initial.center, initial.momentum};
  }

  double bandwidth() const { return ensemble.bandwidth > 0.0 ? ensemble.bandwidth : 4.0 * spatial_grid().dx(); }
};

struct ConfigIssue {
  ErrorCode code;
  std::string path;
  std::string message;
};

/// Rejected configuration. what() lists every violation, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : Error(primary_code(issues), describe(issues)), issues_(std::move(issues)) {}

  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["error"] = std::string(to_string(code()));
    auto& list = j["violations"] = nlohmann::ordered_json::array();
    for (const auto& i : issues_)
      list.push_back({{"code", std::string(to_string(i.code))}, {"path", i.path}, {"message", i.message}});
    return j;
  }

 private:
  static ErrorCode primary_code(const std::vector<ConfigIssue>& issues) {
    return issues.empty() ? ErrorCode::InvalidConfig : issues.front().code;
  }
  static std::string describe(const std::vector<ConfigIssue>& issues) {
    std::string s = std::to_string(issues.size()) + " configuration violation(s)";
    for (const auto& i : issues) s += "\n  " + std::string(to_string(i.code)) + " at " + i.path + ": " + i.message;
    return s;
  }

  std::vector<ConfigIssue> issues_;
};

namespace detail {

// Half-width of the time difference in the second-moment identity check.
inline constexpr double identity_step = 1e-3;

inline double max_time(const ScenarioConfig& c) {
  double t = 0.0;
  for (double s : c.time.snapshots) t = std::max(t, s);
  if (c.regime.index() == 0) t = std::max(t, c.ensemble.time + c.ensemble.slice_spacing);
  return t + std::max(identity_step, c.time.dt);  // time differences look one step ahead
}

}  // namespace detail

/// Every violation in one pass; throws ConfigError if there is any.
inline void validate(const ScenarioConfig& c) {
  std::vector<ConfigIssue> issues;
  auto check = [&](bool ok, ErrorCode code, const std::string& path, const std::string& msg) {
    if (!ok) issues.push_back({code, path, msg});
  };
  const auto bad = ErrorCode::InvalidConfig;
  auto finite = [](double v) { return std::isfinite(v); };

  check(finite(c.grid.x_min) && finite(c.grid.x_max) && c.grid.x_max > c.grid.x_min, bad, "grid",
        "need finite x_min < x_max");
  check(c.grid.n_points >= SpatialGrid::min_points, bad, "grid.n_points", "need at least 16 points");
  check(finite(c.constants.hbar) && c.constants.hbar > 0.0, bad, "constants.hbar", "must be > 0");
  check(finite(c.constants.mass) && c.constants.mass > 0.0, bad, "constants.mass", "must be > 0");
  check(finite(c.initial.sigma0) && c.initial.sigma0 > 0.0, bad, "initial.sigma0", "must be > 0");
  check(finite(c.initial.center), bad, "initial.center", "must be finite");
  check(finite(c.initial.momentum), bad, "initial.momentum", "must be finite");
  check(finite(c.time.dt) && c.time.dt > 0.0, bad, "time.dt", "must be > 0");
  check(!c.time.snapshots.empty(), bad, "time.snapshots", "need at least one snapshot");
  for (std::size_t i = 0; i < c.time.snapshots.size(); ++i) {
    const double t = c.time.snapshots[i];
    check(finite(t) && t >= 0.0, bad, "time.snapshots[" + std::to_string(i) + "]", "must be >= 0");
    if (i > 0)
      check(t > c.time.snapshots[i - 1], bad, "time.snapshots[" + std::to_string(i) + "]",
            "snapshots must be strictly increasing");
  }
  const bool periodic = c.grid.boundary == Boundary::periodic;
  check(periodic || c.scheme == Scheme::central4, ErrorCode::SchemeBoundaryMismatch, "scheme",
        "spectral derivatives need a periodic grid");
  check((c.solver() == Method::splitstep) == periodic, ErrorCode::MethodBoundaryMismatch, "time.method",
        "splitstep needs a periodic grid and implicit a vanishing one");
  check(c.ensemble.n >= 16 * std::max<std::size_t>(c.ensemble.batches, 2), bad, "ensemble.n",
        "need at least 16 samples per batch");
  check(c.ensemble.batches >= 2, bad, "ensemble.batches", "need at least 2 batches");
  check(finite(c.ensemble.bandwidth) && c.ensemble.bandwidth >= 0.0, bad, "ensemble.bandwidth",
        "must be >= 0 (0 selects 4 dx)");
  check(finite(c.ensemble.slice_spacing) && c.ensemble.slice_spacing > 0.0, bad, "ensemble.slice_spacing",
        "must be > 0");
  check(finite(c.ensemble.time) && c.ensemble.time - c.ensemble.slice_spacing >= 0.0, bad, "ensemble.time",
        "must be >= slice_spacing");
  check(c.threads >= 1, bad, "threads", "must be >= 1");
  check(!c.output.empty(), bad, "output", "must not be empty");
  if (auto* d = std::get_if<DiffusionRegime>(&c.regime)) {
    check(finite(d->D) && d->D > 0.0, bad, "regime.D", "must be > 0");
    check(periodic, ErrorCode::SchemeBoundaryMismatch, "grid.boundary", "diffusion runs on a periodic grid");
    check(finite(c.regime_start) && c.regime_start > 0.0, ErrorCode::DiffusionAtZero, "regime.start",
          "diffusion starts from a nonzero width, need start > 0");
    for (double t : c.time.snapshots)
      check(t >= c.regime_start, ErrorCode::DiffusionAtZero, "time.snapshots",
            "diffusion snapshots must not precede regime.start");
  }
  if (auto* n = std::get_if<NikolicRegime>(&c.regime))
    check(finite(n->lambda) && n->lambda >= 0.0, bad, "regime.lambda", "must be >= 0");

  // Edge density can only be predicted for a well-formed scenario.
  if (issues.empty()) {
    auto p = c.gaussian();
    const double t0 = std::holds_alternative<DiffusionRegime>(c.regime) ? c.regime_start : 0.0;
    const double initial_edge = std::max(gaussian::density(p, c.grid.x_min, t0), gaussian::density(p, c.grid.x_max, t0));
    check(initial_edge < initial_edge_density_limit, ErrorCode::GridTooNarrow, "grid",
          "initial edge density " + std::to_string(initial_edge) + " is not below 1e-14");
    const double t_max = detail::max_time(c);
    double worst = 0.0;
    for (int k = 0; k <= 64; ++k) {
      const double t = t0 + (t_max - t0) * k / 64.0;
      worst = std::max({worst, gaussian::density(p, c.grid.x_min, t), gaussian::density(p, c.grid.x_max, t)});
    }
    check(worst <= snapshot_edge_density_limit, ErrorCode::GridTooNarrow, "grid",
          "edge density reaches " + std::to_string(worst) + " before t = " + std::to_string(t_max) +
              ", above 1e-12");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

/// Resolved configuration as JSON, every field present.
inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["grid"] = {{"x_min", c.grid.x_min},
               {"x_max", c.grid.x_max},
               {"n_points", c.grid.n_points},
               {"boundary", to_string(c.grid.boundary)}};
  j["constants"] = {{"hbar", c.constants.hbar}, {"mass", c.constants.mass}};
  j["initial"] = {{"sigma0", c.initial.sigma0}, {"center", c.initial.center}, {"momentum", c.initial.momentum}};
  j["time"] = {{"dt", c.time.dt}, {"snapshots", c.time.snapshots}, {"method", to_string(c.solver())}};
  j["ensemble"] = {{"n", c.ensemble.n},
                   {"seed", c.ensemble.seed},
                   {"bandwidth", c.ensemble.bandwidth},
                   {"time", c.ensemble.time},
                   {"slice_spacing", c.ensemble.slice_spacing},
                   {"batches", c.ensemble.batches}};
  j["scheme"] = to_string(c.scheme);
  nlohmann::ordered_json r;
  r["kind"] = regime_name(c.regime);
  if (auto* d = std::get_if<DiffusionRegime>(&c.regime)) {
    r["D"] = d->D;
    r["start"] = c.regime_start;
  }
  if (auto* n = std::get_if<NikolicRegime>(&c.regime)) r["lambda"] = n->lambda;
  j["regime"] = r;
  j["output"] = c.output;
  j["threads"] = c.threads;
  return j;
}

namespace detail {

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out, const std::string& path,
          std::vector<ConfigIssue>& issues) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    issues.push_back({ErrorCode::InvalidConfig, path + "." + key, "has the wrong type"});
  }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& path, std::vector<ConfigIssue>& issues) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      issues.push_back({ErrorCode::InvalidConfig, path.empty() ? k : path + "." + k, "unknown key"});
  }
}

inline const nlohmann::json* section(const nlohmann::json& j, const char* key, std::vector<ConfigIssue>& issues) {
  if (!j.contains(key)) return nullptr;
  if (!j.at(key).is_object()) {
    issues.push_back({ErrorCode::InvalidConfig, key, "must be an object"});
    return nullptr;
  }
  return &j.at(key);
}

}  // namespace detail

/// Reads a configuration over the defaults, then validates it. Unknown keys
/// and type errors are reported together with range violations.
inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  std::vector<ConfigIssue> issues;
  if (!j.is_object()) throw ConfigError({{ErrorCode::InvalidConfig, "", "configuration must be a JSON object"}});
  detail::reject_unknown(j, {"grid", "constants", "initial", "time", "ensemble", "scheme", "regime", "output", "threads"},
                         "", issues);
  using detail::read;
  if (auto* g = detail::section(j, "grid", issues)) {
    detail::reject_unknown(*g, {"x_min", "x_max", "n_points", "boundary"}, "grid", issues);
    read(*g, "x_min", c.grid.x_min, "grid", issues);
    read(*g, "x_max", c.grid.x_max, "grid", issues);
    read(*g, "n_points", c.grid.n_points, "grid", issues);
    std::string b = to_string(c.grid.boundary);
    read(*g, "boundary", b, "grid", issues);
    if (b == "periodic") c.grid.boundary = Boundary::periodic;
    else if (b == "vanishing") c.grid.boundary = Boundary::vanishing;
    else issues.push_back({ErrorCode::InvalidConfig, "grid.boundary", "must be periodic or vanishing"});
  }
  if (auto* k = detail::section(j, "constants", issues)) {
    detail::reject_unknown(*k, {"hbar", "mass"}, "constants", issues);
    read(*k, "hbar", c.constants.hbar, "constants", issues);
    read(*k, "mass", c.constants.mass, "constants", issues);
  }
  if (auto* i = detail::section(j, "initial", issues)) {
    detail::reject_unknown(*i, {"sigma0", "center", "momentum"}, "initial", issues);
    read(*i, "sigma0", c.initial.sigma0, "initial", issues);
    read(*i, "center", c.initial.center, "initial", issues);
    read(*i, "momentum", c.initial.momentum, "initial", issues);
  }
  if (auto* t = detail::section(j, "time", issues)) {
    detail::reject_unknown(*t, {"dt", "snapshots", "method"}, "time", issues);
    read(*t, "dt", c.time.dt, "time", issues);
    read(*t, "snapshots", c.time.snapshots, "time", issues);
    if (t->contains("method")) {
      std::string m;
      read(*t, "method", m, "time", issues);
      if (m == "splitstep") c.time.method = Method::splitstep;
      else if (m == "implicit") c.time.method = Method::implicit;
      else issues.push_back({ErrorCode::InvalidConfig, "time.method", "must be splitstep or implicit"});
    }
  }
  if (auto* e = detail::section(j, "ensemble", issues)) {
    detail::reject_unknown(*e, {"n", "seed", "bandwidth", "time", "slice_spacing", "batches"}, "ensemble", issues);
    read(*e, "n", c.ensemble.n, "ensemble", issues);
    read(*e, "seed", c.ensemble.seed, "ensemble", issues);
    read(*e, "bandwidth", c.ensemble.bandwidth, "ensemble", issues);
    read(*e, "time", c.ensemble.time, "ensemble", issues);
    read(*e, "slice_spacing", c.ensemble.slice_spacing, "ensemble", issues);
    read(*e, "batches", c.ensemble.batches, "ensemble", issues);
  }
  if (j.contains("scheme")) {
    std::string s;
    read(j, "scheme", s, "", issues);
    if (s == "spectral") c.scheme = Scheme::spectral;
    else if (s == "central4") c.scheme = Scheme::central4;
    else issues.push_back({ErrorCode::InvalidConfig, "scheme", "must be spectral or central4"});
  }
  if (auto* r = detail::section(j, "regime", issues)) {
    detail::reject_unknown(*r, {"kind", "D", "lambda", "start"}, "regime", issues);
    std::string kind = "quantum";
    read(*r, "kind", kind, "regime", issues);
    if (kind == "quantum") {
      c.regime = QuantumRegime{};
    } else if (kind == "diffusion") {
      DiffusionRegime d;
      read(*r, "D", d.D, "regime", issues);
      read(*r, "start", c.regime_start, "regime", issues);
      c.regime = d;
    } else if (kind == "nikolic") {
      NikolicRegime n;
      read(*r, "lambda", n.lambda, "regime", issues);
      c.regime = n;
    } else {
      issues.push_back({ErrorCode::InvalidConfig, "regime.kind", "must be quantum, diffusion or nikolic"});
    }
  }
  read(j, "output", c.output, "", issues);
  read(j, "threads", c.threads, "", issues);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  validate(c);
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{ErrorCode::InvalidConfig, path, "cannot open configuration file"}});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({{ErrorCode::InvalidConfig, path, std::string("malformed JSON: ") + e.what()}});
  }
  return config_from_json(j);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of everything that determines the artifacts. Output location and
/// worker count are excluded because they do not change any result.
inline std::string config_hash(const ScenarioConfig& c) {
  auto j = to_json(c);
  j.erase("output");
  j.erase("threads");
  return hex64(fnv1a(j.dump()));
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_CONFIG_HPP
