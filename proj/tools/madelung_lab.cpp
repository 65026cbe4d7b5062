// madelung-lab: scenario runner for the verification suite.
//
//   madelung-lab verify   [--config f] [--out d] [--seed s] [--scheme k] [--threads n]
//   madelung-lab sweep    <parameter> <values...> [same flags]
//   madelung-lab fields   [same flags]
//   madelung-lab ensemble [same flags]
//   madelung-lab plot     [--config f] [--out d]
//
// Output directory: --out, else MADELUNG_LAB_OUT, else the config value.
// Exit status: 0 when every row passes, 1 on a failing row, 2 on an error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "madelung_lab/madelung_lab.hpp"

namespace ml = madelung_lab;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string scheme;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Options& o, bool run_flags = true) {
  cmd->add_option("--config", o.config, "scenario JSON")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory");
  if (!run_flags) return;
  cmd->add_option("--seed", o.seed, "ensemble seed");
  cmd->add_option("--scheme", o.scheme, "spatial derivative scheme")->check(CLI::IsMember({"spectral", "central4"}));
  cmd->add_option("--threads", o.threads, "sampling threads")->check(CLI::PositiveNumber);
}

ml::ScenarioConfig resolve(const Options& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ml::ConfigError({{ml::ErrorCode::InvalidConfig, o.config, std::string("malformed JSON: ") + e.what()}});
    }
    if (!j.is_object()) throw ml::ConfigError({{ml::ErrorCode::InvalidConfig, o.config, "must be a JSON object"}});
  }
  if (o.seed) j["ensemble"]["seed"] = *o.seed;
  if (!o.scheme.empty()) j["scheme"] = o.scheme;
  if (o.threads) j["threads"] = *o.threads;
  if (const char* env = std::getenv("MADELUNG_LAB_OUT"); env && *env) j["output"] = env;
  if (!o.out.empty()) j["output"] = o.out;
  return ml::config_from_json(j);
}

int report_error(const ml::Error& e) {
  if (auto* c = dynamic_cast<const ml::ConfigError*>(&e)) {
    std::cerr << c->to_json().dump(2) << "\n";
  } else {
    nlohmann::ordered_json j;
    j["error"] = std::string(ml::to_string(e.code()));
    j["message"] = e.what();
    std::cerr << j.dump(2) << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum hydrodynamics verification lab"};
  app.set_version_flag("--version", std::string(ml::version));
  app.require_subcommand(1);

  Options o;
  std::string parameter;
  std::vector<double> values;

  auto* verify = app.add_subcommand("verify", "run every identity check and write the summary");
  auto* sweep = app.add_subcommand("sweep", "repeat the solver or ensemble stage over parameter values");
  auto* fields = app.add_subcommand("fields", "write field snapshots");
  auto* ensemble = app.add_subcommand("ensemble", "sample an ensemble and write local-mean estimates");
  auto* plot = app.add_subcommand("plot", "render SVG figures from CSV artifacts");
  for (auto* cmd : {verify, sweep, fields, ensemble}) add_common(cmd, o);
  add_common(plot, o, false);
  sweep->add_option("parameter", parameter, "sigma0, hbar, mass, dt, n_points or n_samples")->required();
  sweep->add_option("values", values, "values to run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o);
    if (*verify) {
      const auto report = ml::run_verify(cfg);
      report.print(std::cout);
      for (const auto* row : report.failures()) {
        std::cerr << "FAIL " << row->identity;
        if (std::isfinite(row->time)) std::cerr << " at t = " << row->time;
        std::cerr << ": " << row->value << " (" << row->tolerance() << ")\n";
      }
      std::cout << "artifacts in " << cfg.output << "\n";
      return report.all_pass() ? 0 : 1;
    }
    if (*sweep) {
      const auto rep = ml::run_sweep(cfg, parameter, values);
      std::cout << rep.csv() << rep.summary().dump(2) << "\n";
      return 0;
    }
    if (*fields) {
      ml::run_fields(cfg);
      std::cout << "artifacts in " << cfg.output << "\n";
      return 0;
    }
    if (*ensemble) {
      ml::run_ensemble(cfg);
      std::cout << "artifacts in " << cfg.output << "\n";
      return 0;
    }
    for (const auto& name : ml::run_plot(cfg.output)) std::cout << cfg.output << "/" << name << "\n";
    return 0;
  } catch (const ml::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "{\n  \"error\": \"Internal\",\n  \"message\": " << nlohmann::json(e.what()).dump() << "\n}\n";
    return 2;
  }
}
