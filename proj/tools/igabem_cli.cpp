#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "igabem/checks.hpp"
#include "igabem/run_config.hpp"

namespace {

using namespace igabem;

void add_config_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_path,
                      std::string& geometry_positional) {
  cmd->add_option("geometry", geometry_positional, "geometry fixture name (cube, quarter_pipe)");
  cmd->add_option("--config", config_path, "JSON config file (flags override its values)");
  cmd->add_option("--geometry-file", cfg.geometry_file, "JSON geometry description");
  cmd->add_option("--p", cfg.p, "spline degree (0, 1, or 2)");
  cmd->add_option("--mode", cfg.mode, "adaptive or uniform");
  cmd->add_option("--theta", cfg.theta, "Doerfler parameter in (0,1]");
  cmd->add_option("--budget", cfg.budget, "element budget");
  cmd->add_option("--n-reg", cfg.n_reg, "regular tensor Gauss order");
  cmd->add_option("--n-sing", cfg.n_sing, "singular quadrature order per direction");
  cmd->add_option("--rho-near", cfg.rho_near, "near-field threshold ratio");
  cmd->add_option("--interp-degree", cfg.interp_degree,
                  "residual interpolation degree (0 = p+2)");
  cmd->add_option("--output", cfg.output, "output path (default: stdout)");
  cmd->add_option("--seed", cfg.seed, "seed for property checks");
  cmd->add_option("--estimator-floor", cfg.estimator_floor, "stop once the estimator drops below");
  cmd->add_flag("--no-timing", [&cfg](int64_t) { cfg.timing = false; },
                "write zeros to the seconds column for byte-reproducible output");
}

RunConfig resolve_config(const std::string& config_path, const RunConfig& flag_values,
                         const CLI::App* cmd, const std::string& geometry_positional) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::from_json_file(config_path);
  // command-line flags override file values
  auto touched = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (!geometry_positional.empty()) cfg.geometry = geometry_positional;
  if (touched("--geometry-file")) cfg.geometry_file = flag_values.geometry_file;
  if (touched("--p")) cfg.p = flag_values.p;
  if (touched("--mode")) cfg.mode = flag_values.mode;
  if (touched("--theta")) cfg.theta = flag_values.theta;
  if (touched("--budget")) cfg.budget = flag_values.budget;
  if (touched("--n-reg")) cfg.n_reg = flag_values.n_reg;
  if (touched("--n-sing")) cfg.n_sing = flag_values.n_sing;
  if (touched("--rho-near")) cfg.rho_near = flag_values.rho_near;
  if (touched("--interp-degree")) cfg.interp_degree = flag_values.interp_degree;
  if (touched("--output")) cfg.output = flag_values.output;
  if (touched("--seed")) cfg.seed = flag_values.seed;
  if (touched("--estimator-floor")) cfg.estimator_floor = flag_values.estimator_floor;
  if (touched("--no-timing")) cfg.timing = false;
  cfg.validate();
  return cfg;
}

int write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return 0;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "cannot write " << path << "\n";
    return 1;
  }
  out << content;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive isogeometric boundary element solver for the 3D Laplace "
               "single-layer equation on multi-patch spline boundaries"};
  app.require_subcommand(1);

  RunConfig run_flags, dump_flags;
  std::string run_config_path, dump_config_path;
  std::string run_geometry, dump_geometry;

  CLI::App* run_cmd = app.add_subcommand("run", "run a convergence experiment and emit CSV");
  add_config_flags(run_cmd, run_flags, run_config_path, run_geometry);

  CLI::App* check_cmd = app.add_subcommand("check", "run a property-check suite");
  std::string suite = "all";
  uint64_t check_seed = 0;
  check_cmd->add_option("suite", suite, "suite name or 'all'");
  check_cmd->add_option("--seed", check_seed, "random seed");

  CLI::App* dump_cmd =
      app.add_subcommand("mesh-dump", "run the loop and dump the final mesh snapshot");
  add_config_flags(dump_cmd, dump_flags, dump_config_path, dump_geometry);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) {
      RunConfig cfg = resolve_config(run_config_path, run_flags, run_cmd, run_geometry);
      RunResult result;
      try {
        result = run_experiment(cfg);
      } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
      }
      if (write_output(cfg.output, result.csv) != 0) return 1;
      if (!cfg.output.empty()) std::cout << "wrote " << cfg.output << "\n";
      const auto& rows = result.trace.rows;
      if (rows.size() >= 2) {
        int window = std::min<int>(4, static_cast<int>(rows.size()));
        std::printf("estimator rate (last %d points): %.3f\n", window,
                    fit_rate(result.trace, window));
        std::vector<double> n, err;
        for (const TraceRow& r : rows)
          if (r.has_energy_error && r.energy_error > 0.0) {
            n.push_back(r.num_elements);
            err.push_back(r.energy_error);
          }
        if (n.size() >= 2) {
          int w = std::min<int>(4, static_cast<int>(n.size()));
          std::printf("energy error rate (last %d points): %.3f\n", w, fit_rate(n, err, w));
        }
      }
      return 0;
    }
    if (check_cmd->parsed()) {
      std::vector<CheckResult> results;
      try {
        if (suite == "all") {
          results = run_all_checks(check_seed);
        } else {
          results.push_back(run_check(suite, check_seed));
        }
      } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 1;
      }
      bool all_pass = true;
      for (const CheckResult& r : results) {
        std::printf("%-18s %s  (%s)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                    r.details.c_str());
        all_pass = all_pass && r.pass;
      }
      return all_pass ? 0 : 2;
    }
    if (dump_cmd->parsed()) {
      RunConfig cfg = resolve_config(dump_config_path, dump_flags, dump_cmd, dump_geometry);
      RunResult result;
      try {
        result = run_experiment(cfg);
      } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
      }
      std::ostringstream os;
      result.trace.final_mesh.dump(os);
      return write_output(cfg.output, os.str());
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
