#pragma once

#include <cstdint>
#include <string>

#include "igabem/adaptivity.hpp"

namespace igabem {

/// Flat experiment configuration, parseable from a JSON document with
/// exactly these fields (unknown keys are rejected).
struct RunConfig {
  std::string geometry = "cube";  // "cube", "quarter_pipe", or a name for --geometry-file
  std::string geometry_file;      // optional path to a JSON geometry
  int p = 0;                      // spline degree, 0..2
  std::string mode = "adaptive";  // "adaptive" or "uniform"
  double theta = 0.5;
  int budget = 2500;
  int n_reg = 4;
  int n_sing = 8;
  double rho_near = 1.0;
  int interp_degree = 0;  // 0 selects p + 2
  std::string output;     // CSV path; empty writes to stdout
  uint64_t seed = 0;      // used by the property-check runner
  double estimator_floor = 1e-10;
  bool timing = true;     // false zeroes the seconds column for reproducible output

  static RunConfig from_json_file(const std::string& path);
  void apply_json(const std::string& json_text);
  void validate() const;

  QuadConfig quad() const;
  LoopConfig loop() const;
};

/// Geometry selected by the config (fixture by name or JSON file).
BoundaryGeometry load_geometry(const RunConfig& cfg);

/// Right-hand side of the experiment: f = 1 on the cube; on the quarter
/// pipe the trace of the shifted fundamental solution passed through
/// (K + 1/2).
RhsFactory make_rhs_factory(const RunConfig& cfg, const BoundaryGeometry& geom);

/// The near-singularity location of the quarter-pipe experiment.
Vec3 quarter_pipe_source();

struct RunResult {
  AdaptiveTrace trace;
  std::string csv;
};

RunResult run_experiment(const RunConfig& cfg);

std::string trace_to_csv(const AdaptiveTrace& trace);

}  // namespace igabem
