#include "igabem/run_config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace igabem {

void RunConfig::apply_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "geometry") geometry = value.get<std::string>();
    else if (key == "geometry_file") geometry_file = value.get<std::string>();
    else if (key == "p") p = value.get<int>();
    else if (key == "mode") mode = value.get<std::string>();
    else if (key == "theta") theta = value.get<double>();
    else if (key == "budget") budget = value.get<int>();
    else if (key == "n_reg") n_reg = value.get<int>();
    else if (key == "n_sing") n_sing = value.get<int>();
    else if (key == "rho_near") rho_near = value.get<double>();
    else if (key == "interp_degree") interp_degree = value.get<int>();
    else if (key == "output") output = value.get<std::string>();
    else if (key == "seed") seed = value.get<uint64_t>();
    else if (key == "estimator_floor") estimator_floor = value.get<double>();
    else if (key == "timing") timing = value.get<bool>();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  cfg.apply_json(ss.str());
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (p < 0 || p > 2) throw std::invalid_argument("config: p must be 0, 1, or 2");
  if (mode != "adaptive" && mode != "uniform")
    throw std::invalid_argument("config: mode must be 'adaptive' or 'uniform'");
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("config: theta must be in (0,1]");
  if (budget < 1) throw std::invalid_argument("config: budget must be positive");
  if (n_reg < 1 || n_sing < 1) throw std::invalid_argument("config: quadrature orders must be >= 1");
  if (rho_near <= 0.0) throw std::invalid_argument("config: rho_near must be positive");
  if (interp_degree < 0) throw std::invalid_argument("config: interp_degree must be >= 0");
  if (estimator_floor < 0.0) throw std::invalid_argument("config: estimator_floor must be >= 0");
}

QuadConfig RunConfig::quad() const {
  QuadConfig q;
  q.n_reg = n_reg;
  q.n_sing = n_sing;
  q.rho_near = rho_near;
  q.interp_degree = interp_degree;
  return q;
}

LoopConfig RunConfig::loop() const {
  LoopConfig l;
  l.degree = p;
  l.uniform = mode == "uniform";
  l.theta = theta;
  l.element_budget = budget;
  l.estimator_floor = estimator_floor;
  l.quad = quad();
  l.timing = timing;
  return l;
}

BoundaryGeometry load_geometry(const RunConfig& cfg) {
  if (!cfg.geometry_file.empty()) return load_geometry_json(cfg.geometry_file);
  return geometry_by_name(cfg.geometry);
}

Vec3 quarter_pipe_source() {
  const double c = 0.95 * std::pow(2.0, -1.5);
  return 0.1 * Vec3(c, c, 0.5);
}

RhsFactory make_rhs_factory(const RunConfig& cfg, const BoundaryGeometry& geom) {
  if (cfg.geometry == "quarter_pipe" && cfg.geometry_file.empty()) {
    Vec3 y0 = quarter_pipe_source();
    SurfaceFn g = [y0](int, const Vec2&, const Vec3& x) { return kernel(x - y0); };
    QuadConfig q = cfg.quad();
    const BoundaryGeometry* gp = &geom;
    return [gp, g, q](const MultiPatchMesh& mesh) -> SurfaceFn {
      auto dl = std::make_shared<DoubleLayerPotential>(*gp, mesh, g, q);
      return [dl, g](int patch, const Vec2& t, const Vec3& x) {
        return (*dl)({patch, t}) + 0.5 * g(patch, t, x);
      };
    };
  }
  // cube (and user geometries): f = 1
  return [](const MultiPatchMesh&) -> SurfaceFn {
    return [](int, const Vec2&, const Vec3&) { return 1.0; };
  };
}

std::string trace_to_csv(const AdaptiveTrace& trace) {
  std::string out = "ell,num_elements,dofs,estimator,energy_error,num_marked,seconds\n";
  char buf[256];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.12g,", r.ell, r.num_elements, r.dofs,
                  r.estimator);
    out += buf;
    if (r.has_energy_error) {
      std::snprintf(buf, sizeof(buf), "%.12g", r.energy_error);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%d,%.3f\n", r.num_marked, r.seconds);
    out += buf;
  }
  return out;
}

RunResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  BoundaryGeometry geom = load_geometry(cfg);
  RhsFactory rhs = make_rhs_factory(cfg, geom);
  RunResult result;
  result.trace = adaptive_loop(geom, rhs, cfg.loop());
  result.csv = trace_to_csv(result.trace);
  return result;
}

}  // namespace igabem
