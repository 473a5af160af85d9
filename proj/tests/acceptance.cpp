#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "igabem/checks.hpp"
#include "igabem/run_config.hpp"

using namespace igabem;

namespace {

void report(int criterion, const char* name, bool pass, const std::string& details) {
  std::printf("[ACCEPTANCE] criterion %d (%s): %s  %s\n", criterion, name,
              pass ? "PASS" : "FAIL", details.c_str());
  std::fflush(stdout);
}

RunConfig base_config(const std::string& geometry, const std::string& mode, int budget) {
  RunConfig cfg;
  cfg.geometry = geometry;
  cfg.p = 0;
  cfg.mode = mode;
  cfg.theta = 0.5;
  cfg.budget = budget;
  cfg.timing = false;
  return cfg;
}

const RunResult& cube_uniform() {
  static RunResult r = run_experiment(base_config("cube", "uniform", 1600));
  return r;
}

const RunResult& cube_adaptive() {
  static RunResult r = run_experiment(base_config("cube", "adaptive", 2000));
  return r;
}

const RunResult& pipe_adaptive() {
  static RunResult r = run_experiment(base_config("quarter_pipe", "adaptive", 2000));
  return r;
}

// log-log interpolation of a trace's estimator at a given element count
bool interpolate_estimator(const AdaptiveTrace& t, double n, double& eta) {
  for (size_t k = 0; k + 1 < t.rows.size(); ++k) {
    double n0 = t.rows[k].num_elements, n1 = t.rows[k + 1].num_elements;
    if (n0 <= n && n <= n1) {
      double a = (std::log(n) - std::log(n0)) / (std::log(n1) - std::log(n0));
      eta = std::exp((1.0 - a) * std::log(t.rows[k].estimator) +
                     a * std::log(t.rows[k + 1].estimator));
      return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("criterion 1: cube uniform rate") {
  const RunResult& r = cube_uniform();
  REQUIRE(r.trace.rows.size() == 5);
  CHECK(r.trace.rows.back().num_elements == 1536);
  double rate = fit_rate(r.trace, 3);
  bool pass = std::abs(rate - (-1.0 / 3.0)) <= 0.12;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "rate(last 3) = %.4f, target -1/3 +- 0.12", rate);
  report(1, "cube p=0 uniform to 1536 elements", pass, buf);
  CHECK(pass);
}

TEST_CASE("cube capacity cross-check") {
  // Aitken limit of |Phi|_V^2 approximates 4*pi*cap(cube), with the unit
  // cube capacity 0.6606782 scaled by the side length 1/10.
  const RunResult& r = cube_uniform();
  REQUIRE(r.trace.has_limit);
  double expected = 4.0 * M_PI * 0.6606782 * 0.1;
  MESSAGE("extrapolated energy ", r.trace.energy_sq_limit, " vs capacity value ", expected);
  CHECK(std::abs(r.trace.energy_sq_limit - expected) < 0.02 * expected);
}

TEST_CASE("criterion 2: cube adaptive rate and curve comparison") {
  const RunResult& r = cube_adaptive();
  REQUIRE(r.trace.rows.size() >= 5);
  double rate = fit_rate(r.trace, 4);
  bool rate_ok = std::abs(rate - (-0.5)) <= 0.15;

  // the adaptive curve must lie below the uniform one at matched element
  // counts from uniform level 3 on
  const RunResult& u = cube_uniform();
  bool below_ok = true;
  int compared = 0;
  for (size_t ell = 3; ell < u.trace.rows.size(); ++ell) {
    double n = u.trace.rows[ell].num_elements;
    double eta_ad;
    if (!interpolate_estimator(r.trace, n, eta_ad)) continue;
    ++compared;
    if (eta_ad >= u.trace.rows[ell].estimator) below_ok = false;
  }
  bool pass = rate_ok && below_ok && compared > 0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "rate(last 4) = %.4f (target -1/2 +- 0.15); adaptive below uniform at %d "
                "matched counts: %s",
                rate, compared, below_ok ? "yes" : "no");
  report(2, "cube p=0 adaptive to ~2000 elements", pass, buf);
  CHECK(pass);

  // Refinement concentrates along the cube edges. Bisecting an
  // edge-touching element produces two touching and two interior children,
  // so the touching fraction approaches 1/2 from below; on uniform meshes
  // of this size it would be ~12% and shrinking.
  const MultiPatchMesh& mesh = r.trace.final_mesh;
  int touching = 0;
  for (const Element& e : mesh.elements()) {
    const PatchHierMesh& pm = mesh.patch(e.patch);
    if (e.i1 == 0 || e.i2 == 0 || e.i1 == pm.cells(0, e.level) - 1 ||
        e.i2 == pm.cells(1, e.level) - 1)
      ++touching;
  }
  double frac = static_cast<double>(touching) / mesh.num_elements();
  MESSAGE("fraction of elements touching a cube edge: ", frac);
  CHECK(frac >= 1.0 / 3.0);
}

TEST_CASE("criterion 3: quarter pipe adaptive rate and reliability ratio") {
  const RunResult& r = pipe_adaptive();
  REQUIRE(r.trace.rows.size() >= 5);
  double rate = fit_rate(r.trace, 4);
  bool rate_ok = std::abs(rate - (-0.75)) <= 0.2;

  std::vector<double> ratios;
  for (const TraceRow& row : r.trace.rows)
    if (row.has_energy_error && row.energy_error > 0.0 && row.estimator > 0.0)
      ratios.push_back(row.energy_error / row.estimator);
  bool ratio_ok = ratios.size() >= 3;
  double max_ratio = 0.0, median = 0.0;
  if (ratio_ok) {
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    median = sorted[sorted.size() / 2];
    max_ratio = sorted.back();
    ratio_ok = max_ratio <= 2.0 * median;
  }
  bool pass = rate_ok && ratio_ok;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "rate(last 4) = %.4f (target -3/4 +- 0.2); error/estimator max %.3f vs 2x "
                "median %.3f",
                rate, max_ratio, 2.0 * median);
  report(3, "quarter pipe p=0 adaptive to ~2000 elements", pass, buf);
  CHECK(pass);
}

TEST_CASE("quarter pipe uniform refinement sanity") {
  // nested uniform refinement: energy grows (so the energy error is
  // non-increasing for any fixed limit) and the estimator strictly decreases
  RunConfig cfg = base_config("quarter_pipe", "uniform", 96);
  RunResult r = run_experiment(cfg);
  REQUIRE(r.trace.rows.size() == 3);
  for (size_t k = 1; k < r.trace.rows.size(); ++k) {
    CHECK(r.trace.rows[k].energy_sq >
          r.trace.rows[k - 1].energy_sq - 1e-12 * std::abs(r.trace.rows[k - 1].energy_sq));
    CHECK(r.trace.rows[k].estimator < r.trace.rows[k - 1].estimator);
  }
}

TEST_CASE("quarter pipe p=1 and p=2 rates (reported, not gated)") {
  // asymptotic paper rates -5/4 and -7/4 are not reliably reached at desk
  // scale; the fitted values are reported for reference
  for (int p : {1, 2}) {
    RunConfig cfg = base_config("quarter_pipe", "adaptive", p == 1 ? 420 : 300);
    cfg.p = p;
    RunResult r = run_experiment(cfg);
    double rate = fit_rate(r.trace, 4);
    std::printf("[REPORT] quarter pipe p=%d adaptive to %d elements: estimator rate %.4f "
                "(asymptotic paper rate %.2f)\n",
                p, r.trace.rows.back().num_elements, rate, -(0.75 + 0.5 * p));
    std::fflush(stdout);
    CHECK(rate < -0.5);  // sanity only: clearly convergent
  }
}

TEST_CASE("criterion 4: double layer identity on the cube") {
  BoundaryGeometry cube = make_cube();
  MultiPatchMesh mesh = initial_mesh(uniform_degree_spaces(6, 0), cube.topology(),
                                     NeighborMode::SupportOrTouch);
  QuadConfig q;
  DoubleLayerPotential K1(cube, mesh, [](int, const Vec2&, const Vec3&) { return 1.0; }, q);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uni(0.1, 0.9);
  double worst = 0.0;
  for (int it = 0; it < 20; ++it) {
    SurfacePoint p{static_cast<int>(rng() % 6), {uni(rng), uni(rng)}};
    worst = std::max(worst, std::abs(K1(p) + 0.5));
  }
  bool pass = worst <= 1e-3;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "max |K1 + 1/2| = %.2e at 20 random smooth points", worst);
  report(4, "double layer identity", pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 5: quadrature oracle") {
  CheckResult r = run_check("quadrature-oracle", 0);
  report(5, "identical-panel oracle and center potential", r.pass, r.details);
  CHECK(r.pass);
}

TEST_CASE("criterion 6: property suites") {
  bool all = true;
  std::string summary;
  for (const CheckResult& r : run_all_checks(7)) {
    std::printf("  [property] %-18s %s (%s)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.details.c_str());
    all = all && r.pass;
    if (!r.pass) summary += r.name + " ";
  }
  report(6, "property suites", all, all ? "all suites pass" : ("failing: " + summary));
  CHECK(all);
}

TEST_CASE("criterion 7: determinism of the adaptive cube run") {
  const RunResult& first = cube_adaptive();
  RunResult second = run_experiment(base_config("cube", "adaptive", 2000));
  bool pass = first.csv == second.csv;
  report(7, "byte-identical CSV across reruns", pass,
         pass ? "two runs agree byte for byte" : "CSV outputs differ");
  CHECK(pass);
}
