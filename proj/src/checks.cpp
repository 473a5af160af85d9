#include "igabem/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "igabem/adaptivity.hpp"
#include "igabem/run_config.hpp"

namespace igabem {

namespace {

MultiPatchMesh cube_start(int p) {
  static const InterfaceTopology topo = make_cube().topology();
  return initial_mesh(uniform_degree_spaces(6, p), topo,
                      p == 0 ? NeighborMode::SupportOrTouch : NeighborMode::Standard);
}

MultiPatchMesh random_refined(MultiPatchMesh mesh, int steps, std::mt19937_64& rng) {
  for (int s = 0; s < steps; ++s) {
    const auto& els = mesh.elements();
    std::uniform_int_distribution<size_t> pick(0, els.size() - 1);
    mesh = refine(mesh, {els[pick(rng)]});
  }
  return mesh;
}

CheckResult check_thb_partition(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double max_dev = 0.0;
  for (int p : {0, 1, 2}) {
    SplineSpace space = build_basis(random_refined(cube_start(p), 5, rng));
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(space.dim());
    for (int it = 0; it < 400; ++it) {
      int patch = static_cast<int>(rng() % 6);
      Vec2 t(uni(rng), uni(rng));
      max_dev = std::max(max_dev,
                         std::abs(space.eval_thb_combination(ones, patch, t) - 1.0));
    }
  }
  std::ostringstream os;
  os << "max |sum Trunc - 1| = " << max_dev;
  return {"thb-partition", max_dev <= 1e-10, os.str()};
}

CheckResult check_trunc_bounds(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst = 0.0;
  for (int p : {0, 1, 2}) {
    SplineSpace space = build_basis(random_refined(cube_start(p), 5, rng));
    for (int it = 0; it < 1000; ++it) {
      int i = static_cast<int>(rng() % space.dim());
      Vec2 t(uni(rng), uni(rng));
      if (space.fn(i).patch != 0) continue;
      double trunc = space.eval_thb(space.thb(i), t);
      double plain = space.eval_fn(i, t);
      worst = std::max({worst, -trunc, trunc - plain});
    }
  }
  std::ostringstream os;
  os << "max bound violation = " << worst;
  return {"trunc-bounds", worst <= 1e-12, os.str()};
}

CheckResult check_admissibility(uint64_t seed) {
  std::mt19937_64 rng(seed);
  int steps_done = 0;
  int max_elements = 0;
  bool ok = true;
  for (int p : {0, 1}) {
    MultiPatchMesh mesh = cube_start(p);
    for (int s = 0; s < 100 && ok; ++s) {
      const auto& els = mesh.elements();
      std::uniform_int_distribution<size_t> pick(0, els.size() - 1);
      std::vector<Element> marked = {els[pick(rng)]};
      MultiPatchMesh next = refine(mesh, marked);
      // every refined element is replaced by exactly its four children
      for (const Element& e : mesh.elements()) {
        if (next.is_active(e)) continue;
        int found = 0;
        double area = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            Element child{e.patch, e.level + 1, 2 * e.i1 + a, 2 * e.i2 + b};
            if (next.is_active(child)) {
              ++found;
              area += next.element_area(child);
            }
          }
        if (found != 4 || std::abs(area - mesh.element_area(e)) > 1e-14) ok = false;
      }
      mesh = next;
      if (!is_admissible(mesh)) ok = false;
      max_elements = std::max(max_elements, mesh.num_elements());
      ++steps_done;
      if (mesh.num_elements() > 1200) mesh = cube_start(p);  // keep the walk bounded
    }
  }
  std::ostringstream os;
  os << steps_done << " refine steps, max " << max_elements << " elements";
  return {"admissibility", ok, os.str()};
}

CheckResult check_overlay(uint64_t seed) {
  std::mt19937_64 rng(seed);
  bool ok = true;
  double max_constant = 0.0;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    MultiPatchMesh base = cube_start(0);
    MultiPatchMesh a = random_refined(base, 3, rng);
    MultiPatchMesh b = random_refined(base, 3, rng);
    MultiPatchMesh o = overlay(a, b);
    if (!is_admissible(o)) ok = false;
    int slack = a.num_elements() + b.num_elements() - base.num_elements() - o.num_elements();
    if (slack < 0) ok = false;
    if (b.num_elements() > base.num_elements()) {
      max_constant = std::max(
          max_constant, static_cast<double>(o.num_elements() - a.num_elements()) /
                            static_cast<double>(b.num_elements() - base.num_elements()));
    }
    if (o.num_elements() <= 64) {
      // brute-force overlay: keep elements contained in an element of the
      // other mesh
      std::vector<Element> expect;
      auto contains = [](const std::array<double, 4>& outer, const std::array<double, 4>& inner) {
        return outer[0] <= inner[0] + 1e-14 && inner[1] <= outer[1] + 1e-14 &&
               outer[2] <= inner[2] + 1e-14 && inner[3] <= outer[3] + 1e-14;
      };
      for (const Element& e : a.elements())
        for (const Element& f : b.elements())
          if (e.patch == f.patch && contains(b.element_rect(f), a.element_rect(e)))
            expect.push_back(e);
      for (const Element& e : b.elements())
        for (const Element& f : a.elements())
          if (e.patch == f.patch && contains(a.element_rect(f), b.element_rect(e)))
            expect.push_back(e);
      std::sort(expect.begin(), expect.end());
      expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
      if (expect != o.elements()) ok = false;
    }
  }
  std::ostringstream os;
  os << "empirical overlay constant = " << max_constant;
  return {"overlay", ok && max_constant <= 1.0 + 1e-12, os.str()};
}

CheckResult check_doerfler(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  MultiPatchMesh mesh = uniform_refine(cube_start(0));
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    int n = 4 + static_cast<int>(rng() % 9);  // up to 12 nonzero entries
    EstimatorReport rep;
    rep.indicators = Eigen::VectorXd::Zero(mesh.num_elements());
    for (int k = 0; k < n; ++k) rep.indicators[k] = uni(rng);
    rep.total = rep.indicators.norm();
    double theta = 0.05 + 0.9 * uni(rng);
    auto marked = doerfler_mark(mesh, rep, theta);
    // brute force minimal cardinality over all subsets of the nonzeros
    double total = rep.indicators.squaredNorm();
    int best = n + 1;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      double acc = 0.0;
      int count = 0;
      for (int k = 0; k < n; ++k)
        if (mask & (1u << k)) {
          acc += rep.indicators[k] * rep.indicators[k];
          ++count;
        }
      if (acc >= theta * total - 1e-14 * total) best = std::min(best, count);
    }
    if (static_cast<int>(marked.size()) != best) ok = false;
  }
  return {"doerfler", ok, ok ? "minimal cardinality matches brute force" : "mismatch found"};
}

CheckResult check_quadrature_oracle(uint64_t) {
  // polar-coordinate oracle for the coinciding flat unit square
  QuadRule1D g = gauss_rule(64);
  double oracle = 0.0;
  for (int i = 0; i < g.order; ++i) {
    double theta = g.nodes[i] * M_PI / 4.0;
    double c = std::cos(theta), s = std::sin(theta);
    oracle += g.weights[i] * (M_PI / 4.0) * (1.0 / (2.0 * c) - s / (6.0 * c * c));
  }
  oracle *= 2.0 / M_PI;

  KnotVector kv(1, {0, 0, 1, 1});
  Eigen::MatrixX4d ctrl(4, 4);
  ctrl.row(0) << 0, 0, 0, 1;
  ctrl.row(1) << 0, 1, 0, 1;
  ctrl.row(2) << 1, 0, 0, 1;
  ctrl.row(3) << 1, 1, 0, 1;
  std::vector<NurbsPatch> patches;
  patches.emplace_back(kv, kv, ctrl);
  BoundaryGeometry sq(std::move(patches));
  InterfaceTopology topo;
  topo.num_patches = 1;
  MultiPatchMesh mesh =
      initial_mesh(uniform_degree_spaces(1, 0), topo, NeighborMode::SupportOrTouch);
  SplineSpace space = build_basis(mesh);
  auto one = [](const Vec2&) { return 1.0; };

  std::ostringstream os;
  os << "identical-panel errors:";
  double final_err = 0.0;
  for (int n : {4, 6, 8, 10, 12}) {
    QuadConfig q;
    q.n_sing = n;
    double err = std::abs(
        panel_pair_integral(sq, mesh, mesh.elements()[0], mesh.elements()[0], one, one, q) -
        oracle);
    os << " n=" << n << ": " << err;
    final_err = err;
  }
  QuadConfig q;
  q.n_sing = 12;
  double center = eval_single_layer(sq, space, Eigen::VectorXd::Ones(1), {0, {0.5, 0.5}}, q);
  double center_err = std::abs(center - std::log(1.0 + std::sqrt(2.0)) / M_PI);
  os << "; center potential error = " << center_err;
  return {"quadrature-oracle", final_err <= 1e-6 && center_err <= 1e-6, os.str()};
}

CheckResult check_galerkin(uint64_t) {
  BoundaryGeometry cube = make_cube();
  QuadConfig q;
  bool ok = true;
  std::ostringstream os;
  for (int refinements = 0; refinements <= 1; ++refinements) {
    MultiPatchMesh mesh = cube_start(0);
    for (int r = 0; r < refinements; ++r) mesh = uniform_refine(mesh);
    SplineSpace space = build_basis(mesh);
    GalerkinSystem sys = assemble_system(
        cube, space, [](int, const Vec2&, const Vec3&) { return 1.0; }, q);
    double asym = (sys.V - sys.V.transpose()).lpNorm<Eigen::Infinity>() /
                  sys.V.lpNorm<Eigen::Infinity>();
    Eigen::LLT<Eigen::MatrixXd> llt(sys.V);
    bool spd = llt.info() == Eigen::Success;
    Eigen::VectorXd c = solve_spd(sys.V, sys.b);
    double ortho = (sys.V * c - sys.b).lpNorm<Eigen::Infinity>();
    os << "[" << mesh.num_elements() << " elements: asym " << asym << ", ortho " << ortho
       << "] ";
    if (!(asym <= 1e-10 && spd && ortho <= 1e-9)) ok = false;
  }
  return {"galerkin", ok, os.str()};
}

CheckResult check_quasi_interpolant(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  bool ok = true;
  std::ostringstream os;

  // projection: S = all elements reproduces members of the space
  for (int p : {0, 1}) {
    MultiPatchMesh mesh = random_refined(cube_start(p), 3, rng);
    SplineSpace space = build_basis(mesh);
    Eigen::VectorXd gc(space.dim());
    for (int i = 0; i < space.dim(); ++i) gc[i] = uni(rng) - 0.5;
    auto gf = [&](int patch, double t1, double t2) {
      return space.eval_hb_combination(gc, patch, Vec2(t1, t2));
    };
    Eigen::VectorXd c = quasi_interpolate(space, space.mesh().elements(), gf);
    double max_err = 0.0;
    for (int it = 0; it < 200; ++it) {
      int patch = static_cast<int>(rng() % 6);
      Vec2 t(uni(rng), uni(rng));
      max_err = std::max(max_err, std::abs(space.eval_thb_combination(c, patch, t) -
                                           gf(patch, t[0], t[1])));
    }
    os << "p=" << p << " projection err " << max_err << "; ";
    if (max_err > 1e-10) ok = false;
  }

  // locality on a uniform single-patch mesh
  InterfaceTopology topo;
  topo.num_patches = 1;
  MultiPatchMesh m =
      initial_mesh(uniform_degree_spaces(1, 0), topo, NeighborMode::SupportOrTouch);
  for (int k = 0; k < 4; ++k) m = uniform_refine(m);
  SplineSpace space = build_basis(m);
  std::vector<Element> S;
  for (const Element& e : m.elements())
    if (e.i1 >= 2 && e.i1 < 14 && e.i2 >= 2 && e.i2 < 14) S.push_back(e);
  Eigen::VectorXd gc(space.dim());
  for (int i = 0; i < space.dim(); ++i) gc[i] = uni(rng) - 0.5;
  auto gf = [&](int patch, double t1, double t2) {
    return space.eval_hb_combination(gc, patch, Vec2(t1, t2));
  };
  Eigen::VectorXd c = quasi_interpolate(space, S, gf);
  double off_S = 0.0, interior_err = 0.0;
  for (const Element& e : m.elements()) {
    auto r = m.element_rect(e);
    Vec2 mid(0.5 * (r[0] + r[1]), 0.5 * (r[2] + r[3]));
    bool in_S = e.i1 >= 2 && e.i1 < 14 && e.i2 >= 2 && e.i2 < 14;
    bool deep = e.i1 >= 6 && e.i1 < 10 && e.i2 >= 6 && e.i2 < 10;
    if (!in_S) off_S = std::max(off_S, std::abs(space.eval_thb_combination(c, 0, mid)));
    if (deep)
      interior_err = std::max(interior_err, std::abs(space.eval_thb_combination(c, 0, mid) -
                                                     gf(0, mid[0], mid[1])));
  }
  os << "vanishes off S to " << off_S << ", interior projection err " << interior_err;
  if (off_S > 1e-12 || interior_err > 1e-10) ok = false;
  return {"quasi-interpolant", ok, os.str()};
}

}  // namespace

std::vector<std::string> check_names() {
  return {"thb-partition", "trunc-bounds", "admissibility",      "overlay",
          "doerfler",      "galerkin",     "quadrature-oracle",  "quasi-interpolant"};
}

CheckResult run_check(const std::string& name, uint64_t seed) {
  if (name == "thb-partition") return check_thb_partition(seed);
  if (name == "trunc-bounds") return check_trunc_bounds(seed);
  if (name == "admissibility") return check_admissibility(seed);
  if (name == "overlay") return check_overlay(seed);
  if (name == "doerfler") return check_doerfler(seed);
  if (name == "galerkin") return check_galerkin(seed);
  if (name == "quadrature-oracle") return check_quadrature_oracle(seed);
  if (name == "quasi-interpolant") return check_quasi_interpolant(seed);
  throw std::invalid_argument("unknown check suite: " + name);
}

std::vector<CheckResult> run_all_checks(uint64_t seed) {
  std::vector<CheckResult> out;
  for (const std::string& name : check_names()) out.push_back(run_check(name, seed));
  return out;
}

}  // namespace igabem
