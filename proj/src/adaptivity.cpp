#include "igabem/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "igabem/parallel.hpp"

namespace igabem {

namespace {

// Values and first derivatives of the Lagrange basis over `nodes` at x.
void lagrange_basis(const std::vector<double>& nodes, double x, double* vals, double* ders) {
  const int m = static_cast<int>(nodes.size());
  for (int j = 0; j < m; ++j) {
    double v = 1.0;
    for (int k = 0; k < m; ++k)
      if (k != j) v *= (x - nodes[k]) / (nodes[j] - nodes[k]);
    vals[j] = v;
    double d = 0.0;
    for (int i = 0; i < m; ++i) {
      if (i == j) continue;
      double term = 1.0 / (nodes[j] - nodes[i]);
      for (int k = 0; k < m; ++k)
        if (k != j && k != i) term *= (x - nodes[k]) / (nodes[j] - nodes[k]);
      d += term;
    }
    ders[j] = d;
  }
}

std::vector<double> chebyshev_nodes(int count) {
  std::vector<double> nodes(count);
  for (int i = 0; i < count; ++i)
    nodes[i] = 0.5 + 0.5 * std::cos(M_PI * (2.0 * i + 1.0) / (2.0 * count));
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

}  // namespace

EstimatorReport estimate(const BoundaryGeometry& geom, const SplineSpace& space,
                         const Eigen::VectorXd& coeffs, const SurfaceFn& f,
                         const QuadConfig& q) {
  q.validate();
  const MultiPatchMesh& mesh = space.mesh();
  const int N = mesh.num_elements();
  int p_max = 0;
  for (int m = 0; m < mesh.num_patches(); ++m)
    p_max = std::max({p_max, mesh.level_info(m, 0).kv[0].degree(),
                      mesh.level_info(m, 0).kv[1].degree()});
  const int deg = q.interp_degree > 0 ? q.interp_degree : p_max + 2;
  const int m_nodes = deg + 1;
  const std::vector<double> nodes = chebyshev_nodes(m_nodes);

  // residual at the interpolation nodes of every element
  SingleLayerPotential pot(geom, space, coeffs, q);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> residual(
      N, m_nodes * m_nodes);
  parallel_for(static_cast<int64_t>(N) * m_nodes * m_nodes, [&](int64_t idx) {
    int e = static_cast<int>(idx / (m_nodes * m_nodes));
    int k = static_cast<int>(idx % (m_nodes * m_nodes));
    int a = k / m_nodes, b = k % m_nodes;
    const Element& elem = mesh.elements()[e];
    auto r = mesh.element_rect(elem);
    Vec2 t(r[0] + (r[1] - r[0]) * nodes[a], r[2] + (r[3] - r[2]) * nodes[b]);
    Vec3 x = geom.patch(elem.patch).eval(t);
    residual(e, k) = f(elem.patch, t, x) - pot({elem.patch, t});
  });

  // reference-interval Lagrange data at the Gauss points
  const int n_est = deg + 2;
  QuadRule1D g = gauss_rule(n_est);
  Eigen::MatrixXd L(n_est, m_nodes), D(n_est, m_nodes);
  for (int i = 0; i < n_est; ++i) {
    std::vector<double> v(m_nodes), d(m_nodes);
    lagrange_basis(nodes, g.nodes[i], v.data(), d.data());
    for (int j = 0; j < m_nodes; ++j) {
      L(i, j) = v[j];
      D(i, j) = d[j];
    }
  }

  EstimatorReport report;
  report.indicators.resize(N);
  const double diam = geom.diam();
  parallel_for(N, [&](int64_t e) {
    const Element& elem = mesh.elements()[e];
    auto r = mesh.element_rect(elem);
    const double w1 = r[1] - r[0], w2 = r[3] - r[2];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> R(
        residual.row(e).data(), m_nodes, m_nodes);
    double seminorm_sq = 0.0;
    for (int a = 0; a < n_est; ++a) {
      for (int b = 0; b < n_est; ++b) {
        double d1 = 0.0, d2 = 0.0;
        for (int i = 0; i < m_nodes; ++i)
          for (int j = 0; j < m_nodes; ++j) {
            d1 += D(a, i) * L(b, j) * R(i, j);
            d2 += L(a, i) * D(b, j) * R(i, j);
          }
        Vec2 t(r[0] + w1 * g.nodes[a], r[2] + w2 * g.nodes[b]);
        Vec2 grad(d1 / w1, d2 / w2);  // reference to parametric derivative
        double gsq = surface_gradient_sq(geom.patch(elem.patch), t, grad);
        seminorm_sq += g.weights[a] * g.weights[b] * w1 * w2 * gsq *
                       geom.patch(elem.patch).sqrt_gram(t);
      }
    }
    report.indicators[e] = std::sqrt(diam * std::sqrt(w1 * w2) * seminorm_sq);
  });
  report.total = report.indicators.norm();
  return report;
}

std::vector<Element> doerfler_mark(const MultiPatchMesh& mesh, const EstimatorReport& report,
                                   double theta) {
  if (report.indicators.size() == 0) throw std::invalid_argument("doerfler_mark: empty report");
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("doerfler_mark: theta must be in (0,1]");
  const int N = static_cast<int>(report.indicators.size());
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return report.indicators[a] * report.indicators[a] >
           report.indicators[b] * report.indicators[b];
  });
  const double target = theta * report.total * report.total;
  std::vector<Element> marked;
  double acc = 0.0;
  for (int k = 0; k < N && acc < target; ++k) {
    marked.push_back(mesh.elements()[order[k]]);
    acc += report.indicators[order[k]] * report.indicators[order[k]];
  }
  return marked;
}

double aitken_limit(const std::vector<double>& seq) {
  if (seq.size() < 3) throw std::invalid_argument("aitken_limit: need at least 3 entries");
  const size_t n = seq.size();
  double a0 = seq[n - 3], a1 = seq[n - 2], a2 = seq[n - 1];
  double denom = a2 - 2.0 * a1 + a0;
  if (std::abs(denom) < 1e-14 * std::abs(a2)) return a2;
  return a2 - (a2 - a1) * (a2 - a1) / denom;
}

double energy_error(const GalerkinSystem& system, const Eigen::VectorXd& solution,
                    double energy_sq_limit) {
  double energy_sq = solution.dot(system.V * solution);
  double diff = energy_sq_limit - energy_sq;
  if (diff < -1e-10 * std::abs(energy_sq_limit))
    throw std::runtime_error("energy_error: extrapolated limit below the Galerkin energy");
  return std::sqrt(std::max(0.0, diff));
}

AdaptiveTrace adaptive_loop(const BoundaryGeometry& geom, const RhsFactory& make_f,
                            const LoopConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0))
    throw std::invalid_argument("adaptive_loop: theta must be in (0,1]");
  cfg.quad.validate();
  NeighborMode mode = cfg.degree == 0 ? NeighborMode::SupportOrTouch : NeighborMode::Standard;
  MultiPatchMesh mesh = initial_mesh(uniform_degree_spaces(geom.num_patches(), cfg.degree),
                                     geom.topology(), mode);
  AdaptiveTrace trace;
  for (int ell = 0;; ++ell) {
    auto t0 = std::chrono::steady_clock::now();
    SplineSpace space = build_basis(mesh);
    SurfaceFn f = make_f(mesh);
    GalerkinSystem sys = assemble_system(geom, space, f, cfg.quad);
    Eigen::VectorXd c = solve_spd(sys.V, sys.b);
    EstimatorReport report = estimate(geom, space, c, f, cfg.quad);
    std::vector<Element> marked =
        cfg.uniform ? mesh.elements() : doerfler_mark(mesh, report, cfg.theta);

    TraceRow row;
    row.ell = ell;
    row.num_elements = mesh.num_elements();
    row.dofs = space.dim();
    row.estimator = report.total;
    row.energy_sq = c.dot(sys.V * c);
    row.num_marked = static_cast<int>(marked.size());
    row.seconds =
        cfg.timing
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            : 0.0;
    trace.rows.push_back(row);

    if (report.total < cfg.estimator_floor) break;
    MultiPatchMesh next = refine(mesh, marked);
    if (next.num_elements() > cfg.element_budget) break;
    mesh = std::move(next);
  }
  trace.final_mesh = mesh;

  if (trace.rows.size() >= 3) {
    std::vector<double> energies;
    for (const TraceRow& r : trace.rows) energies.push_back(r.energy_sq);
    trace.energy_sq_limit = aitken_limit(energies);
    trace.has_limit = true;
    for (TraceRow& r : trace.rows) {
      double diff = trace.energy_sq_limit - r.energy_sq;
      if (diff < -1e-10 * std::abs(trace.energy_sq_limit)) {
        r.has_energy_error = false;  // extrapolation inconsistent for this row
      } else {
        r.energy_error = std::sqrt(std::max(0.0, diff));
        r.has_energy_error = true;
      }
    }
  }
  return trace;
}

AdaptiveTrace adaptive_loop(const BoundaryGeometry& geom, const SurfaceFn& f,
                            const LoopConfig& cfg) {
  return adaptive_loop(geom, [&f](const MultiPatchMesh&) { return f; }, cfg);
}

double fit_rate(const std::vector<double>& num_elements, const std::vector<double>& values,
                int window) {
  if (num_elements.size() != values.size() || num_elements.size() < 2)
    throw std::invalid_argument("fit_rate: need at least two points");
  int n = static_cast<int>(num_elements.size());
  int start = std::max(0, n - window);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (int i = start; i < n; ++i) {
    double x = std::log(num_elements[i]);
    double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  double denom = count * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) throw std::invalid_argument("fit_rate: degenerate abscissae");
  return (count * sxy - sx * sy) / denom;
}

double fit_rate(const AdaptiveTrace& trace, int window) {
  std::vector<double> n, eta;
  for (const TraceRow& r : trace.rows) {
    n.push_back(static_cast<double>(r.num_elements));
    eta.push_back(r.estimator);
  }
  return fit_rate(n, eta, window);
}

std::vector<TensorSplineSpace> uniform_degree_spaces(int num_patches, int degree) {
  std::vector<double> knots;
  for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
  for (int i = 0; i <= degree; ++i) knots.push_back(1.0);
  KnotVector kv(degree, knots, degree == 0);
  return std::vector<TensorSplineSpace>(num_patches, TensorSplineSpace{kv, kv});
}

}  // namespace igabem
