#pragma once

#include <Eigen/Dense>

#include <vector>

#include "igabem/bem_core.hpp"

namespace igabem {

/// Per-element weighted-residual indicators; total = sqrt(sum of squares).
struct EstimatorReport {
  Eigen::VectorXd indicators;  // aligned with mesh.elements()
  double total = 0.0;
};

/// Weighted-residual a posteriori estimator: per element,
/// eta(T)^2 = diam(Gamma) * |T_hat|^(1/2) * |interpolated residual|^2_{H1(T)},
/// with the residual f - V phi interpolated by a tensor polynomial on
/// Chebyshev nodes and differentiated through the surface metric.
EstimatorReport estimate(const BoundaryGeometry& geom, const SplineSpace& space,
                         const Eigen::VectorXd& coeffs, const SurfaceFn& f, const QuadConfig& q);

/// Minimal-cardinality Doerfler marking: smallest descending-sorted prefix
/// with theta * total^2 <= sum of marked squares; ties broken by element
/// order.
std::vector<Element> doerfler_mark(const MultiPatchMesh& mesh, const EstimatorReport& report,
                                   double theta);

/// Last well-defined Aitken Delta^2 transform of the sequence, falling back
/// to the final raw value when the denominator nearly vanishes.
double aitken_limit(const std::vector<double>& seq);

/// sqrt(energy_sq_limit - c^T V c), clamped at zero within a relative
/// tolerance of 1e-10; a larger negative difference signals an inconsistent
/// extrapolation and throws.
double energy_error(const GalerkinSystem& system, const Eigen::VectorXd& solution,
                    double energy_sq_limit);

struct TraceRow {
  int ell = 0;
  int num_elements = 0;
  int dofs = 0;
  double estimator = 0.0;
  double energy_sq = 0.0;   // |Phi_ell|_V^2 = c . V c
  double energy_error = 0.0;
  bool has_energy_error = false;
  int num_marked = 0;
  double seconds = 0.0;
};

struct AdaptiveTrace {
  std::vector<TraceRow> rows;
  double energy_sq_limit = 0.0;
  bool has_limit = false;
  MultiPatchMesh final_mesh;  // mesh of the last recorded row
};

struct LoopConfig {
  int degree = 0;
  bool uniform = false;
  double theta = 0.5;
  int element_budget = 2500;
  double estimator_floor = 1e-10;
  QuadConfig quad;
  bool timing = true;
};

/// Right-hand sides that depend on the current mesh (e.g. Dirichlet data
/// passed through the double-layer operator, whose quadrature follows the
/// refinement).
using RhsFactory = std::function<SurfaceFn(const MultiPatchMesh& mesh)>;

/// Solve - estimate - mark - refine loop. Stops once the estimator falls
/// below the floor or the next refinement would exceed the element budget.
/// The recorded energy-norm sequence is Aitken-extrapolated at the end to
/// fill the energy-error column.
AdaptiveTrace adaptive_loop(const BoundaryGeometry& geom, const RhsFactory& make_f,
                            const LoopConfig& cfg);
AdaptiveTrace adaptive_loop(const BoundaryGeometry& geom, const SurfaceFn& f,
                            const LoopConfig& cfg);

/// Least-squares slope of log(estimator) against log(#elements) over the
/// last `window` trace points.
double fit_rate(const AdaptiveTrace& trace, int window);
double fit_rate(const std::vector<double>& num_elements, const std::vector<double>& values,
                int window);

/// Initial single-span ansatz spaces of the given degree, one per patch.
std::vector<TensorSplineSpace> uniform_degree_spaces(int num_patches, int degree);

}  // namespace igabem
