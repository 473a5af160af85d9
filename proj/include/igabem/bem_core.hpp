#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

#include "igabem/geometry.hpp"
#include "igabem/hier_basis.hpp"
#include "igabem/panel_quadrature.hpp"

namespace igabem {

/// Quadrature configuration for Galerkin assembly and potential evaluation.
struct QuadConfig {
  int n_reg = 4;       // tensor Gauss order for separated panel pairs
  int n_sing = 8;      // order per direction after the regularizing transforms
  double rho_near = 1.0;  // dist < rho_near * max diam upgrades to n_sing
  int interp_degree = 0;  // residual interpolation degree, 0 = ansatz degree + 2

  void validate() const;
};

/// Laplace fundamental solution G(z) = 1 / (4 pi |z|).
double kernel(const Vec3& z);

struct SurfacePoint {
  int patch = 0;
  Vec2 t{0.0, 0.0};
};

/// Scalar function on the boundary, given patch, parameter, and position.
using SurfaceFn = std::function<double(int patch, const Vec2& t, const Vec3& x)>;

/// Galerkin double integral of G(x-y) fa(x) fb(y) over two active elements
/// with surface measures, via the regularizing transforms for touching
/// panels and tensor Gauss otherwise. fa and fb take patch parameters.
double panel_pair_integral(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                           const Element& a, const Element& b,
                           const std::function<double(const Vec2&)>& fa,
                           const std::function<double(const Vec2&)>& fb, const QuadConfig& q);

struct GalerkinSystem {
  Eigen::MatrixXd V;  // symmetric positive definite single-layer matrix
  Eigen::VectorXd b;  // load vector
};

/// Galerkin density with its coefficient vector over the space's basis.
/// The space is referenced, not owned.
struct Density {
  const SplineSpace* space = nullptr;
  Eigen::VectorXd coeffs;
};

Eigen::MatrixXd assemble(const BoundaryGeometry& geom, const SplineSpace& space,
                         const QuadConfig& q);
Eigen::VectorXd assemble_rhs(const BoundaryGeometry& geom, const SplineSpace& space,
                             const SurfaceFn& f, const QuadConfig& q);
GalerkinSystem assemble_system(const BoundaryGeometry& geom, const SplineSpace& space,
                               const SurfaceFn& f, const QuadConfig& q);

/// Cholesky solve with one step of iterative refinement; throws if the
/// matrix is not numerically SPD or the relative residual exceeds 1e-10.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& V, const Eigen::VectorXd& b);

/// Debug dump of a square matrix: an 8-byte little-endian dimension header
/// followed by row-major float64 entries.
void dump_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix_binary(const std::string& path);

/// Single-layer potential of a Galerkin density, evaluated on the boundary.
/// Far panels use cached source data, near panels adaptive subdivision, and
/// the panel containing the target a polar Duffy transform.
class SingleLayerPotential {
 public:
  SingleLayerPotential(const BoundaryGeometry& geom, const SplineSpace& space,
                       Eigen::VectorXd coeffs, const QuadConfig& q);
  double operator()(const SurfacePoint& p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Double-layer potential of continuous boundary data g at smooth points
/// (element interiors).
class DoubleLayerPotential {
 public:
  DoubleLayerPotential(const BoundaryGeometry& geom, const MultiPatchMesh& mesh, SurfaceFn g,
                       const QuadConfig& q);
  double operator()(const SurfacePoint& p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

double eval_single_layer(const BoundaryGeometry& geom, const SplineSpace& space,
                         const Eigen::VectorXd& coeffs, const SurfacePoint& p,
                         const QuadConfig& q);
double eval_double_layer(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                         const SurfaceFn& g, const SurfacePoint& p, const QuadConfig& q);

}  // namespace igabem
