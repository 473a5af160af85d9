#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "igabem/linalg.hpp"
#include "igabem/spline_kernel.hpp"
#include "igabem/topology.hpp"

namespace igabem {

/// Tensor-product NURBS surface patch over [0,1]^2. Weights identically 1
/// give a polynomial spline patch.
class NurbsPatch {
 public:
  /// ctrl holds rows (x,y,z,w) indexed by i1*n2+i2 where n1, n2 are the
  /// basis counts of the knot vectors and w > 0.
  NurbsPatch(KnotVector kv1, KnotVector kv2, Eigen::MatrixX4d ctrl);

  const KnotVector& kv1() const { return kv1_; }
  const KnotVector& kv2() const { return kv2_; }

  Vec3 eval(const Vec2& t) const;
  Mat32 jacobian(const Vec2& t) const;
  /// det(J^T J); throws if nonpositive (degenerate parametrization).
  double gram_det(const Vec2& t) const;
  double sqrt_gram(const Vec2& t) const;
  /// Outward unit normal (sign fixed per patch at geometry construction).
  Vec3 unit_normal(const Vec2& t) const;

  double normal_sign() const { return normal_sign_; }
  void set_normal_sign(double s) { normal_sign_ = s; }

  /// Point and derived metric quantities in one evaluation.
  struct Frame {
    Vec3 x;
    Mat32 jac;
    double sqrt_gram;
    Vec3 normal;  // unit, oriented
  };
  Frame frame(const Vec2& t) const;

 private:
  KnotVector kv1_, kv2_;
  Eigen::MatrixX4d hcoef_;  // homogeneous coefficients (w*x, w*y, w*z, w)
  double normal_sign_ = 1.0;
};

/// |grad_Gamma v|^2 at gamma(t) from the pullback gradient of v
/// (first-fundamental-form inverse applied through the chain rule).
double surface_gradient_sq(const NurbsPatch& patch, const Vec2& t, const Vec2& grad_pullback);

/// Multi-patch boundary of a 3D domain with its interface topology.
class BoundaryGeometry {
 public:
  BoundaryGeometry() = default;
  /// Autodetects interfaces and corner classes by sampling patch edges when
  /// `interfaces` is empty; orients normals outward when an interior point
  /// of the domain is given.
  BoundaryGeometry(std::vector<NurbsPatch> patches, std::vector<Interface> interfaces = {},
                   std::optional<Vec3> interior_point = {});

  int num_patches() const { return static_cast<int>(patches_.size()); }
  const NurbsPatch& patch(int m) const { return patches_.at(m); }
  NurbsPatch& patch(int m) { return patches_.at(m); }
  const InterfaceTopology& topology() const { return topology_; }
  double diam() const { return diam_; }
  const std::optional<Vec3>& interior_point() const { return interior_point_; }

 private:
  std::vector<NurbsPatch> patches_;
  InterfaceTopology topology_;
  std::optional<Vec3> interior_point_;
  double diam_ = 0.0;
};

/// Parameter coordinates of edge point s on a patch edge (s in [0,1]).
Vec2 edge_point(int edge, double s);
/// Parameter coordinates of a patch corner (0..3).
Vec2 corner_point(int corner);

/// Boundary of the cube (0, 1/10)^3: six bilinear patches.
BoundaryGeometry make_cube();

/// Boundary of the quarter pipe
/// {(r cos b, r sin b, z)/10 : r in (1/2,1), b in (0,pi/2), z in (0,1)}:
/// four rational patches (walls and annuli) and two bilinear flats.
BoundaryGeometry make_quarter_pipe();

/// Geometry from a JSON file with fields
///   patches: [{degrees:[p1,p2], knots:[[...],[...]], n:[n1,n2],
///              control_points:[[x,y,z,w],...]}]   (i1-major order)
///   interfaces: [[patch_a,edge_a,patch_b,edge_b,reversed],...]  (optional)
///   interior_point: [x,y,z]                                     (optional)
BoundaryGeometry load_geometry_json(const std::string& path);

BoundaryGeometry geometry_by_name(const std::string& name);

}  // namespace igabem
