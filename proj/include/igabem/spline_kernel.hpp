#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace igabem {

/// Gauss-Legendre rule on [0,1]: positive weights summing to 1,
/// exact for polynomials of degree 2*order-1.
struct QuadRule1D {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadRule1D gauss_rule(int n);

/// Nonzero B-spline values at a point: basis indices
/// [first, first+count) carry values v[0..count).
struct BasisWindow {
  int first = 0;
  int count = 0;
  std::array<double, 8> v{};
  std::array<double, 8> dv{};  // filled only by the *_derivs variant
};

/// Open knot vector of degree p on [0,1].
///
/// Knots are 0-based: t_0..t_{N+p} with N basis functions. The first and
/// last p+1 knots are clamped to 0 and 1. Interior multiplicity is at most
/// p, or p+1 when `relaxed_multiplicity` is set (needed for piecewise
/// constants and discontinuous refinement).
///
/// Point evaluation is right-continuous at interior knots and the last
/// basis function satisfies B_{N-1}(1) = 1.
class KnotVector {
 public:
  KnotVector(int degree, std::vector<double> knots, bool relaxed_multiplicity = false);

  int degree() const { return degree_; }
  int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  bool relaxed_multiplicity() const { return relaxed_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Distinct knot values; consecutive pairs are the nonempty spans.
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  int num_spans() const { return static_cast<int>(breakpoints_.size()) - 1; }
  /// Index into breakpoints() of knot j (exact, no tolerance).
  int knot_breakpoint_index(int j) const { return knot_bp_index_[j]; }

  /// Half-open span [lo, hi) of breakpoint indices on which basis j is nonzero.
  std::pair<int, int> support_span_range(int j) const;

  /// Knot index mu with t in [t_mu, t_{mu+1}), right-continuous; t = 1 maps
  /// to the last nonempty span.
  int find_span(double t) const;
  /// Breakpoint-interval index of t under the same convention.
  int find_breakpoint_span(double t) const;

  BasisWindow eval_all(double t) const;
  BasisWindow eval_all_derivs(double t) const;

  bool operator==(const KnotVector& other) const {
    return degree_ == other.degree_ && knots_ == other.knots_;
  }

 private:
  int degree_;
  bool relaxed_;
  std::vector<double> knots_;
  std::vector<double> breakpoints_;
  std::vector<int> knot_bp_index_;
};

/// Value of B-spline j (0-based, 0 <= j < N) at t.
double eval_bspline(const KnotVector& kv, int j, double t);
/// First derivative of B-spline j at t (right-continuous convention).
double eval_bspline_derivative(const KnotVector& kv, int j, double t);

/// Insert the midpoint of every nonempty span with the given multiplicity
/// (multiplicity > 1 requires the relaxed-multiplicity mode and is capped
/// at p+1). Existing knots are kept unchanged.
KnotVector dyadic_refine(const KnotVector& kv, int multiplicity = 1);

/// Row-compressed coefficients c with B_j^coarse = sum_k c[j][k] B_k^fine.
/// All coefficients are nonnegative; rows have at most p+2 entries after
/// one dyadic refinement with multiplicity 1.
struct TwoScaleMatrix {
  struct Row {
    int first = 0;
    std::vector<double> coef;
  };
  int coarse_n = 0;
  int fine_n = 0;
  std::vector<Row> rows;

  double entry(int j, int k) const {
    const Row& r = rows[j];
    int off = k - r.first;
    return (off >= 0 && off < static_cast<int>(r.coef.size())) ? r.coef[off] : 0.0;
  }
};

/// Refinement matrix from `coarse` to `fine`, where `fine` must equal
/// dyadic_refine(coarse, multiplicity) for some multiplicity.
TwoScaleMatrix two_scale_matrix(const KnotVector& coarse, const KnotVector& fine);

/// Bivariate tensor-product spline space (parametric dimension fixed at 2).
struct TensorSplineSpace {
  KnotVector kv1;
  KnotVector kv2;

  int num_basis() const { return kv1.num_basis() * kv2.num_basis(); }
};

/// Integral over one tensor element of the local dual function of basis
/// (j1,j2) against g.  The dual is defined through the inverse of the local
/// Gram matrix of all same-level tensor B-splines that are nonzero on the
/// element (span1, span2), so pairing it with any of those reproduces the
/// Kronecker delta.  g is evaluated at tensor Gauss points of order
/// `gauss_order` per direction.
double element_dual_pairing(const TensorSplineSpace& space, int span1, int span2,
                            int target_j1, int target_j2,
                            const std::function<double(double, double)>& g,
                            int gauss_order = 0);

/// Sup norm of the dual function itself on the element, used by scaling tests.
double element_dual_sup_norm(const TensorSplineSpace& space, int span1, int span2,
                             int target_j1, int target_j2);

}  // namespace igabem
