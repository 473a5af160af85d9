#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "igabem/hier_mesh.hpp"
#include "igabem/linalg.hpp"

namespace igabem {

/// Hierarchical B-spline: tensor B-spline (j1,j2) of the level-`level`
/// space on a patch, selected when its support lies in Omega^level but not
/// in Omega^{level+1}.
struct HierFn {
  int patch = 0;
  int level = 0;
  int j1 = 0;
  int j2 = 0;

  friend bool operator==(const HierFn&, const HierFn&) = default;
  friend auto operator<=>(const HierFn&, const HierFn&) = default;
};

/// Truncated representation of a hierarchical B-spline: per-level tensor
/// coefficients of the successive pushdown with active-function
/// contributions removed. `removed` records those contributions as
/// coefficients over finer basis functions (indices into the owning space),
/// so that Trunc(b) = b - sum removed_i * basis_i.
struct THBRep {
  HierFn fn;
  std::array<int, 4> supp = {0, 0, 0, 0};  // cell rect [lo1,hi1) x [lo2,hi2) at fn.level
  std::vector<std::map<uint64_t, double>> level_coeffs;  // index: level - fn.level
  std::vector<std::pair<int, double>> removed;
};

/// Function evaluable on the parameter domains, one per patch.
using PatchwiseFn = std::function<double(int patch, double t1, double t2)>;

/// Ordered hierarchical B-spline basis of an admissible mesh, with support
/// queries, truncated representations, and coefficient transfer utilities.
/// Immutable after construction; all queries are thread-safe.
class SplineSpace {
 public:
  explicit SplineSpace(MultiPatchMesh mesh, bool strict = false);

  const MultiPatchMesh& mesh() const { return mesh_; }
  int dim() const { return static_cast<int>(fns_.size()); }
  const std::vector<HierFn>& functions() const { return fns_; }
  const HierFn& fn(int i) const { return fns_[i]; }
  int function_index(const HierFn& f) const;

  /// Support rectangle [lo1,hi1) x [lo2,hi2) in level-`fn.level` cells.
  const std::array<int, 4>& support_cells(int i) const { return supp_[i]; }
  /// Indices into mesh().elements() of active elements where the function
  /// does not vanish.
  const std::vector<int>& elements_of_fn(int i) const { return elems_of_fn_[i]; }
  /// Function indices with support on the given active element.
  const std::vector<int>& functions_on_element(int element_index) const {
    return fns_on_elem_[element_index];
  }

  /// Plain hierarchical B-spline value.
  double eval_fn(int i, const Vec2& t) const;
  /// Values of the listed functions (all on one patch) at a point.
  void eval_local(const std::vector<int>& fn_ids, int patch, const Vec2& t, double* out) const;

  const THBRep& thb(int i) const { return thb_[i]; }
  double eval_thb(const THBRep& rep, const Vec2& t) const;
  /// Evaluate sum_i c_i * Trunc(basis_i).
  double eval_thb_combination(const Eigen::VectorXd& coeffs, int patch, const Vec2& t) const;
  /// Evaluate sum_i c_i * basis_i (the Galerkin basis).
  double eval_hb_combination(const Eigen::VectorXd& coeffs, int patch, const Vec2& t) const;

  /// Coefficients over the plain basis of the same function given by
  /// truncated-basis coefficients.
  Eigen::VectorXd thb_to_hb(const Eigen::VectorXd& coeffs) const;
  /// Plain-basis coefficients of the constant function 1.
  Eigen::VectorXd constant_one_hb_coeffs() const;

  const TwoScaleMatrix& two_scale(int patch, int dir, int level) const;

 private:
  void build_thb(int i);

  MultiPatchMesh mesh_;
  std::vector<HierFn> fns_;
  std::unordered_map<uint64_t, int> fn_pos_;
  std::vector<std::array<int, 4>> supp_;
  std::vector<std::vector<int>> elems_of_fn_;
  std::vector<std::vector<int>> fns_on_elem_;
  std::vector<THBRep> thb_;
  // two-scale matrices per (patch, dir, level)
  std::vector<std::array<std::vector<TwoScaleMatrix>, 2>> two_scale_;
};

/// Basis of the hierarchical spline space on a mesh (strict mode rejects
/// non-admissible meshes).
SplineSpace build_basis(const MultiPatchMesh& mesh, bool strict = false);

/// Plain-basis coefficients on `fine` of the function given by plain-basis
/// coefficients on `coarse`; requires fine to be a refinement of coarse.
Eigen::VectorXd coarse_to_fine(const SplineSpace& coarse, const SplineSpace& fine,
                               const Eigen::VectorXd& coeffs);

/// Dual-basis quasi-interpolation onto the span of truncated basis
/// functions whose support is covered by S (patchwise); returns
/// truncated-basis coefficients. The dual element of each function is the
/// lexicographically smallest active element of the function's level inside
/// its support.
Eigen::VectorXd quasi_interpolate(const SplineSpace& space, const std::vector<Element>& S,
                                  const PatchwiseFn& g, int gauss_order = 0);

}  // namespace igabem
