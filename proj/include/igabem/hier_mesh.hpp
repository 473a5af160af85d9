#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <unordered_set>
#include <vector>

#include "igabem/spline_kernel.hpp"
#include "igabem/topology.hpp"

namespace igabem {

/// Active element of a hierarchical mesh: a cell of the level-`level`
/// uniform tensor mesh of its patch, addressed by per-direction span
/// indices within that level.
struct Element {
  int patch = 0;
  int level = 0;
  int32_t i1 = 0;
  int32_t i2 = 0;

  friend bool operator==(const Element&, const Element&) = default;
  friend auto operator<=>(const Element&, const Element&) = default;
};

/// Neighbor relation used for admissibility. `Standard` is the shared
/// basis-support relation; `SupportOrTouch` additionally counts every
/// element with nonempty closed intersection, which is required for
/// piecewise constants (p = 0) and full knot multiplicities.
enum class NeighborMode { Standard, SupportOrTouch };

struct PatchLevelInfo {
  std::array<KnotVector, 2> kv;
  // per direction: support cell range [lo[j], hi[j]) of basis j at this level
  std::array<std::vector<int>, 2> supp_lo;
  std::array<std::vector<int>, 2> supp_hi;
};

class PatchHierMesh;

/// Hierarchical mesh over all patches of a multi-patch boundary.
/// Immutable value; refinement and overlay return new meshes.
class MultiPatchMesh {
 public:
  struct Impl;

  MultiPatchMesh() = default;

  int num_patches() const;
  int num_elements() const { return static_cast<int>(active_.size()); }
  const std::vector<Element>& elements() const { return active_; }
  const std::vector<Element>& elements_of_patch(int m) const;
  const PatchHierMesh& patch(int m) const;
  const InterfaceTopology& topology() const;
  NeighborMode neighbor_mode() const;
  int max_level() const;

  /// Position in elements() of an active element; throws for stale elements.
  int element_index(const Element& e) const;
  bool is_active(const Element& e) const;

  /// Parametric rectangle [x1,y1] x [x2,y2] of an element.
  std::array<double, 4> element_rect(const Element& e) const;
  double element_area(const Element& e) const;

  /// Active element whose half-open cell contains (t1,t2), right-continuous.
  Element element_at(int patch, double t1, double t2) const;

  /// Level-`level` tensor knot vectors and basis support tables of a patch.
  const PatchLevelInfo& level_info(int patch, int level) const;
  /// Deepest level for which level_info is available (max element level + 1).
  int level_info_depth(int patch) const;

  /// Hierarchical selection test: tensor B-spline (j1,j2) of `level` on
  /// `patch` has support inside Omega^level but not inside Omega^{level+1}.
  bool is_selected(int patch, int level, int j1, int j2) const;

  /// Active elements with positive-measure overlap with a cell rectangle
  /// [c1,c1e) x [c2,c2e) given in level-`level` cells.
  void active_in_cell_rect(int patch, int level, int c1, int c1e, int c2, int c2e,
                           std::vector<Element>& out) const;

  /// Elements whose closed rectangle meets the given patch edge, with their
  /// closed edge interval [a,b] in level-`Element::level` edge cells.
  struct EdgeEntry {
    Element elem;
    int64_t a = 0;
    int64_t b = 0;
  };
  const std::vector<EdgeEntry>& edge_strip(int patch, int edge) const;
  const std::vector<Element>& elements_at_corner(int patch, int corner) const;

  /// Newline-delimited records "patch level i1 i2" in element order.
  void dump(std::ostream& os) const;

  bool same_initial_mesh(const MultiPatchMesh& other) const;
  bool operator==(const MultiPatchMesh& other) const;

 private:
  friend MultiPatchMesh initial_mesh(const std::vector<TensorSplineSpace>&,
                                     const InterfaceTopology&, NeighborMode);
  friend MultiPatchMesh mesh_from_elements(const std::vector<TensorSplineSpace>&,
                                           const InterfaceTopology&, NeighborMode,
                                           const std::vector<Element>&);
  friend MultiPatchMesh refine(const MultiPatchMesh&, const std::vector<Element>&);
  friend MultiPatchMesh overlay(const MultiPatchMesh&, const MultiPatchMesh&);

  explicit MultiPatchMesh(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
  std::vector<Element> active_;
};

/// Per-patch view of the hierarchy: the nested domains Omega^k stored as
/// hash sets of level-k cells (k >= 1; Omega^0 is the whole parameter square).
class PatchHierMesh {
 public:
  const std::array<std::vector<double>, 2>& breakpoints() const { return breakpoints_; }
  int initial_spans(int dir) const { return static_cast<int>(breakpoints_[dir].size()) - 1; }
  int cells(int dir, int level) const { return initial_spans(dir) << level; }
  int depth() const { return static_cast<int>(omega_.size()); }

  bool cell_in_omega(int level, int32_t c1, int32_t c2) const;
  /// Whether the level-`level` cell lies inside Omega^{level+1}.
  bool cell_subdivided(int level, int32_t c1, int32_t c2) const;
  /// Whether every Omega^k of `other` is contained in this patch's Omega^k.
  bool omega_superset_of(const PatchHierMesh& other) const;
  /// Sorted level-`level` cells of Omega^level (level >= 1).
  std::vector<std::pair<int32_t, int32_t>> omega_cells(int level) const;

  /// Parameter coordinate of grid point g (0..cells) at a level.
  double grid_coord(int dir, int level, int64_t g) const;
  /// Level-`level` cell index containing t, right-continuous.
  int32_t cell_of(int dir, int level, double t) const;

 private:
  friend struct MultiPatchMesh::Impl;
  friend MultiPatchMesh initial_mesh(const std::vector<TensorSplineSpace>&,
                                     const InterfaceTopology&, NeighborMode);
  friend MultiPatchMesh mesh_from_elements(const std::vector<TensorSplineSpace>&,
                                           const InterfaceTopology&, NeighborMode,
                                           const std::vector<Element>&);
  friend MultiPatchMesh refine(const MultiPatchMesh&, const std::vector<Element>&);
  friend MultiPatchMesh overlay(const MultiPatchMesh&, const MultiPatchMesh&);
  std::array<std::vector<double>, 2> breakpoints_;
  std::vector<std::unordered_set<uint64_t>> omega_;  // omega_[k-1] holds level-k cells
};

/// Level-0 mesh induced by the initial knot spans of the per-patch ansatz
/// spaces. Throws if knot lines disagree across a glued edge.
MultiPatchMesh initial_mesh(const std::vector<TensorSplineSpace>& spaces,
                            const InterfaceTopology& topology,
                            NeighborMode mode = NeighborMode::Standard);

/// Mesh from an explicit active-element snapshot (as written by dump()).
/// The elements must form a valid hierarchical partition; admissibility is
/// not required.
MultiPatchMesh mesh_from_elements(const std::vector<TensorSplineSpace>& spaces,
                                  const InterfaceTopology& topology, NeighborMode mode,
                                  const std::vector<Element>& elements);

/// Neighbors of an active element: same-patch elements sharing the support
/// of a hierarchical B-spline (plus touching elements in SupportOrTouch
/// mode), and all touching elements on other patches.
std::vector<Element> neighbors(const MultiPatchMesh& mesh, const Element& elem);

/// Same-patch neighbors exactly one level coarser, plus cross-patch
/// elements whose intersection with `elem` has positive length.
std::vector<Element> bad_neighbors(const MultiPatchMesh& mesh, const Element& elem);

/// Closure refinement: marked elements are completed by iterating over bad
/// neighbors until stable, then every collected element is bisected into
/// its four children.
MultiPatchMesh refine(const MultiPatchMesh& mesh, const std::vector<Element>& marked);

MultiPatchMesh uniform_refine(const MultiPatchMesh& mesh);

bool is_admissible(const MultiPatchMesh& mesh);

/// Coarsest common refinement of two meshes with the same initial mesh.
MultiPatchMesh overlay(const MultiPatchMesh& a, const MultiPatchMesh& b);

/// Whether `fine` is obtainable from `coarse` by iterative dyadic bisection.
bool is_finer_or_equal(const MultiPatchMesh& fine, const MultiPatchMesh& coarse);

}  // namespace igabem
