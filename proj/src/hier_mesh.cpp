#include "igabem/hier_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace igabem {

namespace {

inline uint64_t pack_cell(int32_t c1, int32_t c2) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(c1)) << 32) | static_cast<uint32_t>(c2);
}

inline uint64_t pack_element(const Element& e) {
  return (static_cast<uint64_t>(e.patch) << 56) | (static_cast<uint64_t>(e.level) << 48) |
         (static_cast<uint64_t>(static_cast<uint32_t>(e.i1) & 0xffffff) << 24) |
         (static_cast<uint32_t>(e.i2) & 0xffffff);
}

}  // namespace

bool InterfaceTopology::operator==(const InterfaceTopology& other) const {
  if (num_patches != other.num_patches) return false;
  if (interfaces.size() != other.interfaces.size()) return false;
  for (size_t i = 0; i < interfaces.size(); ++i) {
    const Interface& a = interfaces[i];
    const Interface& b = other.interfaces[i];
    if (a.patch_a != b.patch_a || a.edge_a != b.edge_a || a.patch_b != b.patch_b ||
        a.edge_b != b.edge_b || a.reversed != b.reversed)
      return false;
  }
  return corner_classes == other.corner_classes;
}

bool PatchHierMesh::cell_in_omega(int level, int32_t c1, int32_t c2) const {
  if (c1 < 0 || c2 < 0 || c1 >= cells(0, level) || c2 >= cells(1, level)) return false;
  if (level == 0) return true;
  if (level > static_cast<int>(omega_.size())) return false;
  return omega_[level - 1].contains(pack_cell(c1, c2));
}

bool PatchHierMesh::cell_subdivided(int level, int32_t c1, int32_t c2) const {
  if (level + 1 > static_cast<int>(omega_.size())) return false;
  return omega_[level].contains(pack_cell(2 * c1, 2 * c2));
}

std::vector<std::pair<int32_t, int32_t>> PatchHierMesh::omega_cells(int level) const {
  std::vector<std::pair<int32_t, int32_t>> out;
  if (level < 1 || level > static_cast<int>(omega_.size())) return out;
  out.reserve(omega_[level - 1].size());
  for (uint64_t packed : omega_[level - 1])
    out.emplace_back(static_cast<int32_t>(packed >> 32),
                     static_cast<int32_t>(packed & 0xffffffffu));
  std::sort(out.begin(), out.end());
  return out;
}

bool PatchHierMesh::omega_superset_of(const PatchHierMesh& other) const {
  if (other.omega_.size() > omega_.size()) {
    for (size_t k = omega_.size(); k < other.omega_.size(); ++k)
      if (!other.omega_[k].empty()) return false;
  }
  for (size_t k = 0; k < std::min(omega_.size(), other.omega_.size()); ++k)
    for (uint64_t c : other.omega_[k])
      if (!omega_[k].contains(c)) return false;
  return true;
}

double PatchHierMesh::grid_coord(int dir, int level, int64_t g) const {
  const auto& bp = breakpoints_[dir];
  int64_t s = g >> level;
  if (s >= static_cast<int64_t>(bp.size()) - 1) return bp.back();
  int64_t r = g - (s << level);
  return bp[s] + (bp[s + 1] - bp[s]) * std::ldexp(static_cast<double>(r), -level);
}

int32_t PatchHierMesh::cell_of(int dir, int level, double t) const {
  const auto& bp = breakpoints_[dir];
  int s = static_cast<int>(std::upper_bound(bp.begin(), bp.end(), t) - bp.begin()) - 1;
  s = std::clamp(s, 0, static_cast<int>(bp.size()) - 2);
  double frac = (t - bp[s]) / (bp[s + 1] - bp[s]);
  auto sub = static_cast<int64_t>(std::floor(std::ldexp(frac, level)));
  sub = std::clamp<int64_t>(sub, 0, (int64_t(1) << level) - 1);
  return static_cast<int32_t>((static_cast<int64_t>(s) << level) + sub);
}

struct MultiPatchMesh::Impl {
  std::vector<TensorSplineSpace> spaces;
  InterfaceTopology topology;
  NeighborMode mode = NeighborMode::Standard;
  std::vector<PatchHierMesh> patches;
  int max_level = 0;

  std::vector<std::vector<Element>> active_per_patch;
  std::vector<std::vector<PatchLevelInfo>> level_infos;
  std::vector<std::array<std::vector<MultiPatchMesh::EdgeEntry>, 4>> edge_strips;
  std::vector<std::array<std::vector<Element>, 4>> corner_elems;
  std::unordered_map<uint64_t, int> element_pos;

  void build_derived();
  void collect_active(int m, int level, int32_t c1, int32_t c2, std::vector<Element>& out) const;
};

void MultiPatchMesh::Impl::collect_active(int m, int level, int32_t c1, int32_t c2,
                                          std::vector<Element>& out) const {
  const PatchHierMesh& pm = patches[m];
  if (pm.cell_subdivided(level, c1, c2)) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) collect_active(m, level + 1, 2 * c1 + a, 2 * c2 + b, out);
  } else {
    out.push_back(Element{m, level, c1, c2});
  }
}

void MultiPatchMesh::Impl::build_derived() {
  const int M = static_cast<int>(spaces.size());
  active_per_patch.assign(M, {});
  level_infos.assign(M, {});
  edge_strips.assign(M, {});
  corner_elems.assign(M, {});
  element_pos.clear();
  max_level = 0;

  for (int m = 0; m < M; ++m) {
    // nesting: every level-k cell of Omega^k must lie inside Omega^{k-1}
    const PatchHierMesh& pm = patches[m];
    for (int k = 2; k <= pm.depth(); ++k) {
      for (uint64_t packed : pm.omega_[k - 1]) {
        auto c1 = static_cast<int32_t>(packed >> 32);
        auto c2 = static_cast<int32_t>(packed & 0xffffffffu);
        if (!pm.cell_in_omega(k - 1, c1 / 2, c2 / 2))
          throw std::logic_error("hier mesh: Omega sets are not nested");
      }
    }

    std::vector<Element>& act = active_per_patch[m];
    for (int32_t c1 = 0; c1 < pm.cells(0, 0); ++c1)
      for (int32_t c2 = 0; c2 < pm.cells(1, 0); ++c2) collect_active(m, 0, c1, c2, act);
    std::sort(act.begin(), act.end());
    for (const Element& e : act) max_level = std::max(max_level, e.level);
  }

  for (int m = 0; m < M; ++m) {
    int depth = 0;
    for (const Element& e : active_per_patch[m]) depth = std::max(depth, e.level);
    KnotVector k1 = spaces[m].kv1;
    KnotVector k2 = spaces[m].kv2;
    for (int lvl = 0; lvl <= depth; ++lvl) {
      PatchLevelInfo info{{k1, k2}, {}, {}};
      for (int d = 0; d < 2; ++d) {
        const KnotVector& kv = info.kv[d];
        info.supp_lo[d].resize(kv.num_basis());
        info.supp_hi[d].resize(kv.num_basis());
        for (int j = 0; j < kv.num_basis(); ++j) {
          auto [lo, hi] = kv.support_span_range(j);
          info.supp_lo[d][j] = lo;
          info.supp_hi[d][j] = hi;
        }
      }
      level_infos[m].push_back(std::move(info));
      if (lvl < depth) {
        k1 = dyadic_refine(k1);
        k2 = dyadic_refine(k2);
      }
    }
  }

  int pos = 0;
  for (int m = 0; m < M; ++m)
    for (const Element& e : active_per_patch[m]) element_pos[pack_element(e)] = pos++;

  for (int m = 0; m < M; ++m) {
    const PatchHierMesh& pm = patches[m];
    for (const Element& e : active_per_patch[m]) {
      // edge strips: 0: i2==0, 1: i1==max, 2: i2==max, 3: i1==0
      auto add_strip = [&](int edge, int64_t along) {
        edge_strips[m][edge].push_back(EdgeEntry{e, along, along + 1});
      };
      if (e.i2 == 0) add_strip(0, e.i1);
      if (e.i1 == pm.cells(0, e.level) - 1) add_strip(1, e.i2);
      if (e.i2 == pm.cells(1, e.level) - 1) add_strip(2, e.i1);
      if (e.i1 == 0) add_strip(3, e.i2);
      bool at1lo = e.i1 == 0, at1hi = e.i1 == pm.cells(0, e.level) - 1;
      bool at2lo = e.i2 == 0, at2hi = e.i2 == pm.cells(1, e.level) - 1;
      if (at1lo && at2lo) corner_elems[m][0].push_back(e);
      if (at1hi && at2lo) corner_elems[m][1].push_back(e);
      if (at1hi && at2hi) corner_elems[m][2].push_back(e);
      if (at1lo && at2hi) corner_elems[m][3].push_back(e);
    }
  }
}

MultiPatchMesh::MultiPatchMesh(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {
  for (const auto& per_patch : impl_->active_per_patch)
    active_.insert(active_.end(), per_patch.begin(), per_patch.end());
}

int MultiPatchMesh::num_patches() const { return static_cast<int>(impl_->spaces.size()); }

const std::vector<Element>& MultiPatchMesh::elements_of_patch(int m) const {
  return impl_->active_per_patch.at(m);
}

const PatchHierMesh& MultiPatchMesh::patch(int m) const { return impl_->patches.at(m); }

const InterfaceTopology& MultiPatchMesh::topology() const { return impl_->topology; }

NeighborMode MultiPatchMesh::neighbor_mode() const { return impl_->mode; }

int MultiPatchMesh::max_level() const { return impl_->max_level; }

int MultiPatchMesh::element_index(const Element& e) const {
  auto it = impl_->element_pos.find(pack_element(e));
  if (it == impl_->element_pos.end())
    throw std::invalid_argument("element_index: element is not active in this mesh");
  return it->second;
}

bool MultiPatchMesh::is_active(const Element& e) const {
  return impl_->element_pos.contains(pack_element(e));
}

std::array<double, 4> MultiPatchMesh::element_rect(const Element& e) const {
  const PatchHierMesh& pm = impl_->patches[e.patch];
  return {pm.grid_coord(0, e.level, e.i1), pm.grid_coord(0, e.level, e.i1 + 1),
          pm.grid_coord(1, e.level, e.i2), pm.grid_coord(1, e.level, e.i2 + 1)};
}

double MultiPatchMesh::element_area(const Element& e) const {
  auto r = element_rect(e);
  return (r[1] - r[0]) * (r[3] - r[2]);
}

Element MultiPatchMesh::element_at(int patch, double t1, double t2) const {
  const PatchHierMesh& pm = impl_->patches[patch];
  int level = 0;
  int32_t c1 = pm.cell_of(0, 0, t1);
  int32_t c2 = pm.cell_of(1, 0, t2);
  while (pm.cell_subdivided(level, c1, c2)) {
    ++level;
    c1 *= 2;
    c2 *= 2;
    if (t1 >= pm.grid_coord(0, level, c1 + 1)) ++c1;
    if (t2 >= pm.grid_coord(1, level, c2 + 1)) ++c2;
  }
  return Element{patch, level, c1, c2};
}

const PatchLevelInfo& MultiPatchMesh::level_info(int patch, int level) const {
  return impl_->level_infos.at(patch).at(level);
}

int MultiPatchMesh::level_info_depth(int patch) const {
  return static_cast<int>(impl_->level_infos.at(patch).size()) - 1;
}

bool MultiPatchMesh::is_selected(int patch, int level, int j1, int j2) const {
  const PatchLevelInfo& info = level_info(patch, level);
  const PatchHierMesh& pm = impl_->patches[patch];
  int lo1 = info.supp_lo[0][j1], hi1 = info.supp_hi[0][j1];
  int lo2 = info.supp_lo[1][j2], hi2 = info.supp_hi[1][j2];
  bool some_unsubdivided = false;
  for (int c1 = lo1; c1 < hi1; ++c1) {
    for (int c2 = lo2; c2 < hi2; ++c2) {
      if (!pm.cell_in_omega(level, c1, c2)) return false;
      if (!pm.cell_subdivided(level, c1, c2)) some_unsubdivided = true;
    }
  }
  return some_unsubdivided;
}

void MultiPatchMesh::active_in_cell_rect(int patch, int level, int c1, int c1e, int c2, int c2e,
                                         std::vector<Element>& out) const {
  const PatchHierMesh& pm = impl_->patches[patch];
  std::set<Element> found;
  for (int32_t a = c1; a < c1e; ++a) {
    for (int32_t b = c2; b < c2e; ++b) {
      if (a < 0 || b < 0 || a >= pm.cells(0, level) || b >= pm.cells(1, level)) continue;
      if (!pm.cell_in_omega(level, a, b)) {
        // the active element covering this cell is an ancestor
        int k = level;
        int32_t x = a, y = b;
        while (k > 0 && !pm.cell_in_omega(k, x, y)) {
          x >>= 1;
          y >>= 1;
          --k;
        }
        found.insert(Element{patch, k, x, y});
      } else if (pm.cell_subdivided(level, a, b)) {
        std::vector<Element> deeper;
        impl_->collect_active(patch, level, a, b, deeper);
        found.insert(deeper.begin(), deeper.end());
      } else {
        found.insert(Element{patch, level, a, b});
      }
    }
  }
  out.insert(out.end(), found.begin(), found.end());
}

const std::vector<MultiPatchMesh::EdgeEntry>& MultiPatchMesh::edge_strip(int patch,
                                                                         int edge) const {
  return impl_->edge_strips.at(patch)[edge];
}

const std::vector<Element>& MultiPatchMesh::elements_at_corner(int patch, int corner) const {
  return impl_->corner_elems.at(patch)[corner];
}

void MultiPatchMesh::dump(std::ostream& os) const {
  for (const Element& e : active_)
    os << e.patch << ' ' << e.level << ' ' << e.i1 << ' ' << e.i2 << '\n';
}

bool MultiPatchMesh::same_initial_mesh(const MultiPatchMesh& other) const {
  if (impl_->spaces.size() != other.impl_->spaces.size()) return false;
  for (size_t m = 0; m < impl_->spaces.size(); ++m) {
    if (!(impl_->spaces[m].kv1 == other.impl_->spaces[m].kv1) ||
        !(impl_->spaces[m].kv2 == other.impl_->spaces[m].kv2))
      return false;
  }
  return impl_->topology == other.impl_->topology && impl_->mode == other.impl_->mode;
}

bool MultiPatchMesh::operator==(const MultiPatchMesh& other) const {
  return same_initial_mesh(other) && active_ == other.active_;
}

MultiPatchMesh initial_mesh(const std::vector<TensorSplineSpace>& spaces,
                            const InterfaceTopology& topology, NeighborMode mode) {
  if (static_cast<int>(spaces.size()) != topology.num_patches)
    throw std::invalid_argument("initial_mesh: space count does not match topology");
  // knot lines must agree across every glued edge
  for (const Interface& itf : topology.interfaces) {
    int da = InterfaceTopology::edge_direction(itf.edge_a);
    int db = InterfaceTopology::edge_direction(itf.edge_b);
    const KnotVector& ka = (da == 0) ? spaces[itf.patch_a].kv1 : spaces[itf.patch_a].kv2;
    const KnotVector& kb = (db == 0) ? spaces[itf.patch_b].kv1 : spaces[itf.patch_b].kv2;
    const auto& bpa = ka.breakpoints();
    const auto& bpb = kb.breakpoints();
    if (bpa.size() != bpb.size())
      throw std::invalid_argument("initial_mesh: interface knot lines disagree");
    for (size_t i = 0; i < bpa.size(); ++i) {
      double mapped = itf.reversed ? 1.0 - bpb[bpb.size() - 1 - i] : bpb[i];
      if (std::abs(bpa[i] - mapped) > 1e-12)
        throw std::invalid_argument("initial_mesh: interface knot lines disagree");
    }
  }
  auto impl = std::make_shared<MultiPatchMesh::Impl>();
  impl->spaces = spaces;
  impl->topology = topology;
  impl->mode = mode;
  impl->patches.resize(spaces.size());
  for (size_t m = 0; m < spaces.size(); ++m) {
    impl->patches[m].breakpoints_ = {spaces[m].kv1.breakpoints(), spaces[m].kv2.breakpoints()};
  }
  impl->build_derived();
  return MultiPatchMesh(std::move(impl));
}

MultiPatchMesh mesh_from_elements(const std::vector<TensorSplineSpace>& spaces,
                                  const InterfaceTopology& topology, NeighborMode mode,
                                  const std::vector<Element>& elements) {
  MultiPatchMesh base = initial_mesh(spaces, topology, mode);
  auto impl = std::make_shared<MultiPatchMesh::Impl>();
  impl->spaces = base.impl_->spaces;
  impl->topology = base.impl_->topology;
  impl->mode = base.impl_->mode;
  impl->patches = base.impl_->patches;
  for (const Element& e : elements) {
    if (e.patch < 0 || e.patch >= static_cast<int>(spaces.size()))
      throw std::invalid_argument("mesh_from_elements: bad patch index");
    PatchHierMesh& pm = impl->patches[e.patch];
    if (static_cast<int>(pm.omega_.size()) < e.level) pm.omega_.resize(e.level);
    // every ancestor of an active element has been bisected
    for (int k = 1; k <= e.level; ++k) {
      int32_t p1 = e.i1 >> (e.level - k);
      int32_t p2 = e.i2 >> (e.level - k);
      pm.omega_[k - 1].insert(pack_cell(p1, p2));
      pm.omega_[k - 1].insert(pack_cell(p1 ^ 1, p2));
      pm.omega_[k - 1].insert(pack_cell(p1, p2 ^ 1));
      pm.omega_[k - 1].insert(pack_cell(p1 ^ 1, p2 ^ 1));
    }
  }
  impl->build_derived();
  MultiPatchMesh out(std::move(impl));
  std::vector<Element> sorted_in = elements;
  std::sort(sorted_in.begin(), sorted_in.end());
  if (out.elements() != sorted_in)
    throw std::invalid_argument("mesh_from_elements: elements do not form a hierarchical mesh");
  return out;
}

namespace {

// Closed-interval comparison of [a1,b1] at level k1 against [a2,b2] at
// level k2, in grid-point units of a single direction.
struct ScaledInterval {
  int64_t a, b;
};

ScaledInterval scale_to(int64_t a, int64_t b, int k, int K) {
  return {a << (K - k), b << (K - k)};
}

bool positive_overlap_1d(int64_t a1, int64_t b1, int k1, int64_t a2, int64_t b2, int k2) {
  int K = std::max(k1, k2);
  auto s1 = scale_to(a1, b1, k1, K);
  auto s2 = scale_to(a2, b2, k2, K);
  return std::max(s1.a, s2.a) < std::min(s1.b, s2.b);
}

bool touching_1d(int64_t a1, int64_t b1, int k1, int64_t a2, int64_t b2, int k2) {
  int K = std::max(k1, k2);
  auto s1 = scale_to(a1, b1, k1, K);
  auto s2 = scale_to(a2, b2, k2, K);
  return std::max(s1.a, s2.a) <= std::min(s1.b, s2.b);
}

bool rect_touches(const Element& a, const Element& b) {
  if (a.patch != b.patch) return false;
  return touching_1d(a.i1, a.i1 + 1, a.level, b.i1, b.i1 + 1, b.level) &&
         touching_1d(a.i2, a.i2 + 1, a.level, b.i2, b.i2 + 1, b.level);
}

bool rect_inside(int64_t a1, int64_t b1, int k1, int64_t a2, int64_t b2, int k2) {
  int K = std::max(k1, k2);
  auto s1 = scale_to(a1, b1, k1, K);
  auto s2 = scale_to(a2, b2, k2, K);
  return s2.a <= s1.a && s1.b <= s2.b;
}

// Basis indices at `level` in direction `dir` whose support overlaps the
// element interval [ea, eb] (at element level `ek`) with positive measure.
std::pair<int, int> basis_range_overlapping(const PatchLevelInfo& info, int dir, int level,
                                            int64_t ea, int64_t eb, int ek) {
  const auto& lo = info.supp_lo[dir];
  const auto& hi = info.supp_hi[dir];
  const int K = std::max(level, ek);
  const int64_t A = ea << (K - ek);
  const int64_t B = eb << (K - ek);
  const int s = K - level;
  auto first = std::partition_point(hi.begin(), hi.end(),
                                    [&](int h) { return (static_cast<int64_t>(h) << s) <= A; });
  auto last = std::partition_point(lo.begin(), lo.end(),
                                   [&](int l) { return (static_cast<int64_t>(l) << s) < B; });
  return {static_cast<int>(first - hi.begin()), static_cast<int>(last - lo.begin())};
}

// In-patch neighbor search through hierarchical B-spline supports.
void in_patch_neighbors(const MultiPatchMesh& mesh, const Element& elem, std::set<Element>& out) {
  const int m = elem.patch;
  const int depth = mesh.level_info_depth(m);
  const bool touch_mode = mesh.neighbor_mode() == NeighborMode::SupportOrTouch;
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const PatchLevelInfo& info = mesh.level_info(m, lvl);
    auto [j1lo, j1hi] =
        basis_range_overlapping(info, 0, lvl, elem.i1, elem.i1 + 1, elem.level);
    auto [j2lo, j2hi] =
        basis_range_overlapping(info, 1, lvl, elem.i2, elem.i2 + 1, elem.level);
    for (int j1 = j1lo; j1 < j1hi; ++j1) {
      for (int j2 = j2lo; j2 < j2hi; ++j2) {
        const int slo1 = info.supp_lo[0][j1], shi1 = info.supp_hi[0][j1];
        const int slo2 = info.supp_lo[1][j2], shi2 = info.supp_hi[1][j2];
        if (touch_mode) {
          // containment variant: both elements inside the support
          if (!rect_inside(elem.i1, elem.i1 + 1, elem.level, slo1, shi1, lvl) ||
              !rect_inside(elem.i2, elem.i2 + 1, elem.level, slo2, shi2, lvl))
            continue;
        }
        if (!mesh.is_selected(m, lvl, j1, j2)) continue;
        std::vector<Element> covered;
        mesh.active_in_cell_rect(m, lvl, slo1, shi1, slo2, shi2, covered);
        for (const Element& e : covered) {
          if (touch_mode) {
            if (rect_inside(e.i1, e.i1 + 1, e.level, slo1, shi1, lvl) &&
                rect_inside(e.i2, e.i2 + 1, e.level, slo2, shi2, lvl))
              out.insert(e);
          } else {
            out.insert(e);
          }
        }
      }
    }
  }
  if (touch_mode) {
    // all elements with nonempty closed intersection
    std::vector<Element> near;
    mesh.active_in_cell_rect(m, elem.level, elem.i1 - 1, elem.i1 + 2, elem.i2 - 1, elem.i2 + 2,
                             near);
    for (const Element& e : near)
      if (rect_touches(elem, e)) out.insert(e);
  }
}

struct CrossEntry {
  Element elem;
  bool positive_dim;  // edge overlap rather than a single shared point
};

// Elements on other patches whose closed intersection with `elem` is
// nonempty, found through interface intervals and shared corners.
void cross_patch_touching(const MultiPatchMesh& mesh, const Element& elem,
                          std::vector<CrossEntry>& out) {
  const InterfaceTopology& topo = mesh.topology();
  const PatchHierMesh& pm = mesh.patch(elem.patch);
  std::set<std::pair<Element, bool>> found;
  auto edge_interval = [&](int edge) -> std::pair<int64_t, int64_t> {
    int dir = InterfaceTopology::edge_direction(edge);
    int64_t along = (dir == 0) ? elem.i1 : elem.i2;
    return {along, along + 1};
  };
  auto on_edge = [&](int edge) {
    switch (edge) {
      case 0: return elem.i2 == 0;
      case 1: return elem.i1 == pm.cells(0, elem.level) - 1;
      case 2: return elem.i2 == pm.cells(1, elem.level) - 1;
      default: return elem.i1 == 0;
    }
  };
  for (const Interface& itf : topo.interfaces) {
    for (int side = 0; side < 2; ++side) {
      int my_patch = side == 0 ? itf.patch_a : itf.patch_b;
      int my_edge = side == 0 ? itf.edge_a : itf.edge_b;
      int other_patch = side == 0 ? itf.patch_b : itf.patch_a;
      int other_edge = side == 0 ? itf.edge_b : itf.edge_a;
      if (my_patch != elem.patch || other_patch == elem.patch || !on_edge(my_edge)) continue;
      auto [a, b] = edge_interval(my_edge);
      int64_t total = static_cast<int64_t>(
                          mesh.patch(my_patch).initial_spans(
                              InterfaceTopology::edge_direction(my_edge)))
                      << elem.level;
      int64_t ma = itf.reversed ? total - b : a;
      int64_t mb = itf.reversed ? total - a : b;
      for (const auto& entry : mesh.edge_strip(other_patch, other_edge)) {
        if (!touching_1d(ma, mb, elem.level, entry.a, entry.b, entry.elem.level)) continue;
        bool pos = positive_overlap_1d(ma, mb, elem.level, entry.a, entry.b, entry.elem.level);
        found.insert({entry.elem, pos});
      }
    }
  }
  // shared patch corners (always zero-dimensional contact)
  auto corner_of = [&](int corner) {
    bool at1 = (corner == 0 || corner == 3) ? elem.i1 == 0
                                            : elem.i1 == pm.cells(0, elem.level) - 1;
    bool at2 = (corner == 0 || corner == 1) ? elem.i2 == 0
                                            : elem.i2 == pm.cells(1, elem.level) - 1;
    return at1 && at2;
  };
  for (const auto& cls : topo.corner_classes) {
    bool mine = false;
    for (auto [p, c] : cls)
      if (p == elem.patch && corner_of(c)) mine = true;
    if (!mine) continue;
    for (auto [p, c] : cls) {
      if (p == elem.patch) continue;
      for (const Element& e : mesh.elements_at_corner(p, c)) found.insert({e, false});
    }
  }
  // an element may appear with both flags; keep positive_dim if any
  for (auto it = found.begin(); it != found.end();) {
    auto next = std::next(it);
    if (next != found.end() && next->first == it->first) {
      it = found.erase(it);
    } else {
      out.push_back(CrossEntry{it->first, it->second});
      ++it;
    }
  }
}

}  // namespace

std::vector<Element> neighbors(const MultiPatchMesh& mesh, const Element& elem) {
  if (!mesh.is_active(elem)) throw std::invalid_argument("neighbors: stale element");
  std::set<Element> out;
  in_patch_neighbors(mesh, elem, out);
  std::vector<CrossEntry> cross;
  cross_patch_touching(mesh, elem, cross);
  for (const CrossEntry& c : cross) out.insert(c.elem);
  return {out.begin(), out.end()};
}

std::vector<Element> bad_neighbors(const MultiPatchMesh& mesh, const Element& elem) {
  if (!mesh.is_active(elem)) throw std::invalid_argument("bad_neighbors: stale element");
  std::set<Element> result;
  std::set<Element> in_patch;
  in_patch_neighbors(mesh, elem, in_patch);
  for (const Element& e : in_patch)
    if (e.level == elem.level - 1) result.insert(e);
  std::vector<CrossEntry> cross;
  cross_patch_touching(mesh, elem, cross);
  for (const CrossEntry& c : cross)
    if (c.positive_dim) result.insert(c.elem);
  return {result.begin(), result.end()};
}

MultiPatchMesh refine(const MultiPatchMesh& mesh, const std::vector<Element>& marked) {
  for (const Element& e : marked)
    if (!mesh.is_active(e)) throw std::invalid_argument("refine: marked element not active");
  std::set<Element> closure(marked.begin(), marked.end());
  std::vector<Element> frontier(closure.begin(), closure.end());
  while (!frontier.empty()) {
    std::vector<Element> next;
    for (const Element& e : frontier) {
      for (const Element& bad : bad_neighbors(mesh, e)) {
        if (closure.insert(bad).second) next.push_back(bad);
      }
    }
    frontier = std::move(next);
  }
  auto impl = std::make_shared<MultiPatchMesh::Impl>();
  impl->spaces = mesh.impl_->spaces;
  impl->topology = mesh.impl_->topology;
  impl->mode = mesh.impl_->mode;
  impl->patches = mesh.impl_->patches;
  for (const Element& e : closure) {
    PatchHierMesh& pm = impl->patches[e.patch];
    if (static_cast<int>(pm.omega_.size()) < e.level + 1) pm.omega_.resize(e.level + 1);
    auto& target = pm.omega_[e.level];  // holds level-(e.level+1) cells
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) target.insert(pack_cell(2 * e.i1 + a, 2 * e.i2 + b));
  }
  impl->build_derived();
  return MultiPatchMesh(std::move(impl));
}

MultiPatchMesh uniform_refine(const MultiPatchMesh& mesh) {
  return refine(mesh, mesh.elements());
}

bool is_admissible(const MultiPatchMesh& mesh) {
  for (const Element& elem : mesh.elements()) {
    std::set<Element> nbrs;
    in_patch_neighbors(mesh, elem, nbrs);
    for (const Element& e : nbrs)
      if (std::abs(e.level - elem.level) > 1) return false;
    std::vector<CrossEntry> cross;
    cross_patch_touching(mesh, elem, cross);
    for (const CrossEntry& c : cross) {
      if (c.positive_dim && c.elem.level != elem.level) return false;  // hanging node
      if (std::abs(c.elem.level - elem.level) > 1) return false;
    }
  }
  return true;
}

bool is_finer_or_equal(const MultiPatchMesh& fine, const MultiPatchMesh& coarse) {
  if (!fine.same_initial_mesh(coarse)) return false;
  for (int m = 0; m < fine.num_patches(); ++m)
    if (!fine.patch(m).omega_superset_of(coarse.patch(m))) return false;
  return true;
}

MultiPatchMesh overlay(const MultiPatchMesh& a, const MultiPatchMesh& b) {
  if (!a.same_initial_mesh(b))
    throw std::invalid_argument("overlay: meshes have different initial meshes");
  auto impl = std::make_shared<MultiPatchMesh::Impl>();
  impl->spaces = a.impl_->spaces;
  impl->topology = a.impl_->topology;
  impl->mode = a.impl_->mode;
  impl->patches = a.impl_->patches;
  for (size_t m = 0; m < impl->patches.size(); ++m) {
    PatchHierMesh& pm = impl->patches[m];
    const PatchHierMesh& pb = b.impl_->patches[m];
    if (pb.omega_.size() > pm.omega_.size()) pm.omega_.resize(pb.omega_.size());
    for (size_t k = 0; k < pb.omega_.size(); ++k)
      pm.omega_[k].insert(pb.omega_[k].begin(), pb.omega_[k].end());
  }
  impl->build_derived();
  return MultiPatchMesh(std::move(impl));
}

}  // namespace igabem
