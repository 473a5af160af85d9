#include "igabem/hier_basis.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace igabem {

namespace {

inline uint64_t pack_fn(const HierFn& f) {
  return (static_cast<uint64_t>(f.patch) << 56) | (static_cast<uint64_t>(f.level) << 48) |
         (static_cast<uint64_t>(static_cast<uint32_t>(f.j1) & 0xffffff) << 24) |
         (static_cast<uint32_t>(f.j2) & 0xffffff);
}

inline uint64_t pack_jj(int j1, int j2) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(j1)) << 32) | static_cast<uint32_t>(j2);
}

}  // namespace

SplineSpace::SplineSpace(MultiPatchMesh mesh, bool strict) : mesh_(std::move(mesh)) {
  if (strict && !is_admissible(mesh_))
    throw std::invalid_argument("SplineSpace: mesh is not admissible");

  const int M = mesh_.num_patches();
  two_scale_.resize(M);
  for (int m = 0; m < M; ++m) {
    const int depth = mesh_.level_info_depth(m);
    // selection per level; level 0 scans the whole (small) tensor basis,
    // deeper levels only candidates near Omega^level
    for (int lvl = 0; lvl <= depth; ++lvl) {
      const PatchLevelInfo& info = mesh_.level_info(m, lvl);
      std::set<std::pair<int, int>> candidates;
      if (lvl == 0) {
        for (int j1 = 0; j1 < info.kv[0].num_basis(); ++j1)
          for (int j2 = 0; j2 < info.kv[1].num_basis(); ++j2) candidates.insert({j1, j2});
      } else {
        auto range_over = [&](int dir, int32_t c) {
          auto first = std::partition_point(info.supp_hi[dir].begin(), info.supp_hi[dir].end(),
                                            [&](int h) { return h <= c; });
          auto last = std::partition_point(info.supp_lo[dir].begin(), info.supp_lo[dir].end(),
                                           [&](int l) { return l < c + 1; });
          return std::pair<int, int>{static_cast<int>(first - info.supp_hi[dir].begin()),
                                     static_cast<int>(last - info.supp_lo[dir].begin())};
        };
        for (auto [c1, c2] : mesh_.patch(m).omega_cells(lvl)) {
          auto [a0, a1] = range_over(0, c1);
          auto [b0, b1] = range_over(1, c2);
          for (int a = a0; a < a1; ++a)
            for (int b = b0; b < b1; ++b) candidates.insert({a, b});
        }
      }
      for (auto [j1, j2] : candidates) {
        if (!mesh_.is_selected(m, lvl, j1, j2)) continue;
        HierFn f{m, lvl, j1, j2};
        fn_pos_[pack_fn(f)] = static_cast<int>(fns_.size());
        fns_.push_back(f);
        supp_.push_back({info.supp_lo[0][j1], info.supp_hi[0][j1], info.supp_lo[1][j2],
                         info.supp_hi[1][j2]});
      }
    }
  }

  elems_of_fn_.resize(fns_.size());
  fns_on_elem_.assign(mesh_.elements().size(), {});
  for (size_t i = 0; i < fns_.size(); ++i) {
    const HierFn& f = fns_[i];
    const auto& s = supp_[i];
    std::vector<Element> covered;
    mesh_.active_in_cell_rect(f.patch, f.level, s[0], s[1], s[2], s[3], covered);
    for (const Element& e : covered) {
      int idx = mesh_.element_index(e);
      elems_of_fn_[i].push_back(idx);
      fns_on_elem_[idx].push_back(static_cast<int>(i));
    }
    std::sort(elems_of_fn_[i].begin(), elems_of_fn_[i].end());
  }

  thb_.resize(fns_.size());
  for (size_t i = 0; i < fns_.size(); ++i) build_thb(static_cast<int>(i));
}

int SplineSpace::function_index(const HierFn& f) const {
  auto it = fn_pos_.find(pack_fn(f));
  if (it == fn_pos_.end()) throw std::invalid_argument("function_index: not a basis function");
  return it->second;
}

const TwoScaleMatrix& SplineSpace::two_scale(int patch, int dir, int level) const {
  const auto& vec = two_scale_[patch][dir];
  if (level >= static_cast<int>(vec.size()))
    throw std::logic_error("two_scale: level out of range");
  return vec[level];
}

void SplineSpace::build_thb(int i) {
  const HierFn& f = fns_[i];
  const PatchHierMesh& pm = mesh_.patch(f.patch);
  const int depth = mesh_.level_info_depth(f.patch);
  // two-scale matrices are built on demand, once per (patch, dir, level)
  for (int d = 0; d < 2; ++d) {
    auto& vec = two_scale_[f.patch][d];
    while (static_cast<int>(vec.size()) < depth) {
      int lvl = static_cast<int>(vec.size());
      vec.push_back(two_scale_matrix(mesh_.level_info(f.patch, lvl).kv[d],
                                     mesh_.level_info(f.patch, lvl + 1).kv[d]));
    }
  }

  THBRep rep;
  rep.fn = f;
  rep.supp = supp_[i];
  rep.level_coeffs.push_back({{pack_jj(f.j1, f.j2), 1.0}});
  for (int lvl = f.level; lvl < depth; ++lvl) {
    const auto& cur = rep.level_coeffs.back();
    if (cur.empty()) break;
    const TwoScaleMatrix& t1 = two_scale_[f.patch][0][lvl];
    const TwoScaleMatrix& t2 = two_scale_[f.patch][1][lvl];
    std::map<uint64_t, double> next;
    for (const auto& [key, c] : cur) {
      int j1 = static_cast<int>(key >> 32);
      int j2 = static_cast<int>(key & 0xffffffffu);
      const auto& r1 = t1.rows[j1];
      const auto& r2 = t2.rows[j2];
      for (size_t a = 0; a < r1.coef.size(); ++a) {
        if (r1.coef[a] == 0.0) continue;
        for (size_t b = 0; b < r2.coef.size(); ++b) {
          if (r2.coef[b] == 0.0) continue;
          next[pack_jj(r1.first + static_cast<int>(a), r2.first + static_cast<int>(b))] +=
              c * r1.coef[a] * r2.coef[b];
        }
      }
    }
    const PatchLevelInfo& info = mesh_.level_info(f.patch, lvl + 1);
    for (auto it = next.begin(); it != next.end();) {
      int j1 = static_cast<int>(it->first >> 32);
      int j2 = static_cast<int>(it->first & 0xffffffffu);
      if (mesh_.is_selected(f.patch, lvl + 1, j1, j2)) {
        rep.removed.push_back({function_index(HierFn{f.patch, lvl + 1, j1, j2}), it->second});
        it = next.erase(it);
        continue;
      }
      // keep only what can still reach an active element of level > lvl+1
      bool overlaps_omega = false;
      for (int c1 = info.supp_lo[0][j1]; c1 < info.supp_hi[0][j1] && !overlaps_omega; ++c1)
        for (int c2 = info.supp_lo[1][j2]; c2 < info.supp_hi[1][j2]; ++c2)
          if (pm.cell_in_omega(lvl + 1, c1, c2)) {
            overlaps_omega = true;
            break;
          }
      if (!overlaps_omega) {
        it = next.erase(it);
        continue;
      }
      ++it;
    }
    rep.level_coeffs.push_back(std::move(next));
  }
  thb_[i] = std::move(rep);
}

double SplineSpace::eval_fn(int i, const Vec2& t) const {
  const HierFn& f = fns_[i];
  const PatchLevelInfo& info = mesh_.level_info(f.patch, f.level);
  BasisWindow w1 = info.kv[0].eval_all(t[0]);
  BasisWindow w2 = info.kv[1].eval_all(t[1]);
  int o1 = f.j1 - w1.first;
  int o2 = f.j2 - w2.first;
  double v1 = (o1 >= 0 && o1 < w1.count) ? w1.v[o1] : 0.0;
  double v2 = (o2 >= 0 && o2 < w2.count) ? w2.v[o2] : 0.0;
  return v1 * v2;
}

void SplineSpace::eval_local(const std::vector<int>& fn_ids, int patch, const Vec2& t,
                             double* out) const {
  // group windows by level; local functions span at most two levels
  int cached_level[2] = {-1, -1};
  BasisWindow cw1[2], cw2[2];
  int ncached = 0;
  for (size_t k = 0; k < fn_ids.size(); ++k) {
    const HierFn& f = fns_[fn_ids[k]];
    int slot = -1;
    for (int s = 0; s < ncached; ++s)
      if (cached_level[s] == f.level) slot = s;
    if (slot < 0) {
      slot = ncached < 2 ? ncached++ : 1;
      cached_level[slot] = f.level;
      const PatchLevelInfo& info = mesh_.level_info(patch, f.level);
      cw1[slot] = info.kv[0].eval_all(t[0]);
      cw2[slot] = info.kv[1].eval_all(t[1]);
    }
    int o1 = f.j1 - cw1[slot].first;
    int o2 = f.j2 - cw2[slot].first;
    double v1 = (o1 >= 0 && o1 < cw1[slot].count) ? cw1[slot].v[o1] : 0.0;
    double v2 = (o2 >= 0 && o2 < cw2[slot].count) ? cw2[slot].v[o2] : 0.0;
    out[k] = v1 * v2;
  }
}

double SplineSpace::eval_thb(const THBRep& rep, const Vec2& t) const {
  const HierFn& f = rep.fn;
  const PatchHierMesh& pm = mesh_.patch(f.patch);
  // outside the support rectangle the value is zero
  if (t[0] < pm.grid_coord(0, f.level, rep.supp[0]) ||
      t[0] > pm.grid_coord(0, f.level, rep.supp[1]) ||
      t[1] < pm.grid_coord(1, f.level, rep.supp[2]) ||
      t[1] > pm.grid_coord(1, f.level, rep.supp[3]))
    return 0.0;
  Element e = mesh_.element_at(f.patch, t[0], t[1]);
  if (e.level < f.level) return 0.0;
  int idx = e.level - f.level;
  if (idx >= static_cast<int>(rep.level_coeffs.size())) return 0.0;
  const auto& coeffs = rep.level_coeffs[idx];
  if (coeffs.empty()) return 0.0;
  const PatchLevelInfo& info = mesh_.level_info(f.patch, e.level);
  BasisWindow w1 = info.kv[0].eval_all(t[0]);
  BasisWindow w2 = info.kv[1].eval_all(t[1]);
  double val = 0.0;
  for (int a = 0; a < w1.count; ++a) {
    if (w1.v[a] == 0.0) continue;
    for (int b = 0; b < w2.count; ++b) {
      auto it = coeffs.find(pack_jj(w1.first + a, w2.first + b));
      if (it != coeffs.end()) val += it->second * w1.v[a] * w2.v[b];
    }
  }
  return val;
}

double SplineSpace::eval_thb_combination(const Eigen::VectorXd& coeffs, int patch,
                                         const Vec2& t) const {
  double val = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (fns_[i].patch != patch || coeffs[i] == 0.0) continue;
    val += coeffs[i] * eval_thb(thb_[i], t);
  }
  return val;
}

double SplineSpace::eval_hb_combination(const Eigen::VectorXd& coeffs, int patch,
                                        const Vec2& t) const {
  Element e = mesh_.element_at(patch, t[0], t[1]);
  int idx = mesh_.element_index(e);
  const std::vector<int>& local = fns_on_elem_[idx];
  std::vector<double> vals(local.size());
  eval_local(local, patch, t, vals.data());
  double out = 0.0;
  for (size_t k = 0; k < local.size(); ++k) out += coeffs[local[k]] * vals[k];
  return out;
}

Eigen::VectorXd SplineSpace::thb_to_hb(const Eigen::VectorXd& coeffs) const {
  Eigen::VectorXd out = coeffs;
  for (int i = 0; i < dim(); ++i) {
    if (coeffs[i] == 0.0) continue;
    for (const auto& [j, r] : thb_[i].removed) out[j] -= coeffs[i] * r;
  }
  return out;
}

Eigen::VectorXd SplineSpace::constant_one_hb_coeffs() const {
  return thb_to_hb(Eigen::VectorXd::Ones(dim()));
}

SplineSpace build_basis(const MultiPatchMesh& mesh, bool strict) {
  return SplineSpace(mesh, strict);
}

Eigen::VectorXd coarse_to_fine(const SplineSpace& coarse, const SplineSpace& fine,
                               const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != coarse.dim())
    throw std::invalid_argument("coarse_to_fine: coefficient size mismatch");
  if (!is_finer_or_equal(fine.mesh(), coarse.mesh()))
    throw std::invalid_argument("coarse_to_fine: meshes are not nested");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(fine.dim());
  const MultiPatchMesh& fmesh = fine.mesh();
  for (int i = 0; i < coarse.dim(); ++i) {
    if (coeffs[i] == 0.0) continue;
    const HierFn& f = coarse.fn(i);
    const int depth = fmesh.level_info_depth(f.patch);
    std::map<uint64_t, double> cur{{pack_jj(f.j1, f.j2), 1.0}};
    for (int lvl = f.level; lvl <= depth && !cur.empty(); ++lvl) {
      std::map<uint64_t, double> rest;
      for (const auto& [key, c] : cur) {
        int j1 = static_cast<int>(key >> 32);
        int j2 = static_cast<int>(key & 0xffffffffu);
        if (fmesh.is_selected(f.patch, lvl, j1, j2)) {
          out[fine.function_index(HierFn{f.patch, lvl, j1, j2})] += coeffs[i] * c;
        } else {
          rest[key] = c;
        }
      }
      if (lvl == depth) {
        // by nestedness everything is absorbed at the deepest level
        double leftover = 0.0;
        for (const auto& [_, c] : rest) leftover += std::abs(c);
        if (leftover > 1e-10)
          throw std::logic_error("coarse_to_fine: residual coefficients after pushdown");
        break;
      }
      const TwoScaleMatrix& t1 = fine.two_scale(f.patch, 0, lvl);
      const TwoScaleMatrix& t2 = fine.two_scale(f.patch, 1, lvl);
      std::map<uint64_t, double> next;
      for (const auto& [key, c] : rest) {
        int j1 = static_cast<int>(key >> 32);
        int j2 = static_cast<int>(key & 0xffffffffu);
        const auto& r1 = t1.rows[j1];
        const auto& r2 = t2.rows[j2];
        for (size_t a = 0; a < r1.coef.size(); ++a)
          for (size_t b = 0; b < r2.coef.size(); ++b)
            if (r1.coef[a] != 0.0 && r2.coef[b] != 0.0)
              next[pack_jj(r1.first + static_cast<int>(a), r2.first + static_cast<int>(b))] +=
                  c * r1.coef[a] * r2.coef[b];
      }
      cur = std::move(next);
    }
  }
  return out;
}

Eigen::VectorXd quasi_interpolate(const SplineSpace& space, const std::vector<Element>& S,
                                  const PatchwiseFn& g, int gauss_order) {
  const MultiPatchMesh& mesh = space.mesh();
  std::vector<bool> in_S(mesh.elements().size(), false);
  for (const Element& e : S) in_S[mesh.element_index(e)] = true;
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    const HierFn& f = space.fn(i);
    bool covered = true;
    for (int idx : space.elements_of_fn(i))
      if (!in_S[idx]) {
        covered = false;
        break;
      }
    if (!covered) continue;
    // dual element: lexicographically smallest active cell of the
    // function's own level inside its support
    const auto& s = space.support_cells(i);
    const PatchHierMesh& pm = mesh.patch(f.patch);
    int dual1 = -1, dual2 = -1;
    for (int c1 = s[0]; c1 < s[1] && dual1 < 0; ++c1)
      for (int c2 = s[2]; c2 < s[3]; ++c2)
        if (pm.cell_in_omega(f.level, c1, c2) && !pm.cell_subdivided(f.level, c1, c2)) {
          dual1 = c1;
          dual2 = c2;
          break;
        }
    if (dual1 < 0) throw std::logic_error("quasi_interpolate: no dual element found");
    const PatchLevelInfo& info = mesh.level_info(f.patch, f.level);
    TensorSplineSpace level_space{info.kv[0], info.kv[1]};
    coeffs[i] = element_dual_pairing(
        level_space, dual1, dual2, f.j1, f.j2,
        [&](double t1, double t2) { return g(f.patch, t1, t2); }, gauss_order);
  }
  return coeffs;
}

}  // namespace igabem
