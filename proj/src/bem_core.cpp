#include "igabem/bem_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "igabem/parallel.hpp"

namespace igabem {

void QuadConfig::validate() const {
  if (n_reg < 1 || n_sing < 1) throw std::invalid_argument("QuadConfig: orders must be >= 1");
  if (rho_near <= 0.0) throw std::invalid_argument("QuadConfig: rho_near must be positive");
  if (interp_degree < 0) throw std::invalid_argument("QuadConfig: interp_degree must be >= 0");
}

double kernel(const Vec3& z) {
  double r = z.norm();
  if (r == 0.0) throw std::invalid_argument("kernel: evaluation at the singularity");
  return 1.0 / (4.0 * M_PI * r);
}

namespace {

constexpr int kMaxLocalFns = 32;

struct LocalFn {
  int level;
  int j1, j2;
};

// Basis values of up to kMaxLocalFns functions (at most two levels) at a
// parameter point.
void eval_local_fns(const MultiPatchMesh& mesh, int patch, const LocalFn* fns, int count,
                    const Vec2& t, double* out) {
  int cached_level[2] = {-1, -1};
  BasisWindow cw1[2], cw2[2];
  int ncached = 0;
  for (int k = 0; k < count; ++k) {
    int slot = -1;
    for (int s = 0; s < ncached; ++s)
      if (cached_level[s] == fns[k].level) slot = s;
    if (slot < 0) {
      slot = ncached < 2 ? ncached++ : 1;
      cached_level[slot] = fns[k].level;
      const PatchLevelInfo& info = mesh.level_info(patch, fns[k].level);
      cw1[slot] = info.kv[0].eval_all(t[0]);
      cw2[slot] = info.kv[1].eval_all(t[1]);
    }
    int o1 = fns[k].j1 - cw1[slot].first;
    int o2 = fns[k].j2 - cw2[slot].first;
    double v1 = (o1 >= 0 && o1 < cw1[slot].count) ? cw1[slot].v[o1] : 0.0;
    double v2 = (o2 >= 0 && o2 < cw2[slot].count) ? cw2[slot].v[o2] : 0.0;
    out[k] = v1 * v2;
  }
}

struct PanelData {
  std::array<double, 4> rect;
  int patch;
  Vec3 center;
  double radius = 0.0;
  // cached tensor Gauss data at n_reg
  std::vector<Vec3> x;
  std::vector<Vec2> tp;
  std::vector<Vec3> nrm;
  std::vector<double> w;            // gauss weight * |rect| * sqrt_gram
  Eigen::MatrixXd phi_w;            // nloc x npts, basis values times w
  std::vector<LocalFn> fns;         // local functions (space ordering)
  std::vector<int> fn_ids;
};

std::vector<PanelData> build_panel_cache(const BoundaryGeometry& geom, const SplineSpace& space,
                                         int order) {
  const MultiPatchMesh& mesh = space.mesh();
  const auto& elements = mesh.elements();
  std::vector<PanelData> panels(elements.size());
  QuadRule1D g = gauss_rule(order);
  parallel_for(static_cast<int64_t>(elements.size()), [&](int64_t idx) {
    const Element& e = elements[idx];
    PanelData& pd = panels[idx];
    pd.rect = mesh.element_rect(e);
    pd.patch = e.patch;
    const NurbsPatch& patch = geom.patch(e.patch);
    const double w1 = pd.rect[1] - pd.rect[0];
    const double w2 = pd.rect[3] - pd.rect[2];
    // bounding sphere from a 3x3 sample
    std::vector<Vec3> samples;
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; b <= 2; ++b)
        samples.push_back(patch.eval({pd.rect[0] + w1 * a / 2.0, pd.rect[2] + w2 * b / 2.0}));
    pd.center = Vec3::Zero();
    for (const Vec3& s : samples) pd.center += s;
    pd.center /= static_cast<double>(samples.size());
    for (const Vec3& s : samples) pd.radius = std::max(pd.radius, (s - pd.center).norm());

    pd.fn_ids = space.functions_on_element(static_cast<int>(idx));
    for (int fid : pd.fn_ids) {
      const HierFn& f = space.fn(fid);
      pd.fns.push_back(LocalFn{f.level, f.j1, f.j2});
    }
    const int n2 = order * order;
    pd.x.resize(n2);
    pd.tp.resize(n2);
    pd.nrm.resize(n2);
    pd.w.resize(n2);
    pd.phi_w.resize(static_cast<Eigen::Index>(pd.fns.size()), n2);
    double vals[kMaxLocalFns];
    for (int a = 0; a < order; ++a) {
      for (int b = 0; b < order; ++b) {
        int k = a * order + b;
        Vec2 t(pd.rect[0] + w1 * g.nodes[a], pd.rect[2] + w2 * g.nodes[b]);
        NurbsPatch::Frame fr = patch.frame(t);
        pd.tp[k] = t;
        pd.x[k] = fr.x;
        pd.nrm[k] = fr.normal;
        pd.w[k] = g.weights[a] * g.weights[b] * w1 * w2 * fr.sqrt_gram;
        eval_local_fns(mesh, e.patch, pd.fns.data(), static_cast<int>(pd.fns.size()), t, vals);
        for (size_t f = 0; f < pd.fns.size(); ++f) pd.phi_w(f, k) = vals[f] * pd.w[k];
      }
    }
  });
  return panels;
}

bool pair_is_near(const PanelData& a, const PanelData& b, double rho) {
  double dist = std::max(0.0, (a.center - b.center).norm() - a.radius - b.radius);
  return dist < rho * 2.0 * std::max(a.radius, b.radius);
}

struct TaskGeometry {
  const NurbsPatch* patch_a;
  const NurbsPatch* patch_b;
  std::array<double, 4> rect_a;
  std::array<double, 4> rect_b;
  LocalMap map_a;
  LocalMap map_b;
  double area;  // |rect_a| * |rect_b|

  Vec2 param_a(const Vec2& local) const {
    Vec2 u = map_a.apply(local[0], local[1]);
    return {rect_a[0] + (rect_a[1] - rect_a[0]) * u[0], rect_a[2] + (rect_a[3] - rect_a[2]) * u[1]};
  }
  Vec2 param_b(const Vec2& local) const {
    Vec2 u = map_b.apply(local[0], local[1]);
    return {rect_b[0] + (rect_b[1] - rect_b[0]) * u[0], rect_b[2] + (rect_b[3] - rect_b[2]) * u[1]};
  }
};

TaskGeometry make_task_geometry(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                                const QuadTask& task) {
  TaskGeometry tg;
  tg.patch_a = &geom.patch(task.a.patch);
  tg.patch_b = &geom.patch(task.b.patch);
  tg.rect_a = mesh.element_rect(task.a);
  tg.rect_b = mesh.element_rect(task.b);
  switch (task.kind) {
    case PairKind::Identical:
      tg.map_a = identity_map();
      tg.map_b = identity_map();
      break;
    case PairKind::Edge:
      tg.map_a = edge_map(task.edge_a, false);
      tg.map_b = edge_map(task.edge_b, task.edge_rev);
      break;
    case PairKind::Vertex:
      tg.map_a = corner_map(task.corner_a);
      tg.map_b = corner_map(task.corner_b);
      break;
    case PairKind::Disjoint:
      tg.map_a = identity_map();
      tg.map_b = identity_map();
      break;
  }
  tg.area = (tg.rect_a[1] - tg.rect_a[0]) * (tg.rect_a[3] - tg.rect_a[2]) *
            (tg.rect_b[1] - tg.rect_b[0]) * (tg.rect_b[3] - tg.rect_b[2]);
  return tg;
}

// Accumulation target: either a local Galerkin block or a scalar integral.
struct BlockSink {
  const MultiPatchMesh* mesh = nullptr;
  const LocalFn* fns_a = nullptr;
  int count_a = 0;
  const LocalFn* fns_b = nullptr;
  int count_b = 0;
  Eigen::MatrixXd* block = nullptr;
  const std::function<double(const Vec2&)>* fa = nullptr;
  const std::function<double(const Vec2&)>* fb = nullptr;
  double* scalar = nullptr;
};

void integrate_task(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                    const QuadTask& task, int order, const BlockSink& sink) {
  TaskGeometry tg = make_task_geometry(geom, mesh, task);
  QuadRule1D g = gauss_rule(order);
  double va[kMaxLocalFns], vb[kMaxLocalFns];
  auto point = [&](const Vec2& la, const Vec2& lb, double w) {
    Vec2 ta = tg.param_a(la);
    Vec2 tb = tg.param_b(lb);
    NurbsPatch::Frame fa = tg.patch_a->frame(ta);
    NurbsPatch::Frame fb = tg.patch_b->frame(tb);
    Vec3 z = fa.x - fb.x;
    double r = z.norm();
    if (r == 0.0) return;
    double wt = w * tg.area * fa.sqrt_gram * fb.sqrt_gram / (4.0 * M_PI * r);
    if (sink.block != nullptr) {
      eval_local_fns(mesh, task.a.patch, sink.fns_a, sink.count_a, ta, va);
      eval_local_fns(mesh, task.b.patch, sink.fns_b, sink.count_b, tb, vb);
      for (int a = 0; a < sink.count_a; ++a) {
        if (va[a] == 0.0) continue;
        double wa = wt * va[a];
        for (int b = 0; b < sink.count_b; ++b) (*sink.block)(a, b) += wa * vb[b];
      }
    } else {
      *sink.scalar += wt * (*sink.fa)(ta) * (*sink.fb)(tb);
    }
  };
  switch (task.kind) {
    case PairKind::Identical:
      identical_panel_points(g, point);
      break;
    case PairKind::Edge:
      common_edge_points(g, point);
      break;
    case PairKind::Vertex:
      common_vertex_points(g, point);
      break;
    case PairKind::Disjoint:
      for (int a1 = 0; a1 < order; ++a1)
        for (int a2 = 0; a2 < order; ++a2)
          for (int b1 = 0; b1 < order; ++b1)
            for (int b2 = 0; b2 < order; ++b2)
              point(Vec2(g.nodes[a1], g.nodes[a2]), Vec2(g.nodes[b1], g.nodes[b2]),
                    g.weights[a1] * g.weights[a2] * g.weights[b1] * g.weights[b2]);
      break;
  }
}

// Fast path for well-separated active pairs using the cached panel data.
void far_pair_block(const PanelData& pa, const PanelData& pb, Eigen::MatrixXd& block) {
  const int na = static_cast<int>(pa.x.size());
  const int nb = static_cast<int>(pb.x.size());
  thread_local Eigen::MatrixXd K;
  K.resize(na, nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      K(i, j) = 1.0 / (4.0 * M_PI * (pa.x[i] - pb.x[j]).norm());
  block.noalias() = pa.phi_w * K * pb.phi_w.transpose();
}

void pair_block(const BoundaryGeometry& geom, const SplineSpace& space,
                const std::vector<PanelData>& panels, int ia, int ib, const QuadConfig& q,
                Eigen::MatrixXd& block) {
  const MultiPatchMesh& mesh = space.mesh();
  const Element& ea = mesh.elements()[ia];
  const Element& eb = mesh.elements()[ib];
  const PanelData& pa = panels[ia];
  const PanelData& pb = panels[ib];
  block.setZero(static_cast<Eigen::Index>(pa.fns.size()), static_cast<Eigen::Index>(pb.fns.size()));
  BlockSink sink;
  sink.mesh = &mesh;
  sink.fns_a = pa.fns.data();
  sink.count_a = static_cast<int>(pa.fns.size());
  sink.fns_b = pb.fns.data();
  sink.count_b = static_cast<int>(pb.fns.size());
  sink.block = &block;

  if (ia == ib) {
    QuadTask t;
    t.kind = PairKind::Identical;
    t.a = ea;
    t.b = eb;
    integrate_task(geom, mesh, t, q.n_sing, sink);
    block = 0.5 * (block + block.transpose()).eval();
    return;
  }
  std::vector<QuadTask> tasks;
  decompose_pair(mesh, ea, eb, tasks);
  if (tasks.size() == 1 && tasks[0].kind == PairKind::Disjoint) {
    if (pair_is_near(pa, pb, q.rho_near)) {
      integrate_task(geom, mesh, tasks[0], q.n_sing, sink);
    } else {
      far_pair_block(pa, pb, block);
    }
    return;
  }
  for (const QuadTask& t : tasks) {
    // panels produced by splitting are adjacent to the singular region, so
    // disjoint subtasks stay at the singular order
    integrate_task(geom, mesh, t, q.n_sing, sink);
  }
}

}  // namespace

double panel_pair_integral(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                           const Element& a, const Element& b,
                           const std::function<double(const Vec2&)>& fa,
                           const std::function<double(const Vec2&)>& fb, const QuadConfig& q) {
  q.validate();
  if (!mesh.is_active(a) || !mesh.is_active(b))
    throw std::invalid_argument("panel_pair_integral: stale element");
  // canonical orientation makes the swap exactly symmetric
  if (b < a) return panel_pair_integral(geom, mesh, b, a, fb, fa, q);
  std::vector<QuadTask> tasks;
  decompose_pair(mesh, a, b, tasks);
  double result = 0.0;
  BlockSink sink;
  sink.fa = &fa;
  sink.fb = &fb;
  sink.scalar = &result;
  for (const QuadTask& t : tasks) {
    int order = q.n_sing;
    if (t.kind == PairKind::Disjoint && tasks.size() == 1) {
      // distance-based order for genuinely separated pairs
      auto bounding = [&](const Element& e, Vec3& center, double& radius) {
        auto r = mesh.element_rect(e);
        center = Vec3::Zero();
        std::array<Vec3, 4> corners;
        corners[0] = geom.patch(e.patch).eval({r[0], r[2]});
        corners[1] = geom.patch(e.patch).eval({r[1], r[2]});
        corners[2] = geom.patch(e.patch).eval({r[0], r[3]});
        corners[3] = geom.patch(e.patch).eval({r[1], r[3]});
        for (const Vec3& c : corners) center += c;
        center /= 4.0;
        radius = 0.0;
        for (const Vec3& c : corners) radius = std::max(radius, (c - center).norm());
      };
      Vec3 ca, cb;
      double ra, rb;
      bounding(a, ca, ra);
      bounding(b, cb, rb);
      double dist = std::max(0.0, (ca - cb).norm() - ra - rb);
      order = dist < q.rho_near * 2.0 * std::max(ra, rb) ? q.n_sing : q.n_reg;
    }
    integrate_task(geom, mesh, t, order, sink);
  }
  return result;
}

Eigen::MatrixXd assemble(const BoundaryGeometry& geom, const SplineSpace& space,
                         const QuadConfig& q) {
  q.validate();
  const MultiPatchMesh& mesh = space.mesh();
  const int N = mesh.num_elements();
  std::vector<PanelData> panels = build_panel_cache(geom, space, q.n_reg);

  std::vector<std::pair<int32_t, int32_t>> pairs;
  pairs.reserve(static_cast<size_t>(N) * (N + 1) / 2);
  for (int32_t ia = 0; ia < N; ++ia)
    for (int32_t ib = ia; ib < N; ++ib) pairs.emplace_back(ia, ib);

  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(space.dim(), space.dim());
  const int64_t chunk = 1 << 14;
  std::vector<Eigen::MatrixXd> blocks(static_cast<size_t>(std::min<int64_t>(chunk, pairs.size())));
  for (int64_t start = 0; start < static_cast<int64_t>(pairs.size()); start += chunk) {
    int64_t count = std::min<int64_t>(chunk, static_cast<int64_t>(pairs.size()) - start);
    parallel_for(count, [&](int64_t k) {
      auto [ia, ib] = pairs[start + k];
      pair_block(geom, space, panels, ia, ib, q, blocks[k]);
    });
    for (int64_t k = 0; k < count; ++k) {
      auto [ia, ib] = pairs[start + k];
      const auto& fa = panels[ia].fn_ids;
      const auto& fb = panels[ib].fn_ids;
      const Eigen::MatrixXd& M = blocks[k];
      for (size_t a = 0; a < fa.size(); ++a) {
        for (size_t b = 0; b < fb.size(); ++b) {
          V(fa[a], fb[b]) += M(a, b);
          if (ia != ib) V(fb[b], fa[a]) += M(a, b);
        }
      }
    }
  }
  return V;
}

Eigen::VectorXd assemble_rhs(const BoundaryGeometry& geom, const SplineSpace& space,
                             const SurfaceFn& f, const QuadConfig& q) {
  q.validate();
  const MultiPatchMesh& mesh = space.mesh();
  const int N = mesh.num_elements();
  QuadRule1D g = gauss_rule(q.n_sing);
  std::vector<Eigen::VectorXd> local(N);
  parallel_for(N, [&](int64_t idx) {
    const Element& e = mesh.elements()[idx];
    const auto& fn_ids = space.functions_on_element(static_cast<int>(idx));
    std::vector<LocalFn> fns;
    for (int fid : fn_ids) {
      const HierFn& hf = space.fn(fid);
      fns.push_back(LocalFn{hf.level, hf.j1, hf.j2});
    }
    auto rect = mesh.element_rect(e);
    double w1 = rect[1] - rect[0], w2 = rect[3] - rect[2];
    const NurbsPatch& patch = geom.patch(e.patch);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fns.size()));
    double vals[kMaxLocalFns];
    for (int a = 0; a < g.order; ++a) {
      for (int b = 0; b < g.order; ++b) {
        Vec2 t(rect[0] + w1 * g.nodes[a], rect[2] + w2 * g.nodes[b]);
        NurbsPatch::Frame fr = patch.frame(t);
        double w = g.weights[a] * g.weights[b] * w1 * w2 * fr.sqrt_gram;
        double fv = f(e.patch, t, fr.x);
        eval_local_fns(mesh, e.patch, fns.data(), static_cast<int>(fns.size()), t, vals);
        for (size_t k = 0; k < fns.size(); ++k) acc[k] += w * fv * vals[k];
      }
    }
    local[idx] = std::move(acc);
  });
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(space.dim());
  for (int idx = 0; idx < N; ++idx) {
    const auto& fn_ids = space.functions_on_element(idx);
    for (size_t k = 0; k < fn_ids.size(); ++k) rhs[fn_ids[k]] += local[idx][k];
  }
  return rhs;
}

GalerkinSystem assemble_system(const BoundaryGeometry& geom, const SplineSpace& space,
                               const SurfaceFn& f, const QuadConfig& q) {
  GalerkinSystem sys;
  sys.V = assemble(geom, space, q);
  sys.b = assemble_rhs(geom, space, f, q);
  return sys;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& V, const Eigen::VectorXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solve_spd: matrix is not positive definite");
  Eigen::VectorXd x = llt.solve(b);
  x += llt.solve(b - V * x);  // one step of iterative refinement
  double bnorm = b.norm();
  if (bnorm > 0.0 && (V * x - b).norm() > 1e-10 * bnorm)
    throw std::runtime_error("solve_spd: residual too large");
  return x;
}

void dump_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("dump_matrix_binary: matrix not square");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dump_matrix_binary: cannot open " + path);
  uint64_t n = static_cast<uint64_t>(m.rows());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

Eigen::MatrixXd load_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_matrix_binary: cannot open " + path);
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(i, j) = v;
    }
  if (!in) throw std::runtime_error("load_matrix_binary: truncated file");
  return m;
}

// ---------------------------------------------------------------------------
// potentials
// ---------------------------------------------------------------------------

namespace {

struct SourcePanel {
  int patch;
  std::array<double, 4> rect;
  Vec3 center;
  double radius;
  int offset;  // into the flattened source arrays
  int count;
  std::vector<LocalFn> fns;       // density functions (single layer)
  std::vector<double> fn_coeffs;  // matching coefficients
};

struct PotentialCore {
  BoundaryGeometry geom;
  MultiPatchMesh mesh;
  QuadConfig q;
  bool double_layer = false;
  SurfaceFn g;  // double-layer data
  std::vector<SourcePanel> panels;
  std::vector<Vec3> src_x;
  std::vector<Vec3> src_n;
  std::vector<double> src_w;  // weight * sqrt_gram * (density or g)

  double density_at(const SourcePanel& sp, const Vec2& t) const {
    if (sp.fns.empty()) return 0.0;
    double vals[kMaxLocalFns];
    eval_local_fns(mesh, sp.patch, sp.fns.data(), static_cast<int>(sp.fns.size()), t, vals);
    double d = 0.0;
    for (size_t k = 0; k < sp.fns.size(); ++k) d += sp.fn_coeffs[k] * vals[k];
    return d;
  }

  double source_value(const SourcePanel& sp, const Vec2& t, const Vec3& x) const {
    return double_layer ? g(sp.patch, t, x) : density_at(sp, t);
  }

  double kern(const Vec3& x, const Vec3& y, const Vec3& ny) const {
    Vec3 z = x - y;
    double r = z.norm();
    if (r == 0.0) return 0.0;
    if (!double_layer) return 1.0 / (4.0 * M_PI * r);
    return z.dot(ny) / (4.0 * M_PI * r * r * r);
  }

  // plain tensor Gauss over a parametric sub-rectangle
  double plain_rect(const SourcePanel& sp, const std::array<double, 4>& rect, const Vec3& x,
                    int order) const {
    QuadRule1D g1 = gauss_rule(order);
    const NurbsPatch& patch = geom.patch(sp.patch);
    double w1 = rect[1] - rect[0], w2 = rect[3] - rect[2];
    double acc = 0.0;
    for (int a = 0; a < g1.order; ++a) {
      for (int b = 0; b < g1.order; ++b) {
        Vec2 t(rect[0] + w1 * g1.nodes[a], rect[2] + w2 * g1.nodes[b]);
        NurbsPatch::Frame fr = patch.frame(t);
        double w = g1.weights[a] * g1.weights[b] * w1 * w2 * fr.sqrt_gram;
        acc += w * kern(x, fr.x, fr.normal) * source_value(sp, t, fr.x);
      }
    }
    return acc;
  }

  double subdivided(const SourcePanel& sp, const std::array<double, 4>& rect, const Vec3& x,
                    int depth) const {
    const NurbsPatch& patch = geom.patch(sp.patch);
    Vec3 c = Vec3::Zero();
    double radius = 0.0;
    std::array<Vec3, 9> samples;
    int k = 0;
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; b <= 2; ++b)
        samples[k++] = patch.eval({rect[0] + (rect[1] - rect[0]) * a / 2.0,
                                   rect[2] + (rect[3] - rect[2]) * b / 2.0});
    for (const Vec3& s : samples) c += s;
    c /= 9.0;
    for (const Vec3& s : samples) radius = std::max(radius, (s - c).norm());
    double dist = std::max(0.0, (x - c).norm() - radius);
    if (depth >= 12 || dist >= q.rho_near * 2.0 * radius) return plain_rect(sp, rect, x, q.n_sing);
    double mx = 0.5 * (rect[0] + rect[1]);
    double my = 0.5 * (rect[2] + rect[3]);
    double acc = 0.0;
    acc += subdivided(sp, {rect[0], mx, rect[2], my}, x, depth + 1);
    acc += subdivided(sp, {rect[0], mx, my, rect[3]}, x, depth + 1);
    acc += subdivided(sp, {mx, rect[1], rect[2], my}, x, depth + 1);
    acc += subdivided(sp, {mx, rect[1], my, rect[3]}, x, depth + 1);
    return acc;
  }

  // polar Duffy around an interior target point of the panel itself
  double self_panel(const SourcePanel& sp, const Vec2& t0, const Vec3& x) const {
    const NurbsPatch& patch = geom.patch(sp.patch);
    const std::array<double, 4>& r = sp.rect;
    const Vec2 corners[4] = {{r[0], r[2]}, {r[1], r[2]}, {r[1], r[3]}, {r[0], r[3]}};
    QuadRule1D g1 = gauss_rule(q.n_sing);
    double acc = 0.0;
    for (int side = 0; side < 4; ++side) {
      Vec2 e1 = corners[side] - t0;
      Vec2 e2 = corners[(side + 1) % 4] - t0;
      double det = e1[0] * e2[1] - e1[1] * e2[0];
      if (std::abs(det) < 1e-300) continue;
      for (int a = 0; a < g1.order; ++a) {
        for (int b = 0; b < g1.order; ++b) {
          double u = g1.nodes[a], v = g1.nodes[b];
          Vec2 t = t0 + u * ((1.0 - v) * e1 + v * e2);
          NurbsPatch::Frame fr = patch.frame(t);
          double w = g1.weights[a] * g1.weights[b] * u * std::abs(det) * fr.sqrt_gram;
          acc += w * kern(x, fr.x, fr.normal) * source_value(sp, t, fr.x);
        }
      }
    }
    return acc;
  }

  double eval(const SurfacePoint& p) const {
    const NurbsPatch& tp = geom.patch(p.patch);
    Vec3 x = tp.eval(p.t);
    if (double_layer) {
      const double tol = 1e-14;
      if (p.t[0] < tol || p.t[0] > 1.0 - tol || p.t[1] < tol || p.t[1] > 1.0 - tol)
        throw std::invalid_argument("double layer: target on a patch edge");
    }
    double total = 0.0;
    for (size_t k = 0; k < src_x.size(); ++k) total += src_w[k] * kern(x, src_x[k], src_n[k]);
    Element self = mesh.element_at(p.patch, p.t[0], p.t[1]);
    int self_idx = mesh.element_index(self);
    for (size_t e = 0; e < panels.size(); ++e) {
      const SourcePanel& sp = panels[e];
      bool is_self = static_cast<int>(e) == self_idx;
      double dist = std::max(0.0, (x - sp.center).norm() - sp.radius);
      // corrections are cheap for point evaluation, so the near region is
      // taken twice as wide as for Galerkin pairs
      if (!is_self && dist >= 2.0 * q.rho_near * 2.0 * sp.radius) continue;
      // remove the cached contribution (recomputed bitwise identically)
      double cached = 0.0;
      for (int k = sp.offset; k < sp.offset + sp.count; ++k)
        cached += src_w[k] * kern(x, src_x[k], src_n[k]);
      total -= cached;
      total += is_self ? self_panel(sp, p.t, x) : subdivided(sp, sp.rect, x, 0);
    }
    return total;
  }
};

void build_core(PotentialCore& core, const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                const QuadConfig& q, const SplineSpace* space, const Eigen::VectorXd* coeffs,
                SurfaceFn g) {
  q.validate();
  core.geom = geom;
  core.mesh = mesh;
  core.q = q;
  core.double_layer = static_cast<bool>(g);
  core.g = std::move(g);
  const auto& elements = mesh.elements();
  core.panels.resize(elements.size());
  QuadRule1D g1 = gauss_rule(q.n_reg);
  const int npts = q.n_reg * q.n_reg;
  core.src_x.resize(elements.size() * npts);
  core.src_n.resize(elements.size() * npts);
  core.src_w.resize(elements.size() * npts);
  parallel_for(static_cast<int64_t>(elements.size()), [&](int64_t idx) {
    const Element& e = elements[idx];
    SourcePanel& sp = core.panels[idx];
    sp.patch = e.patch;
    sp.rect = mesh.element_rect(e);
    sp.offset = static_cast<int>(idx) * npts;
    sp.count = npts;
    if (space != nullptr) {
      for (int fid : space->functions_on_element(static_cast<int>(idx))) {
        const HierFn& f = space->fn(fid);
        sp.fns.push_back(LocalFn{f.level, f.j1, f.j2});
        sp.fn_coeffs.push_back((*coeffs)[fid]);
      }
    }
    const NurbsPatch& patch = geom.patch(e.patch);
    double w1 = sp.rect[1] - sp.rect[0], w2 = sp.rect[3] - sp.rect[2];
    Vec3 c = Vec3::Zero();
    std::array<Vec3, 9> samples;
    int k = 0;
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; b <= 2; ++b)
        samples[k++] =
            patch.eval({sp.rect[0] + w1 * a / 2.0, sp.rect[2] + w2 * b / 2.0});
    for (const Vec3& s : samples) c += s;
    sp.center = c / 9.0;
    sp.radius = 0.0;
    for (const Vec3& s : samples) sp.radius = std::max(sp.radius, (s - sp.center).norm());
    for (int a = 0; a < g1.order; ++a) {
      for (int b = 0; b < g1.order; ++b) {
        int kk = sp.offset + a * g1.order + b;
        Vec2 t(sp.rect[0] + w1 * g1.nodes[a], sp.rect[2] + w2 * g1.nodes[b]);
        NurbsPatch::Frame fr = patch.frame(t);
        core.src_x[kk] = fr.x;
        core.src_n[kk] = fr.normal;
        core.src_w[kk] = g1.weights[a] * g1.weights[b] * w1 * w2 * fr.sqrt_gram *
                         core.source_value(sp, t, fr.x);
      }
    }
  });
}

}  // namespace

struct SingleLayerPotential::Impl : PotentialCore {};

SingleLayerPotential::SingleLayerPotential(const BoundaryGeometry& geom, const SplineSpace& space,
                                           Eigen::VectorXd coeffs, const QuadConfig& q) {
  auto core = std::make_shared<Impl>();
  build_core(*core, geom, space.mesh(), q, &space, &coeffs, nullptr);
  impl_ = std::move(core);
}

double SingleLayerPotential::operator()(const SurfacePoint& p) const { return impl_->eval(p); }

struct DoubleLayerPotential::Impl : PotentialCore {};

DoubleLayerPotential::DoubleLayerPotential(const BoundaryGeometry& geom,
                                           const MultiPatchMesh& mesh, SurfaceFn g,
                                           const QuadConfig& q) {
  if (!g) throw std::invalid_argument("DoubleLayerPotential: missing data function");
  auto core = std::make_shared<Impl>();
  build_core(*core, geom, mesh, q, nullptr, nullptr, std::move(g));
  impl_ = std::move(core);
}

double DoubleLayerPotential::operator()(const SurfacePoint& p) const { return impl_->eval(p); }

double eval_single_layer(const BoundaryGeometry& geom, const SplineSpace& space,
                         const Eigen::VectorXd& coeffs, const SurfacePoint& p,
                         const QuadConfig& q) {
  return SingleLayerPotential(geom, space, coeffs, q)(p);
}

double eval_double_layer(const BoundaryGeometry& geom, const MultiPatchMesh& mesh,
                         const SurfaceFn& g, const SurfacePoint& p, const QuadConfig& q) {
  return DoubleLayerPotential(geom, mesh, g, q)(p);
}

}  // namespace igabem
