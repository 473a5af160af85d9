#include "igabem/panel_quadrature.hpp"

#include <algorithm>
#include <stdexcept>

namespace igabem {

LocalMap identity_map() { return {}; }

LocalMap edge_map(int edge, bool reversed) {
  // (s, d) with s' = reversed ? 1-s : s
  double sm = reversed ? -1.0 : 1.0;
  double sc = reversed ? 1.0 : 0.0;
  LocalMap m;
  switch (edge) {
    case 0:  // (s', d)
      m = {sm, 0, 0, 1, sc, 0};
      break;
    case 1:  // (1-d, s')
      m = {0, -1, sm, 0, 1, sc};
      break;
    case 2:  // (s', 1-d)
      m = {sm, 0, 0, -1, sc, 1};
      break;
    default:  // (d, s')
      m = {0, 1, sm, 0, 0, sc};
      break;
  }
  return m;
}

LocalMap corner_map(int corner) {
  bool cx = corner == 1 || corner == 2;
  bool cy = corner == 2 || corner == 3;
  LocalMap m;
  m.m00 = cx ? -1 : 1;
  m.c0 = cx ? 1 : 0;
  m.m11 = cy ? -1 : 1;
  m.c1 = cy ? 1 : 0;
  return m;
}

namespace {

struct IvalOverlap {
  int64_t lo, hi;  // in grid points at level max(ka, kb)
};

IvalOverlap overlap_1d(int64_t a0, int64_t a1, int ka, int64_t b0, int64_t b1, int kb) {
  int K = std::max(ka, kb);
  a0 <<= (K - ka);
  a1 <<= (K - ka);
  b0 <<= (K - kb);
  b1 <<= (K - kb);
  return {std::max(a0, b0), std::min(a1, b1)};
}

int corner_id(bool at_x_end, bool at_y_end) {
  if (!at_x_end && !at_y_end) return 0;
  if (at_x_end && !at_y_end) return 1;
  if (at_x_end && at_y_end) return 2;
  return 3;
}

void split_coarser(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                   std::vector<QuadTask>& out, int depth);

void classify_same_patch(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                         std::vector<QuadTask>& out, int depth) {
  IvalOverlap o1 = overlap_1d(a.i1, a.i1 + 1, a.level, b.i1, b.i1 + 1, b.level);
  IvalOverlap o2 = overlap_1d(a.i2, a.i2 + 1, a.level, b.i2, b.i2 + 1, b.level);
  if (o1.lo > o1.hi || o2.lo > o2.hi) {
    out.push_back(QuadTask{PairKind::Disjoint, a, b});
    return;
  }
  int64_t len1 = o1.hi - o1.lo, len2 = o2.hi - o2.lo;
  if (len1 > 0 && len2 > 0)
    throw std::logic_error("decompose_pair: panels overlap with positive area");
  if (len1 == 0 && len2 == 0) {
    // point contact is always corner-to-corner for axis-aligned cells
    int K = std::max(a.level, b.level);
    int64_t ax1 = static_cast<int64_t>(a.i1 + 1) << (K - a.level);
    int64_t ay1 = static_cast<int64_t>(a.i2 + 1) << (K - a.level);
    bool a_x_end = o1.lo == ax1;
    bool a_y_end = o2.lo == ay1;
    int64_t bx1 = static_cast<int64_t>(b.i1 + 1) << (K - b.level);
    int64_t by1 = static_cast<int64_t>(b.i2 + 1) << (K - b.level);
    bool b_x_end = o1.lo == bx1;
    bool b_y_end = o2.lo == by1;
    QuadTask t;
    t.kind = PairKind::Vertex;
    t.a = a;
    t.b = b;
    t.corner_a = corner_id(a_x_end, a_y_end);
    t.corner_b = corner_id(b_x_end, b_y_end);
    out.push_back(t);
    return;
  }
  // edge contact: full shared edge of both iff the cells match level and
  // index along the touching direction
  bool along_dim2 = len2 > 0;  // contact segment runs in direction 2
  if (a.level == b.level) {
    QuadTask t;
    t.kind = PairKind::Edge;
    t.a = a;
    t.b = b;
    t.edge_rev = false;
    if (along_dim2) {
      t.edge_a = (b.i1 > a.i1) ? 1 : 3;
      t.edge_b = (b.i1 > a.i1) ? 3 : 1;
    } else {
      t.edge_a = (b.i2 > a.i2) ? 2 : 0;
      t.edge_b = (b.i2 > a.i2) ? 0 : 2;
    }
    out.push_back(t);
    return;
  }
  split_coarser(mesh, a, b, out, depth);
}

// Patch-edge interval of an element along a given edge, in level cells.
struct EdgeIval {
  bool on_edge = false;
  int64_t a = 0, b = 0;
};

EdgeIval edge_interval(const MultiPatchMesh& mesh, const Element& e, int edge) {
  const PatchHierMesh& pm = mesh.patch(e.patch);
  EdgeIval out;
  switch (edge) {
    case 0: out.on_edge = e.i2 == 0; break;
    case 1: out.on_edge = e.i1 == pm.cells(0, e.level) - 1; break;
    case 2: out.on_edge = e.i2 == pm.cells(1, e.level) - 1; break;
    default: out.on_edge = e.i1 == 0; break;
  }
  int64_t along = InterfaceTopology::edge_direction(edge) == 0 ? e.i1 : e.i2;
  out.a = along;
  out.b = along + 1;
  return out;
}

bool touches_corner(const MultiPatchMesh& mesh, const Element& e, int corner) {
  const PatchHierMesh& pm = mesh.patch(e.patch);
  bool at1 = (corner == 0 || corner == 3) ? e.i1 == 0 : e.i1 == pm.cells(0, e.level) - 1;
  bool at2 = (corner == 0 || corner == 1) ? e.i2 == 0 : e.i2 == pm.cells(1, e.level) - 1;
  return at1 && at2;
}

void classify_cross_patch(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                          std::vector<QuadTask>& out, int depth) {
  const InterfaceTopology& topo = mesh.topology();
  for (const Interface& itf : topo.interfaces) {
    int ea = -1, eb = -1;
    if (itf.patch_a == a.patch && itf.patch_b == b.patch) {
      ea = itf.edge_a;
      eb = itf.edge_b;
    } else if (itf.patch_b == a.patch && itf.patch_a == b.patch) {
      ea = itf.edge_b;
      eb = itf.edge_a;
    } else {
      continue;
    }
    EdgeIval ia = edge_interval(mesh, a, ea);
    EdgeIval ib = edge_interval(mesh, b, eb);
    if (!ia.on_edge || !ib.on_edge) continue;
    // map a's interval into b's edge coordinate
    int64_t total = static_cast<int64_t>(mesh.patch(a.patch).initial_spans(
                        InterfaceTopology::edge_direction(ea)))
                    << a.level;
    int64_t ma = itf.reversed ? total - ia.b : ia.a;
    int64_t mb = itf.reversed ? total - ia.a : ia.b;
    IvalOverlap o = overlap_1d(ma, mb, a.level, ib.a, ib.b, b.level);
    if (o.lo > o.hi) continue;
    if (o.hi > o.lo) {
      if (a.level == b.level) {
        QuadTask t;
        t.kind = PairKind::Edge;
        t.a = a;
        t.b = b;
        t.edge_a = ea;
        t.edge_b = eb;
        t.edge_rev = itf.reversed;
        out.push_back(t);
      } else {
        split_coarser(mesh, a, b, out, depth);
      }
      return;
    }
    // single shared point on the interface: corner of both along the edge.
    // a's end (its coordinate ia.b) maps to ma when reversed, mb otherwise.
    int K = std::max(a.level, b.level);
    bool a_at_end = o.lo == ((itf.reversed ? ma : mb) << (K - a.level));
    bool b_at_end = o.lo == (ib.b << (K - b.level));
    auto [sa, ea_corner] = InterfaceTopology::edge_corners(ea);
    auto [sb, eb_corner] = InterfaceTopology::edge_corners(eb);
    QuadTask t;
    t.kind = PairKind::Vertex;
    t.a = a;
    t.b = b;
    t.corner_a = a_at_end ? ea_corner : sa;
    t.corner_b = b_at_end ? eb_corner : sb;
    out.push_back(t);
    return;
  }
  // no interface contact: possibly a shared patch corner
  for (const auto& cls : topo.corner_classes) {
    int ca = -1, cb = -1;
    for (auto [p, c] : cls) {
      if (p == a.patch && touches_corner(mesh, a, c)) ca = c;
      if (p == b.patch && touches_corner(mesh, b, c)) cb = c;
    }
    if (ca >= 0 && cb >= 0) {
      QuadTask t;
      t.kind = PairKind::Vertex;
      t.a = a;
      t.b = b;
      t.corner_a = ca;
      t.corner_b = cb;
      out.push_back(t);
      return;
    }
  }
  out.push_back(QuadTask{PairKind::Disjoint, a, b});
}

void classify(const MultiPatchMesh& mesh, const Element& a, const Element& b,
              std::vector<QuadTask>& out, int depth) {
  if (depth > 8) throw std::logic_error("decompose_pair: unclassifiable adjacency");
  if (a.patch == b.patch) {
    if (a == b) {
      out.push_back(QuadTask{PairKind::Identical, a, b});
      return;
    }
    classify_same_patch(mesh, a, b, out, depth);
  } else {
    classify_cross_patch(mesh, a, b, out, depth);
  }
}

void split_coarser(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                   std::vector<QuadTask>& out, int depth) {
  const bool split_a = a.level < b.level;
  const Element& coarse = split_a ? a : b;
  const Element& fine = split_a ? b : a;
  for (int da = 0; da < 2; ++da) {
    for (int db = 0; db < 2; ++db) {
      Element child{coarse.patch, coarse.level + 1, 2 * coarse.i1 + da, 2 * coarse.i2 + db};
      if (split_a)
        classify(mesh, child, fine, out, depth + 1);
      else
        classify(mesh, fine, child, out, depth + 1);
    }
  }
}

}  // namespace

void decompose_pair(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                    std::vector<QuadTask>& out) {
  classify(mesh, a, b, out, 0);
}

void identical_panel_points(const QuadRule1D& g, const PointSink& sink) {
  const int n = g.order;
  for (int sign1 = 0; sign1 < 2; ++sign1) {
    for (int sign2 = 0; sign2 < 2; ++sign2) {
      double s1 = sign1 ? -1.0 : 1.0;
      double s2 = sign2 ? -1.0 : 1.0;
      for (int tri = 0; tri < 2; ++tri) {
        for (int iu = 0; iu < n; ++iu) {
          for (int iv = 0; iv < n; ++iv) {
            double u = g.nodes[iu];
            double v = g.nodes[iv];
            double z1 = tri == 0 ? u : u * v;
            double z2 = tri == 0 ? u * v : u;
            double jac = u * (1.0 - z1) * (1.0 - z2);
            if (jac == 0.0) continue;
            double zz1 = s1 * z1, zz2 = s2 * z2;
            double x0_1 = std::max(0.0, -zz1);
            double x0_2 = std::max(0.0, -zz2);
            for (int iw1 = 0; iw1 < n; ++iw1) {
              for (int iw2 = 0; iw2 < n; ++iw2) {
                double x1 = x0_1 + (1.0 - z1) * g.nodes[iw1];
                double x2 = x0_2 + (1.0 - z2) * g.nodes[iw2];
                double w = g.weights[iu] * g.weights[iv] * g.weights[iw1] * g.weights[iw2] * jac;
                sink(Vec2(x1, x2), Vec2(x1 + zz1, x2 + zz2), w);
              }
            }
          }
        }
      }
    }
  }
}

void common_edge_points(const QuadRule1D& g, const PointSink& sink) {
  // local coordinates (s, d): d = 0 is the shared edge; the singularity sits
  // at s_a = s_b, d_a = d_b = 0
  const int n = g.order;
  for (int sign = 0; sign < 2; ++sign) {
    double sig = sign ? -1.0 : 1.0;
    for (int pyr = 0; pyr < 3; ++pyr) {
      for (int iu = 0; iu < n; ++iu) {
        for (int iv1 = 0; iv1 < n; ++iv1) {
          for (int iv2 = 0; iv2 < n; ++iv2) {
            double u = g.nodes[iu], v1 = g.nodes[iv1], v2 = g.nodes[iv2];
            double s, da, db;
            if (pyr == 0) {
              s = u;
              da = u * v1;
              db = u * v2;
            } else if (pyr == 1) {
              s = u * v1;
              da = u;
              db = u * v2;
            } else {
              s = u * v1;
              da = u * v2;
              db = u;
            }
            double jac = u * u * (1.0 - s);
            if (jac == 0.0) continue;
            double x_lo = std::max(0.0, -sig * s);
            for (int iw = 0; iw < n; ++iw) {
              double x1 = x_lo + (1.0 - s) * g.nodes[iw];
              double w =
                  g.weights[iu] * g.weights[iv1] * g.weights[iv2] * g.weights[iw] * jac;
              sink(Vec2(x1, da), Vec2(x1 + sig * s, db), w);
            }
          }
        }
      }
    }
  }
}

void common_vertex_points(const QuadRule1D& g, const PointSink& sink) {
  // local coordinates with the shared vertex at the origin of both panels
  const int n = g.order;
  for (int pyr = 0; pyr < 4; ++pyr) {
    for (int iu = 0; iu < n; ++iu) {
      for (int iv1 = 0; iv1 < n; ++iv1) {
        for (int iv2 = 0; iv2 < n; ++iv2) {
          for (int iv3 = 0; iv3 < n; ++iv3) {
            double u = g.nodes[iu];
            double v[3] = {g.nodes[iv1], g.nodes[iv2], g.nodes[iv3]};
            double xi[4];
            int vi = 0;
            for (int k = 0; k < 4; ++k) xi[k] = (k == pyr) ? u : u * v[vi++];
            double w = g.weights[iu] * g.weights[iv1] * g.weights[iv2] * g.weights[iv3] * u * u * u;
            sink(Vec2(xi[0], xi[1]), Vec2(xi[2], xi[3]), w);
          }
        }
      }
    }
  }
}

}  // namespace igabem
