#pragma once

#include <functional>
#include <vector>

#include "igabem/hier_mesh.hpp"
#include "igabem/linalg.hpp"

namespace igabem {

/// Orientation-preserving or -reversing symmetry of the unit square,
/// x' = c + M x with M entries in {0,+-1} and |det M| = 1.
struct LocalMap {
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1, c0 = 0, c1 = 0;
  Vec2 apply(double a, double b) const {
    return {c0 + m00 * a + m01 * b, c1 + m10 * a + m11 * b};
  }
};

LocalMap identity_map();
/// Maps (s, d) so that d = 0 traces the given edge with increasing (or
/// reversed) edge coordinate and d points into the square.
LocalMap edge_map(int edge, bool reversed);
/// Maps the origin to the given corner by reflections.
LocalMap corner_map(int corner);

/// Relative position of two panels for singular quadrature.
enum class PairKind { Identical, Edge, Vertex, Disjoint };

/// A conforming panel pair: cells (possibly virtual children of active
/// elements) whose intersection is empty, a full shared edge of both, or a
/// shared corner of both.
struct QuadTask {
  PairKind kind = PairKind::Disjoint;
  Element a, b;
  int edge_a = -1, edge_b = -1;
  bool edge_rev = false;
  int corner_a = -1, corner_b = -1;
};

/// Splits a pair of active elements into conforming tasks. Non-conforming
/// contact (partial edge overlap from a one-level gap) is resolved by
/// bisecting the coarser panel. Classification uses only mesh and
/// interface arithmetic, never point matching.
void decompose_pair(const MultiPatchMesh& mesh, const Element& a, const Element& b,
                    std::vector<QuadTask>& out);

/// Weighted 4D quadrature points of the regularizing coordinate transforms,
/// emitted as (xa, xb, w) with xa, xb in the local frames of the two panels
/// (identical: plain element coordinates; edge: edge-aligned coordinates;
/// vertex: corner-at-origin coordinates). Weights integrate the transformed
/// Jacobians so that summing w * F(xa, xb) approximates the double integral
/// over the unit squares.
using PointSink = std::function<void(const Vec2&, const Vec2&, double)>;
void identical_panel_points(const QuadRule1D& g, const PointSink& sink);
void common_edge_points(const QuadRule1D& g, const PointSink& sink);
void common_vertex_points(const QuadRule1D& g, const PointSink& sink);

}  // namespace igabem
