#pragma once

#include <vector>

namespace igabem {

/// Patch edges are numbered 0: t2=0, 1: t1=1, 2: t2=1, 3: t1=0.
/// The edge coordinate runs along the free parameter in increasing
/// direction. Corners are numbered 0:(0,0), 1:(1,0), 2:(1,1), 3:(0,1).
struct PatchEdge {
  int patch = 0;
  int edge = 0;
  bool operator==(const PatchEdge&) const = default;
};

/// Gluing data between patch edges: edge coordinate s on (patch_a, edge_a)
/// matches (reversed ? 1-s : s) on (patch_b, edge_b).
struct Interface {
  int patch_a = 0;
  int edge_a = 0;
  int patch_b = 0;
  int edge_b = 0;
  bool reversed = false;
};

/// Interface topology of a multi-patch boundary. Corner classes group
/// coinciding patch corners (pairs of patch index and corner index),
/// including corners identified only through a chain of interfaces.
struct InterfaceTopology {
  int num_patches = 0;
  std::vector<Interface> interfaces;
  std::vector<std::vector<std::pair<int, int>>> corner_classes;

  /// (start corner, end corner) of an edge in its coordinate direction.
  static std::pair<int, int> edge_corners(int edge) {
    switch (edge) {
      case 0: return {0, 1};
      case 1: return {1, 2};
      case 2: return {3, 2};
      default: return {0, 3};
    }
  }
  /// Direction (0 or 1) of the free coordinate along an edge.
  static int edge_direction(int edge) { return (edge == 0 || edge == 2) ? 0 : 1; }

  bool operator==(const InterfaceTopology& other) const;
};

}  // namespace igabem
