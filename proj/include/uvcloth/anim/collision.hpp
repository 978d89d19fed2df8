#pragma once

#include "uvcloth/geom/surface.hpp"

namespace uvcloth::anim {

struct CollisionReport {
  int iterations = 0;
  /// Vertices still closer than the margin (or inside) after the last pass.
  std::size_t violations = 0;
  std::size_t moved = 0;
  bool converged() const { return violations == 0; }
};

struct CollisionResult {
  geom::TriMesh mesh;
  CollisionReport report;
};

/// Pushes every vertex closer than `margin` to (or inside) a body shell out to
/// the nearest point that clears all shells by the margin, then relaxes moved vertices
/// with one Laplacian pass that never re-violates the margin. Repeats up to
/// `max_iterations` times; the returned mesh is the iterate with the fewest
/// violations.
CollisionResult resolve_collisions(const geom::TriMesh& garment, const geom::SurfaceIndex& body,
                                   double margin = 0.003, int max_iterations = 10);

/// Smallest signed distance over the body shells (the union's signed distance).
double clearance(const geom::SurfaceIndex& body, const geom::Vec3& p);

}  // namespace uvcloth::anim
