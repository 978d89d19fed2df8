#pragma once

#include <array>
#include <vector>

#include "uvcloth/geom/aabb_tree.hpp"
#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::geom {

/// An immutable mesh bundled with the derived data every surface query needs:
/// an AABB tree over all faces, one tree per closed shell, smooth vertex
/// normals and angle-weighted pseudo-normals. Safe to share across threads.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(TriMesh mesh);

  const TriMesh& mesh() const { return mesh_; }
  const AABBTree& tree() const { return tree_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  std::size_t isolated_vertices() const { return isolated_; }

  /// True when every edge is shared by exactly two faces.
  bool is_closed() const { return closed_; }
  int shell_count() const { return static_cast<int>(shell_trees_.size()); }
  const AABBTree& shell_tree(int shell) const { return shell_trees_[shell]; }

  const Vec3& face_normal(int face) const { return face_normals_[face]; }
  /// Pseudo-normal of a closest-point feature as reported by
  /// closest_point_on_triangle.
  Vec3 pseudo_normal(int face, int feature) const;

 private:
  TriMesh mesh_;
  AABBTree tree_;
  std::vector<AABBTree> shell_trees_;
  std::vector<Vec3> normals_;
  std::size_t isolated_ = 0;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_pseudo_;
  std::vector<std::array<Vec3, 3>> edge_pseudo_;
  bool closed_ = false;
};

/// Body anchor of a garment point: the foot of the smooth-normal ray that
/// passes closest to it.
struct Correspondence {
  BarycentricPoint anchor;
  /// Signed ray parameter t of the foot (meters).
  double normal_distance = 0.0;
  /// Orthogonal distance of the query from the ray (meters).
  double residual = 0.0;
};

/// Minimizes the orthogonal distance from `query` to the ray q + t·n̂(q)
/// over q on a single face (projected Gauss-Newton on the 2-simplex, at most
/// 32 iterations with backtracking).
Correspondence ray_foot_on_face(const TriMesh& mesh, const std::vector<Vec3>& normals,
                                int face, const Vec3& query);

/// Weight of |t| in the selection score residual + w·|t|. The plain residual
/// has several exact minimizers for any point (every line through a tube axis
/// is a normal line); the score prefers the nearest foot.
inline constexpr double kFootDistanceWeight = 0.01;

/// Selection order over per-face results: smaller score first, then smaller
/// face id. Candidate search and exhaustive search both use it.
bool preferred(const Correspondence& a, const Correspondence& b);

/// Evaluates the `k` faces nearest to `query` and returns the preferred foot.
/// Throws DomainError on an empty mesh.
Correspondence nearest_ray_correspondence(const SurfaceIndex& body, const Vec3& query,
                                          int k = 16);

/// Reconstruct the point a correspondence describes: foot + t·n̂(foot).
Vec3 reconstruct(const TriMesh& body, const std::vector<Vec3>& normals,
                 const BarycentricPoint& anchor, double normal_distance);

struct SurfaceHit {
  double signed_distance = 0.0;
  Vec3 closest;
  Vec3 pseudo_normal;
  int face = -1;
};

/// Signed distance to the union of the closed shells of `body`: negative
/// inside, positive outside. Each shell is signed with the angle-weighted
/// pseudo-normal at its closest point; the union takes the minimum.
SurfaceHit closest_signed(const SurfaceIndex& body, const Vec3& query);
/// Signed distance to one closed shell of the body.
SurfaceHit closest_signed_in_shell(const SurfaceIndex& body, const Vec3& query, int shell);
double signed_distance(const SurfaceIndex& body, const Vec3& query);

}  // namespace uvcloth::geom
