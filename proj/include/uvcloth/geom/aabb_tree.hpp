#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::geom {

using Box3 = Eigen::AlignedBox3d;

/// Result of projecting a point onto a single triangle.
struct TrianglePoint {
  Vec3 point;
  Vec3 bary;
  double distance_sq = 0.0;
  /// 0..2: corner, 3..5: edge (i, i+1 mod 3) with index 3 + i, 6: interior.
  int feature = 6;
};

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                        const Vec3& c);

/// Bounding-volume hierarchy over a subset of the faces of one mesh. The tree
/// stores only boxes and face ids; queries take the mesh it was built from.
class AABBTree {
 public:
  struct Node {
    Box3 box;
    int left = -1;   // child node ids, -1 for leaves
    int right = -1;
    int begin = 0;   // leaf range into face_order()
    int end = 0;
    bool is_leaf() const { return left < 0; }
  };

  AABBTree() = default;
  /// Builds over every face.
  explicit AABBTree(const TriMesh& mesh);
  /// Builds over the listed faces only.
  AABBTree(const TriMesh& mesh, std::span<const int> faces);

  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return order_; }

  struct Hit {
    int face = -1;
    TrianglePoint closest;
  };
  /// Closest face to `p`; ties go to the lower face id.
  Hit closest(const TriMesh& mesh, const Vec3& p) const;

  /// The `k` faces with the smallest closest-point distance to `p`, sorted by
  /// (distance, face id).
  std::vector<std::pair<double, int>> k_nearest(const TriMesh& mesh, const Vec3& p,
                                                std::size_t k) const;

 private:
  int build(const TriMesh& mesh, std::vector<Box3>& boxes, std::vector<Vec3>& centers,
            int begin, int end);

  std::vector<Node> nodes_;
  std::vector<int> order_;
};

}  // namespace uvcloth::geom
