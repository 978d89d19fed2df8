#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace uvcloth::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Indexed triangle mesh. Positions are in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  /// Either empty or one entry per vertex.
  std::vector<Vec2> uv;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_uv() const { return !uv.empty(); }

  /// Throws DimensionError/DomainError when an invariant is broken:
  /// out-of-range or repeated face indices, non-finite coordinates, or a uv
  /// array of the wrong length.
  void validate() const;
};

/// A point on a mesh face given by barycentric weights of the face corners.
struct BarycentricPoint {
  int face = -1;
  Vec3 weights = Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
};

Vec3 face_normal_unnormalized(const TriMesh& mesh, int face);
double face_area(const TriMesh& mesh, int face);

/// Position of a barycentric point on `mesh`.
Vec3 point_on(const TriMesh& mesh, const BarycentricPoint& p);

/// Barycentric interpolation of per-vertex vectors, normalized. Used for the
/// smooth normal field n̂(q).
Vec3 interpolated_normal(const TriMesh& mesh, const std::vector<Vec3>& vertex_normals,
                         const BarycentricPoint& p);

struct VertexNormals {
  std::vector<Vec3> normals;
  /// Vertices referenced by no face (or only by zero-area faces); they get +z.
  std::size_t isolated_count = 0;
};

/// Area-weighted average of incident face normals, normalized.
VertexNormals vertex_normals(const TriMesh& mesh);

/// Number of connected components (by shared vertices) and the component id
/// of every face.
std::vector<int> face_components(const TriMesh& mesh, int* component_count = nullptr);

/// Unique undirected edges, each as (min, max).
std::vector<std::array<int, 2>> unique_edges(const TriMesh& mesh);

/// Vertex adjacency lists built from face edges.
std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh);

/// Mean per-vertex Euclidean distance between two meshes with index
/// correspondence, in millimeters.
double vertex_to_vertex_error(const TriMesh& a, const TriMesh& b);

}  // namespace uvcloth::geom
