#include "uvcloth/geom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Geometry>

#include "uvcloth/error.hpp"

namespace uvcloth::geom {

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (int c : t) {
      if (c < 0 || c >= n) {
        throw DimensionError("face " + std::to_string(f) + " references vertex " +
                             std::to_string(c) + " of " + std::to_string(n));
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw DomainError("face " + std::to_string(f) + " repeats a vertex index");
    }
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) {
      throw DomainError("vertex " + std::to_string(i) + " is not finite");
    }
  }
  if (!uv.empty() && uv.size() != vertices.size()) {
    throw DimensionError("uv count " + std::to_string(uv.size()) + " != vertex count " +
                         std::to_string(vertices.size()));
  }
}

Vec3 face_normal_unnormalized(const TriMesh& mesh, int face) {
  const Face& t = mesh.faces[face];
  const Vec3& a = mesh.vertices[t[0]];
  return (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
}

double face_area(const TriMesh& mesh, int face) {
  return 0.5 * face_normal_unnormalized(mesh, face).norm();
}

Vec3 point_on(const TriMesh& mesh, const BarycentricPoint& p) {
  const Face& t = mesh.faces[p.face];
  return p.weights[0] * mesh.vertices[t[0]] + p.weights[1] * mesh.vertices[t[1]] +
         p.weights[2] * mesh.vertices[t[2]];
}

Vec3 interpolated_normal(const TriMesh& mesh, const std::vector<Vec3>& vertex_normals,
                         const BarycentricPoint& p) {
  const Face& t = mesh.faces[p.face];
  Vec3 n = p.weights[0] * vertex_normals[t[0]] + p.weights[1] * vertex_normals[t[1]] +
           p.weights[2] * vertex_normals[t[2]];
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
}

VertexNormals vertex_normals(const TriMesh& mesh) {
  VertexNormals out;
  out.normals.assign(mesh.vertices.size(), Vec3::Zero());
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    // The cross product has length 2·area, so summing it is area weighting.
    const Vec3 n = face_normal_unnormalized(mesh, f);
    for (int c : mesh.faces[f]) out.normals[c] += n;
  }
  for (Vec3& n : out.normals) {
    const double len = n.norm();
    if (len > 1e-300) {
      n /= len;
    } else {
      n = Vec3(0.0, 0.0, 1.0);
      ++out.isolated_count;
    }
  }
  return out;
}

namespace {
int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}
}  // namespace

std::vector<int> face_components(const TriMesh& mesh, int* component_count) {
  std::vector<int> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (const Face& t : mesh.faces) {
    const int r0 = find_root(parent, t[0]);
    for (int c = 1; c < 3; ++c) {
      const int rc = find_root(parent, t[c]);
      if (rc != r0) parent[rc] = r0;
    }
  }
  std::vector<int> label(mesh.vertices.size(), -1);
  std::vector<int> out(mesh.faces.size());
  int count = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const int r = find_root(parent, mesh.faces[f][0]);
    if (label[r] < 0) label[r] = count++;
    out[f] = label[r];
  }
  if (component_count) *component_count = count;
  return out;
}

std::vector<std::array<int, 2>> unique_edges(const TriMesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& t : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertices.size());
  for (const auto& e : unique_edges(mesh)) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }
  return adj;
}

double vertex_to_vertex_error(const TriMesh& a, const TriMesh& b) {
  if (a.vertices.size() != b.vertices.size()) {
    throw DimensionError("vertex_to_vertex_error: " + std::to_string(a.vertices.size()) +
                         " vs " + std::to_string(b.vertices.size()) + " vertices");
  }
  if (a.vertices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    sum += (a.vertices[i] - b.vertices[i]).norm();
  }
  return 1000.0 * sum / static_cast<double>(a.vertices.size());
}

}  // namespace uvcloth::geom
