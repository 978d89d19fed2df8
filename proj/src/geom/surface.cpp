#include "uvcloth/geom/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "uvcloth/error.hpp"

namespace uvcloth::geom {

SurfaceIndex::SurfaceIndex(TriMesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  tree_ = AABBTree(mesh_);
  VertexNormals vn = vertex_normals(mesh_);
  normals_ = std::move(vn.normals);
  isolated_ = vn.isolated_count;

  const int nf = static_cast<int>(mesh_.faces.size());
  face_normals_.resize(nf);
  vertex_pseudo_.assign(mesh_.vertices.size(), Vec3::Zero());
  std::map<std::pair<int, int>, std::pair<Vec3, int>> edge_sum;
  for (int f = 0; f < nf; ++f) {
    const Face& t = mesh_.faces[f];
    Vec3 n = face_normal_unnormalized(mesh_, f);
    const double len = n.norm();
    n = len > 0 ? Vec3(n / len) : Vec3::Zero();
    face_normals_[f] = n;
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = mesh_.vertices[t[i]];
      const Vec3 e1 = (mesh_.vertices[t[(i + 1) % 3]] - p).normalized();
      const Vec3 e2 = (mesh_.vertices[t[(i + 2) % 3]] - p).normalized();
      const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
      vertex_pseudo_[t[i]] += angle * n;
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      auto& slot =
          edge_sum.try_emplace({std::min(a, b), std::max(a, b)}, Vec3::Zero(), 0).first->second;
      slot.first += n;
      slot.second += 1;
    }
  }
  closed_ = !edge_sum.empty();
  for (const auto& [key, val] : edge_sum) {
    if (val.second != 2) {
      closed_ = false;
      break;
    }
  }
  edge_pseudo_.resize(nf);
  for (int f = 0; f < nf; ++f) {
    const Face& t = mesh_.faces[f];
    for (int i = 0; i < 3; ++i) {
      const int a = t[i];
      const int b = t[(i + 1) % 3];
      edge_pseudo_[f][i] = edge_sum[{std::min(a, b), std::max(a, b)}].first;
    }
  }

  int shells = 0;
  const std::vector<int> comp = face_components(mesh_, &shells);
  std::vector<std::vector<int>> shell_faces(shells);
  for (int f = 0; f < nf; ++f) shell_faces[comp[f]].push_back(f);
  shell_trees_.reserve(shells);
  for (const auto& faces : shell_faces) shell_trees_.emplace_back(mesh_, faces);
}

Vec3 SurfaceIndex::pseudo_normal(int face, int feature) const {
  if (feature < 3) return vertex_pseudo_[mesh_.faces[face][feature]];
  if (feature < 6) return edge_pseudo_[face][feature - 3];
  return face_normals_[face];
}

namespace {

// Euclidean projection of (a, b) onto {a >= 0, b >= 0, a + b <= 1}.
Vec2 project_to_simplex(const Vec2& x) {
  double a = x.x();
  double b = x.y();
  if (a >= 0 && b >= 0 && a + b <= 1) return x;
  // Candidate: projection onto the hypotenuse a + b = 1.
  auto on_hyp = [](double a0, double b0) {
    const double s = (a0 + b0 - 1.0) * 0.5;
    double pa = std::clamp(a0 - s, 0.0, 1.0);
    return Vec2(pa, 1.0 - pa);
  };
  Vec2 best(std::clamp(a, 0.0, 1.0), 0.0);
  double best_d = (best - x).squaredNorm();
  const Vec2 cands[] = {Vec2(0.0, std::clamp(b, 0.0, 1.0)), on_hyp(a, b)};
  for (const Vec2& c : cands) {
    const double d = (c - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct FootState {
  Vec3 r;          // orthogonal residual vector
  double t = 0.0;  // ray parameter
  Vec3 n_hat;
  double n_len = 0.0;
  Vec3 d;
};

FootState evaluate(const Vec3 p[3], const Vec3 nv[3], const Vec2& x, const Vec3& q) {
  const double w0 = 1.0 - x.x() - x.y();
  const Vec3 pos = w0 * p[0] + x.x() * p[1] + x.y() * p[2];
  const Vec3 n = w0 * nv[0] + x.x() * nv[1] + x.y() * nv[2];
  FootState s;
  s.n_len = n.norm();
  s.n_hat = s.n_len > 0 ? Vec3(n / s.n_len) : Vec3(0, 0, 1);
  s.d = q - pos;
  s.t = s.d.dot(s.n_hat);
  s.r = s.d - s.t * s.n_hat;
  return s;
}

}  // namespace

Correspondence ray_foot_on_face(const TriMesh& mesh, const std::vector<Vec3>& normals,
                                int face, const Vec3& query) {
  const Face& tri = mesh.faces[face];
  const Vec3 p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
  const Vec3 nv[3] = {normals[tri[0]], normals[tri[1]], normals[tri[2]]};

  const TrianglePoint cp = closest_point_on_triangle(query, p[0], p[1], p[2]);
  Vec2 x(cp.bary[1], cp.bary[2]);
  FootState s = evaluate(p, nv, x, query);
  double f = s.r.squaredNorm();

  const Vec3 dp_a = p[1] - p[0];
  const Vec3 dp_b = p[2] - p[0];
  const Vec3 dn_a = nv[1] - nv[0];
  const Vec3 dn_b = nv[2] - nv[0];

  constexpr int kMaxIterations = 32;
  for (int it = 0; it < kMaxIterations && f > 1e-32; ++it) {
    Eigen::Matrix<double, 3, 2> J;
    const Vec3 dps[2] = {dp_a, dp_b};
    const Vec3 dns[2] = {dn_a, dn_b};
    for (int k = 0; k < 2; ++k) {
      const Vec3 dd = -dps[k];
      const Vec3 dnh = (dns[k] - s.n_hat * s.n_hat.dot(dns[k])) / s.n_len;
      const double dt = dd.dot(s.n_hat) + s.d.dot(dnh);
      J.col(k) = dd - dt * s.n_hat - s.t * dnh;
    }
    const Eigen::Matrix2d H = J.transpose() * J;
    const Vec2 g = J.transpose() * s.r;
    const double damping = 1e-12 * (H.trace() + 1e-30);
    const Vec2 step_gn = -(H + damping * Eigen::Matrix2d::Identity()).ldlt().solve(g);

    bool moved = false;
    const Vec2 directions[2] = {step_gn, -g * (1.0 / std::max(H.norm(), 1e-30))};
    for (const Vec2& dir : directions) {
      if (!dir.allFinite()) continue;
      double alpha = 1.0;
      for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
        const Vec2 cand = project_to_simplex(x + alpha * dir);
        if ((cand - x).squaredNorm() == 0.0) break;
        FootState sc = evaluate(p, nv, cand, query);
        const double fc = sc.r.squaredNorm();
        if (fc < f) {
          x = cand;
          s = sc;
          f = fc;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) break;
  }

  Correspondence c;
  c.anchor.face = face;
  c.anchor.weights = Vec3(1.0 - x.x() - x.y(), x.x(), x.y());
  c.normal_distance = s.t;
  c.residual = std::sqrt(f);
  return c;
}

bool preferred(const Correspondence& a, const Correspondence& b) {
  const double sa = a.residual + kFootDistanceWeight * std::abs(a.normal_distance);
  const double sb = b.residual + kFootDistanceWeight * std::abs(b.normal_distance);
  if (sa != sb) return sa < sb;
  return a.anchor.face < b.anchor.face;
}

Correspondence nearest_ray_correspondence(const SurfaceIndex& body, const Vec3& query, int k) {
  if (body.mesh().faces.empty()) throw DomainError("ray correspondence on an empty mesh");
  if (k < 1) k = 1;
  const auto candidates = body.tree().k_nearest(body.mesh(), query, static_cast<std::size_t>(k));
  Correspondence best;
  bool have = false;
  for (const auto& [d2, f] : candidates) {
    Correspondence c = ray_foot_on_face(body.mesh(), body.normals(), f, query);
    if (!have || preferred(c, best)) {
      best = c;
      have = true;
    }
  }
  return best;
}

Vec3 reconstruct(const TriMesh& body, const std::vector<Vec3>& normals,
                 const BarycentricPoint& anchor, double normal_distance) {
  return point_on(body, anchor) + normal_distance * interpolated_normal(body, normals, anchor);
}

SurfaceHit closest_signed_in_shell(const SurfaceIndex& body, const Vec3& query, int shell) {
  const AABBTree::Hit hit = body.shell_tree(shell).closest(body.mesh(), query);
  const Vec3 pn = body.pseudo_normal(hit.face, hit.closest.feature);
  const double dist = std::sqrt(hit.closest.distance_sq);
  SurfaceHit out;
  out.signed_distance = (query - hit.closest.point).dot(pn) < 0 ? -dist : dist;
  out.closest = hit.closest.point;
  out.pseudo_normal = pn.normalized();
  out.face = hit.face;
  return out;
}

SurfaceHit closest_signed(const SurfaceIndex& body, const Vec3& query) {
  if (body.mesh().faces.empty()) throw DomainError("signed distance to an empty mesh");
  SurfaceHit best;
  best.signed_distance = std::numeric_limits<double>::infinity();
  for (int s = 0; s < body.shell_count(); ++s) {
    const SurfaceHit h = closest_signed_in_shell(body, query, s);
    if (h.signed_distance < best.signed_distance) best = h;
  }
  return best;
}

double signed_distance(const SurfaceIndex& body, const Vec3& query) {
  return closest_signed(body, query).signed_distance;
}

}  // namespace uvcloth::geom
