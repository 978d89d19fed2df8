#include "uvcloth/anim/collision.hpp"

#include <limits>
#include <vector>

namespace uvcloth::anim {

using geom::Vec3;

double clearance(const geom::SurfaceIndex& body, const Vec3& p) {
  return geom::signed_distance(body, p);
}

namespace {

// Points placed exactly at the margin may round to just below it.
constexpr double kSlack = 1e-9;

// Exit point for one vertex. Preferred: the cheapest per-shell exit (closest
// point + margin along the pseudo-normal) that clears every shell. In crevices
// where each such exit lands inside a neighbouring shell, march along the exit
// directions and their sum instead. Returns false when no shell is violated.
bool push_out(const geom::SurfaceIndex& body, Vec3& p, double margin) {
  std::vector<Vec3> exits;
  for (int s = 0; s < body.shell_count(); ++s) {
    const geom::SurfaceHit h = geom::closest_signed_in_shell(body, p, s);
    if (h.signed_distance < margin - kSlack) exits.push_back(h.closest + margin * h.pseudo_normal);
  }
  if (exits.empty()) return false;

  const auto clear = [&](const Vec3& q) { return clearance(body, q) >= margin - kSlack; };
  double best = std::numeric_limits<double>::infinity();
  Vec3 target = p;
  for (const Vec3& e : exits) {
    const double cost = (e - p).norm();
    if (cost < best && clear(e)) {
      best = cost;
      target = e;
    }
  }
  if (best < std::numeric_limits<double>::infinity()) {
    p = target;
    return true;
  }

  std::vector<Vec3> dirs;
  Vec3 sum = Vec3::Zero();
  for (const Vec3& e : exits) {
    const Vec3 d = e - p;
    if (d.norm() < 1e-12) continue;
    dirs.push_back(d.normalized());
    sum += dirs.back();
  }
  if (sum.norm() > 1e-12) dirs.push_back(sum.normalized());
  constexpr double kStep = 0.002;
  constexpr double kReach = 0.5;
  for (const Vec3& d : dirs) {
    for (double s = kStep; s < std::min(best, kReach); s += kStep) {
      if (!clear(p + s * d)) continue;
      double lo = s - kStep, hi = s;  // hi is clear
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (clear(p + mid * d) ? hi : lo) = mid;
      }
      if (hi < best) {
        best = hi;
        target = p + hi * d;
      }
      break;
    }
  }
  if (best == std::numeric_limits<double>::infinity()) return false;
  p = target;
  return true;
}

std::size_t count_violations(const geom::SurfaceIndex& body, const std::vector<Vec3>& v,
                             double margin) {
  std::size_t n = 0;
  for (const Vec3& p : v)
    if (clearance(body, p) < margin - kSlack) ++n;
  return n;
}

}  // namespace

CollisionResult resolve_collisions(const geom::TriMesh& garment, const geom::SurfaceIndex& body,
                                   double margin, int max_iterations) {
  CollisionResult best{garment, {}};
  best.report.violations = count_violations(body, garment.vertices, margin);
  if (best.report.violations == 0) return best;

  const auto neighbors = geom::vertex_neighbors(garment);
  std::vector<Vec3> cur = garment.vertices;
  std::vector<bool> ever_moved(cur.size(), false);
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<int> moved;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (push_out(body, cur[i], margin)) {
        moved.push_back(static_cast<int>(i));
        ever_moved[i] = true;
      }
    }
    // One relaxation pass over the moved vertices; rejected when it would
    // bring a vertex back within the margin.
    const std::vector<Vec3> snapshot = cur;
    for (int i : moved) {
      if (neighbors[i].empty()) continue;
      Vec3 mean = Vec3::Zero();
      for (int j : neighbors[i]) mean += snapshot[j];
      mean /= static_cast<double>(neighbors[i].size());
      const Vec3 relaxed = 0.5 * (snapshot[i] + mean);
      if (clearance(body, relaxed) >= margin - kSlack) cur[i] = relaxed;
    }
    const std::size_t violations = count_violations(body, cur, margin);
    if (violations <= best.report.violations) {
      best.mesh.vertices = cur;
      best.report.violations = violations;
    }
    best.report.iterations = it;
    if (violations == 0) break;
  }
  for (bool m : ever_moved) best.report.moved += m ? 1 : 0;
  return best;
}

}  // namespace uvcloth::anim
