#include "uvcloth/geom/aabb_tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace uvcloth::geom {

// Region classification after Ericson, "Real-Time Collision Detection" 5.1.5.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                        const Vec3& c) {
  TrianglePoint r;
  auto finish = [&](const Vec3& bary, int feature) {
    r.bary = bary;
    r.point = bary[0] * a + bary[1] * b + bary[2] * c;
    r.distance_sq = (p - r.point).squaredNorm();
    r.feature = feature;
    return r;
  };
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(Vec3(1, 0, 0), 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(Vec3(0, 1, 0), 1);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(Vec3(1 - v, v, 0), 3);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(Vec3(0, 0, 1), 2);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(Vec3(1 - w, 0, w), 5);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(Vec3(0, 1 - w, w), 4);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return finish(Vec3(1 - v - w, v, w), 6);
}

namespace {

double box_distance_sq(const Box3& box, const Vec3& p) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double lo = box.min()[i] - p[i];
    const double hi = p[i] - box.max()[i];
    const double e = std::max({lo, hi, 0.0});
    d += e * e;
  }
  return d;
}

TrianglePoint face_closest(const TriMesh& mesh, int f, const Vec3& p) {
  const Face& t = mesh.faces[f];
  return closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                   mesh.vertices[t[2]]);
}

constexpr int kLeafSize = 4;

}  // namespace

AABBTree::AABBTree(const TriMesh& mesh) {
  std::vector<int> all(mesh.faces.size());
  std::iota(all.begin(), all.end(), 0);
  *this = AABBTree(mesh, all);
}

AABBTree::AABBTree(const TriMesh& mesh, std::span<const int> faces)
    : order_(faces.begin(), faces.end()) {
  if (order_.empty()) return;
  std::vector<Box3> boxes(mesh.faces.size());
  std::vector<Vec3> centers(mesh.faces.size());
  for (int f : order_) {
    Box3 b;
    b.setEmpty();
    for (int c : mesh.faces[f]) b.extend(mesh.vertices[c]);
    boxes[f] = b;
    centers[f] = b.center();
  }
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  build(mesh, boxes, centers, 0, static_cast<int>(order_.size()));
}

int AABBTree::build(const TriMesh& mesh, std::vector<Box3>& boxes, std::vector<Vec3>& centers,
                    int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Box3 box;
  box.setEmpty();
  for (int i = begin; i < end; ++i) box.extend(boxes[order_[i]]);
  nodes_[id].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  box.sizes().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int x, int y) {
                     if (centers[x][axis] != centers[y][axis])
                       return centers[x][axis] < centers[y][axis];
                     return x < y;
                   });
  const int left = build(mesh, boxes, centers, begin, mid);
  const int right = build(mesh, boxes, centers, mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

AABBTree::Hit AABBTree::closest(const TriMesh& mesh, const Vec3& p) const {
  Hit best;
  double best_d = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance_sq(n.box, p) > best_d) continue;
    if (n.is_leaf()) {
      for (int i = n.begin; i < n.end; ++i) {
        const int f = order_[i];
        TrianglePoint tp = face_closest(mesh, f, p);
        if (tp.distance_sq < best_d || (tp.distance_sq == best_d && f < best.face)) {
          best_d = tp.distance_sq;
          best.face = f;
          best.closest = tp;
        }
      }
    } else {
      const double dl = box_distance_sq(nodes_[n.left].box, p);
      const double dr = box_distance_sq(nodes_[n.right].box, p);
      // Visit the nearer child first.
      if (dl < dr) {
        stack.push_back(n.right);
        stack.push_back(n.left);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
  }
  return best;
}

std::vector<std::pair<double, int>> AABBTree::k_nearest(const TriMesh& mesh, const Vec3& p,
                                                        std::size_t k) const {
  std::vector<std::pair<double, int>> found;
  if (nodes_.empty() || k == 0) return found;
  // Max-heap of the current best k by (distance, face).
  std::priority_queue<std::pair<double, int>> heap;
  auto bound = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().first;
  };
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  open.emplace(box_distance_sq(nodes_[0].box, p), 0);
  while (!open.empty()) {
    const auto [d, id] = open.top();
    open.pop();
    if (d > bound()) break;
    const Node& n = nodes_[id];
    if (n.is_leaf()) {
      for (int i = n.begin; i < n.end; ++i) {
        const int f = order_[i];
        const Entry e(face_closest(mesh, f, p).distance_sq, f);
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
    } else {
      open.emplace(box_distance_sq(nodes_[n.left].box, p), n.left);
      open.emplace(box_distance_sq(nodes_[n.right].box, p), n.right);
    }
  }
  found.reserve(heap.size());
  while (!heap.empty()) {
    found.push_back(heap.top());
    heap.pop();
  }
  std::reverse(found.begin(), found.end());
  return found;
}

}  // namespace uvcloth::geom
