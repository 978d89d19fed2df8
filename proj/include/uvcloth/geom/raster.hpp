#pragma once

#include <algorithm>
#include <cmath>

#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::geom {

namespace detail {

// Edge function evaluated with a canonical endpoint order so that the two
// triangles sharing an edge see exactly negated values.
inline double edge_value(const Vec2& a, const Vec2& b, double px, double py) {
  const bool swap = (b.x() < a.x()) || (b.x() == a.x() && b.y() < a.y());
  const Vec2& p0 = swap ? b : a;
  const Vec2& p1 = swap ? a : b;
  const double v = (p1.x() - p0.x()) * (py - p0.y()) - (p1.y() - p0.y()) * (px - p0.x());
  return swap ? -v : v;
}

inline bool top_left(const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

}  // namespace detail

/// Visits every texel of an R×R grid whose center lies inside the triangle
/// with the given uv corners. Texel (ix, iy) has center ((ix+0.5)/R,
/// (iy+0.5)/R). Centers on a shared edge belong to exactly one of the two
/// triangles (top-left rule), so a non-overlapping triangulation covers each
/// texel at most once. `fn(ix, iy, bary)` receives barycentric weights of the
/// texel center.
template <typename Fn>
void rasterize_triangle(int R, const Vec2& uv0, const Vec2& uv1, const Vec2& uv2, Fn&& fn) {
  Vec2 p[3] = {uv0 * R, uv1 * R, uv2 * R};
  const double area = detail::edge_value(p[0], p[1], p[2].x(), p[2].y());
  if (!(std::abs(area) > 0.0) || !std::isfinite(area)) return;
  int order[3] = {0, 1, 2};
  if (area < 0) std::swap(order[1], order[2]);
  const Vec2 a = p[order[0]], b = p[order[1]], c = p[order[2]];
  const double inv_area = 1.0 / std::abs(area);
  const bool tl_bc = detail::top_left(b, c);
  const bool tl_ca = detail::top_left(c, a);
  const bool tl_ab = detail::top_left(a, b);

  const double min_x = std::min({a.x(), b.x(), c.x()});
  const double max_x = std::max({a.x(), b.x(), c.x()});
  const double min_y = std::min({a.y(), b.y(), c.y()});
  const double max_y = std::max({a.y(), b.y(), c.y()});
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(R - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(R - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  for (int iy = y0; iy <= y1; ++iy) {
    const double py = iy + 0.5;
    for (int ix = x0; ix <= x1; ++ix) {
      const double px = ix + 0.5;
      const double w0 = detail::edge_value(b, c, px, py);
      const double w1 = detail::edge_value(c, a, px, py);
      const double w2 = detail::edge_value(a, b, px, py);
      if (w0 < 0 || w1 < 0 || w2 < 0) continue;
      if ((w0 == 0 && !tl_bc) || (w1 == 0 && !tl_ca) || (w2 == 0 && !tl_ab)) continue;
      Vec3 bary_sorted(w0 * inv_area, w1 * inv_area, w2 * inv_area);
      Vec3 bary;
      bary[order[0]] = bary_sorted[0];
      bary[order[1]] = bary_sorted[1];
      bary[order[2]] = bary_sorted[2];
      fn(ix, iy, bary);
    }
  }
}

}  // namespace uvcloth::geom
