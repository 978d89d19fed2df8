#include "uvcloth/uv/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "uvcloth/error.hpp"
#include "uvcloth/geom/raster.hpp"

namespace uvcloth::uv {

using geom::BarycentricPoint;
using geom::Face;

namespace {

// Atlas values are stored in meters (normal distances and shifts stay well
// inside ±0.5); cylindrical values are absolute positions and get scaled.
double value_scale(const GarmentUV& guv) {
  return guv.case_tag == CaseTag::kCase1 ? 1.0 : guv.world_scale;
}

}  // namespace

GarmentUV assign_uv_case1(const TriMesh& garment, const body::BodyTemplate& tpl,
                          const geom::SurfaceIndex& body, const CodecConfig& cfg) {
  if (body.mesh().faces.size() != tpl.mesh.faces.size()) {
    throw DimensionError("correspondence body does not match the template");
  }
  GarmentUV guv;
  guv.case_tag = CaseTag::kCase1;
  guv.faces = garment.faces;
  guv.y0 = cfg.y0;
  guv.world_scale = cfg.world_scale;
  const std::size_t n = garment.vertices.size();
  guv.uv.resize(n);
  guv.anchors.resize(n);
  guv.chart.resize(n);
  std::size_t bad = 0;
  double worst_residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const geom::Correspondence c = geom::nearest_ray_correspondence(body, garment.vertices[i]);
    if (c.residual > cfg.rho || std::abs(c.normal_distance) > cfg.max_normal_distance) ++bad;
    worst_residual = std::max(worst_residual, c.residual);
    const body::AtlasPoint ap = body::body_uv_lookup(tpl, c.anchor);
    guv.anchors[i] = c;
    guv.uv[i] = ap.uv;
    guv.chart[i] = ap.chart;
  }
  if (static_cast<double>(bad) > cfg.max_bad_fraction * static_cast<double>(n)) {
    std::ostringstream msg;
    msg << bad << " of " << n << " vertices have no body normal ray within " << cfg.rho * 1000
        << " mm at |t| <= " << cfg.max_normal_distance
        << " m; the garment is not homotopic to the body surface, encode it as CASE2";
    throw NotEncodableError(msg.str());
  }
  return guv;
}

GarmentUV assign_uv_case2(const TriMesh& garment, double y0, double world_scale) {
  GarmentUV guv;
  guv.case_tag = CaseTag::kCase2;
  guv.faces = garment.faces;
  guv.y0 = y0;
  guv.world_scale = world_scale;
  const std::size_t n = garment.vertices.size();
  guv.uv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = garment.vertices[i] * world_scale;
    const double r = std::hypot(p.x(), p.z());
    const double theta = r > 0.0 ? std::atan2(p.z(), p.x()) : 0.0;
    const double rho = y0 - p.y();
    guv.uv[i] = Vec2(rho * std::cos(theta) + 0.5, rho * std::sin(theta) + 0.5);
  }

  // Injectivity: sweep in u order over a 1e-6 window.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return guv.uv[a].x() < guv.uv[b].x(); });
  constexpr double kTol = 1e-6;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const int i = order[a], j = order[b];
      if (guv.uv[j].x() - guv.uv[i].x() > kTol) break;
      if ((guv.uv[i] - guv.uv[j]).norm() <= kTol &&
          (garment.vertices[i] - garment.vertices[j]).norm() > 0.05) {
        throw DomainError("cylindrical uv is not injective: vertices " + std::to_string(i) +
                          " and " + std::to_string(j) + " share a uv but lie apart");
      }
    }
  }
  return guv;
}

VertexValues tpose_values(const TriMesh& garment, const GarmentUV& guv) {
  if (garment.vertices.size() != guv.vertex_count()) {
    throw DimensionError("garment vertex count does not match its uv record");
  }
  VertexValues out(guv.vertex_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (guv.case_tag == CaseTag::kCase1) {
      out[i] = Vec3(guv.anchors[i].normal_distance + 0.5, 0.0, 0.0);
    } else {
      out[i] = guv.world_scale * garment.vertices[i] + Vec3::Constant(0.5);
    }
  }
  return out;
}

VertexValues posed_values(const TriMesh& posed_garment, const GarmentUV& guv,
                          const TriMesh& posed_body) {
  if (posed_garment.vertices.size() != guv.vertex_count() ||
      posed_garment.faces != guv.faces) {
    throw DimensionError("posed garment does not share the encoded connectivity");
  }
  VertexValues out(guv.vertex_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Vec3 shift = posed_garment.vertices[i];
    if (guv.case_tag == CaseTag::kCase1) shift -= geom::point_on(posed_body, guv.anchors[i].anchor);
    out[i] = value_scale(guv) * shift + Vec3::Constant(0.5);
  }
  return out;
}

UVMap render_values(const GarmentUV& guv, const VertexValues& values, int channels, int R) {
  UVMap map(R, channels, guv.case_tag);
  for (const Face& f : guv.faces) {
    if (guv.case_tag == CaseTag::kCase1 &&
        (guv.chart[f[0]] != guv.chart[f[1]] || guv.chart[f[0]] != guv.chart[f[2]])) {
      continue;
    }
    geom::rasterize_triangle(R, guv.uv[f[0]], guv.uv[f[1]], guv.uv[f[2]],
                             [&](int x, int y, const Vec3& b) {
                               const Vec3 v = b[0] * values[f[0]] + b[1] * values[f[1]] +
                                              b[2] * values[f[2]];
                               for (int c = 0; c < channels; ++c) {
                                 map.at(c, x, y) = static_cast<float>(v[c]);
                               }
                               map.mask()[map.index(x, y)] = 1;
                             });
  }
  for (std::size_t i = 0; i < guv.uv.size(); ++i) {
    const auto [x, y] = texel_of(guv.uv[i], R);
    if (map.masked(x, y)) continue;
    for (int c = 0; c < channels; ++c) map.at(c, x, y) = static_cast<float>(values[i][c]);
    map.mask()[map.index(x, y)] = 1;
  }
  if (map.mask_count() == 0) throw DomainError("garment rasterizes to an empty mask");
  return map;
}

UVMap encode_tpose(const TriMesh& garment, const GarmentUV& guv, int R) {
  return render_values(guv, tpose_values(garment, guv), guv.channels(), R);
}

UVMap encode_posed(const TriMesh& posed_garment, const GarmentUV& guv, const TriMesh& posed_body,
                   const UVMap& t_map) {
  UVMap a = render_values(guv, posed_values(posed_garment, guv, posed_body), 3,
                          t_map.resolution());
  if (a.mask() != t_map.mask()) {
    throw DomainError("posed map mask differs from the T-pose map mask");
  }
  return a;
}

CoupledMaps::CoupledMaps(UVMap t_map, UVMap a_map) : t_(std::move(t_map)), a_(std::move(a_map)) {
  if (t_.resolution() != a_.resolution() || t_.case_tag() != a_.case_tag()) {
    throw DimensionError("coupled maps differ in resolution or case");
  }
  if (t_.mask() != a_.mask()) throw DomainError("coupled maps must share their mask");
}

namespace {

// Nearest masked texel by growing square rings; (-1, -1) for an empty mask.
std::pair<int, int> nearest_masked(const UVMap& map, int cx, int cy) {
  const int R = map.resolution();
  for (int radius = 1; radius < R; ++radius) {
    int best_x = -1, best_y = -1;
    long best = std::numeric_limits<long>::max();
    for (int y = std::max(0, cy - radius); y <= std::min(R - 1, cy + radius); ++y) {
      for (int x = std::max(0, cx - radius); x <= std::min(R - 1, cx + radius); ++x) {
        if (!map.masked(x, y)) continue;
        const long d = static_cast<long>(x - cx) * (x - cx) + static_cast<long>(y - cy) * (y - cy);
        if (d < best) {
          best = d;
          best_x = x;
          best_y = y;
        }
      }
    }
    if (best_x >= 0) return {best_x, best_y};
  }
  return {-1, -1};
}

}  // namespace

VertexValues sample_vertex_values(const UVMap& map, const GarmentUV& guv) {
  const int channels = map.channels();
  VertexValues out(guv.vertex_count(), Vec3::Constant(0.5));
  std::size_t stale = 0;
  float buf[3];
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!map.sample(guv.uv[i], std::span<float>(buf, channels))) {
      ++stale;
      const auto [tx, ty] = texel_of(guv.uv[i], map.resolution());
      const auto [x, y] = nearest_masked(map, tx, ty);
      if (x < 0) throw DomainError("cannot decode an empty mask");
      for (int c = 0; c < channels; ++c) buf[c] = map.at(c, x, y);
    }
    for (int c = 0; c < channels; ++c) out[i][c] = buf[c];
  }
  if (static_cast<double>(stale) > 0.01 * static_cast<double>(out.size())) {
    throw DomainError("stale correspondence: " + std::to_string(stale) + " of " +
                      std::to_string(out.size()) + " vertex uvs fall outside the map mask");
  }
  return out;
}

TriMesh decode_tpose_values(const VertexValues& values, const GarmentUV& guv,
                            const TriMesh& body) {
  TriMesh out;
  out.faces = guv.faces;
  out.vertices.resize(values.size());
  if (guv.case_tag == CaseTag::kCase1) {
    const auto normals = geom::vertex_normals(body).normals;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const BarycentricPoint& a = guv.anchors[i].anchor;
      out.vertices[i] =
          geom::reconstruct(body, normals, a, values[i][0] - 0.5);
    }
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.vertices[i] = (values[i] - Vec3::Constant(0.5)) / guv.world_scale;
    }
  }
  return out;
}

TriMesh decode_posed_values(const VertexValues& values, const GarmentUV& guv,
                            const TriMesh& posed_body) {
  TriMesh out;
  out.faces = guv.faces;
  out.vertices.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    Vec3 p = (values[i] - Vec3::Constant(0.5)) / value_scale(guv);
    if (guv.case_tag == CaseTag::kCase1) p += geom::point_on(posed_body, guv.anchors[i].anchor);
    out.vertices[i] = p;
  }
  return out;
}

TriMesh decode_template_carried(const UVMap& map, const GarmentUV& guv,
                                const body::BodyTemplate& tpl, const TriMesh* posed_body) {
  if (map.case_tag() != guv.case_tag) throw DimensionError("map and uv record differ in case");
  return decode_tpose_values(sample_vertex_values(map, guv), guv,
                             posed_body ? *posed_body : tpl.mesh);
}

TriMesh decode_posed(const UVMap& a_map, const GarmentUV& guv, const TriMesh& posed_body) {
  if (a_map.channels() != 3) throw DimensionError("posed maps carry three channels");
  return decode_posed_values(sample_vertex_values(a_map, guv), guv, posed_body);
}

GridDecode decode_template_free(const UVMap& map, MapKind kind, const body::BodyTemplate& tpl,
                                const body::AtlasLookup& lookup, const TriMesh& body,
                                double world_scale) {
  const int R = map.resolution();
  if (map.mask_count() == 0) throw DomainError("cannot decode an empty mask");
  const bool atlas = map.case_tag() == CaseTag::kCase1;
  if (atlas && lookup.resolution != R) {
    throw DimensionError("atlas lookup resolution does not match the map");
  }
  if (atlas && body.faces.size() != tpl.mesh.faces.size()) {
    throw DimensionError("decode body does not share the template connectivity");
  }
  std::vector<Vec3> normals;
  if (atlas && kind == MapKind::kTPose) normals = geom::vertex_normals(body).normals;

  GridDecode out;
  std::vector<int> vid(map.texel_count(), -1);
  for (int y = 0; y < R; ++y) {
    for (int x = 0; x < R; ++x) {
      if (!map.masked(x, y)) continue;
      const std::size_t idx = map.index(x, y);
      Vec3 p;
      if (atlas) {
        const BarycentricPoint& bp = lookup.texel[idx];
        if (bp.face < 0) {
          ++out.dropped;
          continue;
        }
        if (kind == MapKind::kTPose) {
          p = geom::reconstruct(body, normals, bp, map.at(0, x, y) - 0.5);
        } else {
          const Vec3 shift(map.at(0, x, y), map.at(1, x, y), map.at(2, x, y));
          p = geom::point_on(body, bp) + (shift - Vec3::Constant(0.5));
        }
      } else {
        const Vec3 v(map.at(0, x, y), map.at(1, x, y), map.at(2, x, y));
        p = (v - Vec3::Constant(0.5)) / world_scale;
      }
      vid[idx] = static_cast<int>(out.mesh.vertices.size());
      out.mesh.vertices.push_back(p);
      out.mesh.uv.emplace_back((x + 0.5) / R, (y + 0.5) / R);
    }
  }
  for (int y = 0; y + 1 < R; ++y) {
    for (int x = 0; x + 1 < R; ++x) {
      const int a = vid[map.index(x, y)], b = vid[map.index(x + 1, y)];
      const int c = vid[map.index(x + 1, y + 1)], d = vid[map.index(x, y + 1)];
      if (a < 0 || b < 0 || c < 0 || d < 0) continue;
      out.mesh.faces.push_back({a, b, c});
      out.mesh.faces.push_back({a, c, d});
    }
  }
  return out;
}

double texel_footprint(const TriMesh& garment, const GarmentUV& guv, int R) {
  std::vector<double> ratios;
  for (const auto& e : geom::unique_edges(garment)) {
    const int a = e[0], b = e[1];
    if (guv.case_tag == CaseTag::kCase1 && guv.chart[a] != guv.chart[b]) continue;
    const double duv = (guv.uv[a] - guv.uv[b]).norm();
    if (duv < 1e-12) continue;
    ratios.push_back((garment.vertices[a] - garment.vertices[b]).norm() / duv);
  }
  if (ratios.empty()) throw DomainError("garment has no edges with a uv extent");
  auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  return *mid / R;
}

// ---------------------------------------------------------------------------
// Bi-distance transform

namespace {

constexpr double kFar = std::numeric_limits<double>::infinity();

// Squared distance to the nearest site along one line (lower envelope of
// parabolas rooted at finite entries of f). Entries with no site stay kFar.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kFar) continue;
    while (k >= 0) {
      const int p = v[k];
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kFar;
      z[1] = kFar;
    }
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kFar);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = double(q) - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

// Squared Euclidean distance from every texel to the nearest texel with
// mask == site_value.
std::vector<double> squared_distance(const std::vector<std::uint8_t>& mask, int w, int h,
                                     std::uint8_t site_value) {
  std::vector<double> grid(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    grid[i] = (mask[i] != 0) == (site_value != 0) ? 0.0 : kFar;
  }
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // Columns, then rows.
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    envelope_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[static_cast<std::size_t>(y) * w + x];
    envelope_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[x];
  }
  return grid;
}

}  // namespace

BiDistanceMap bidistance_transform(const std::vector<std::uint8_t>& mask, int width, int height,
                                   double d_max) {
  if (width <= 0 || height <= 0 || mask.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionError("mask size does not match its dimensions");
  }
  if (!(d_max > 0)) throw DomainError("bi-distance cap must be positive");
  const std::vector<double> to_outside = squared_distance(mask, width, height, 0);
  const std::vector<double> to_inside = squared_distance(mask, width, height, 1);
  BiDistanceMap t;
  t.width = width;
  t.height = height;
  t.d_max = d_max;
  t.values.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    // Exactly one term is nonzero: inside texels are 0 away from the inside.
    if (mask[i]) {
      t.values[i] = std::min(std::sqrt(to_outside[i]), d_max);
    } else {
      t.values[i] = -std::min(std::sqrt(to_inside[i]), d_max);
    }
  }
  return t;
}

BiDistanceMap bidistance_transform(const UVMap& map, double d_max) {
  return bidistance_transform(map.mask(), map.resolution(), map.resolution(), d_max);
}

std::vector<std::uint8_t> recover_mask(const std::vector<double>& values) {
  std::vector<std::uint8_t> m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m[i] = values[i] > 0.0 ? 1 : 0;
  return m;
}

std::vector<std::uint8_t> recover_mask(const BiDistanceMap& t) { return recover_mask(t.values); }

UVMap to_uvmap(const BiDistanceMap& t) {
  if (t.width != t.height) throw DimensionError("UVMP maps are square");
  UVMap map(t.width, 1, CaseTag::kBiDistance);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    map.data()[i] = static_cast<float>(t.values[i]);
    map.mask()[i] = t.values[i] > 0.0 ? 1 : 0;
  }
  return map;
}

BiDistanceMap bidistance_from_uvmap(const UVMap& map, double d_max) {
  if (map.channels() != 1) throw DimensionError("bi-distance maps have one channel");
  BiDistanceMap t;
  t.width = t.height = map.resolution();
  t.d_max = d_max;
  t.values.assign(map.data().begin(), map.data().end());
  return t;
}

}  // namespace uvcloth::uv
