#include "uvcloth/body/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Geometry>

#include "uvcloth/error.hpp"
#include "uvcloth/geom/raster.hpp"

namespace uvcloth::body {

using geom::Face;
using geom::TriMesh;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

SegmentConfig segment(std::string name, int parent, Vec3 offset, Vec3 dir, double length,
                      double radius, int rings, int sides) {
  SegmentConfig s;
  s.name = std::move(name);
  s.parent = parent;
  s.offset = offset;
  s.direction = dir;
  s.length = length;
  s.radius = radius;
  s.rings = rings;
  s.sides = sides;
  return s;
}

}  // namespace

BodyConfig BodyConfig::standard() {
  BodyConfig c;
  const Vec3 up = Vec3::UnitY();
  const Vec3 left = Vec3::UnitX();
  c.segments = {
      segment("torso", -1, Vec3::Zero(), up, 0.50, 0.14, 10, 24),
      segment("head", 0, Vec3(0, 0.74, 0), up, 0.10, 0.09, 3, 16),
      segment("upper_arm_l", 0, Vec3(0.24, 0.44, 0), left, 0.28, 0.05, 6, 16),
      segment("lower_arm_l", 2, Vec3(0.28, 0, 0), left, 0.25, 0.04, 6, 16),
      segment("upper_arm_r", 0, Vec3(-0.24, 0.44, 0), -left, 0.28, 0.05, 6, 16),
      segment("lower_arm_r", 4, Vec3(-0.28, 0, 0), -left, 0.25, 0.04, 6, 16),
      segment("upper_leg_l", 0, Vec3(0.10, -0.12, 0), -up, 0.42, 0.065, 8, 16),
      segment("lower_leg_l", 6, Vec3(0, -0.42, 0), -up, 0.40, 0.05, 8, 16),
      segment("upper_leg_r", 0, Vec3(-0.10, -0.12, 0), -up, 0.42, 0.065, 8, 16),
      segment("lower_leg_r", 8, Vec3(0, -0.42, 0), -up, 0.40, 0.05, 8, 16),
  };
  return c;
}

int BodyConfig::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DomainError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

BodyConfig body_config_from_json(const json& j) {
  const BodyConfig standard = BodyConfig::standard();
  BodyConfig c;
  c.cap_rings = j.value("cap_rings", c.cap_rings);
  c.blend_half_width = j.value("blend_half_width", c.blend_half_width);
  if (!j.contains("segments") || !j["segments"].is_array()) {
    throw DomainError("body config needs a 'segments' array");
  }
  for (const json& sj : j["segments"]) {
    SegmentConfig s;
    s.name = sj.at("name").get<std::string>();
    const int std_idx = standard.index_of(s.name);
    if (std_idx >= 0) s = standard.segments[std_idx];
    if (sj.contains("parent") && !sj["parent"].is_null()) {
      const std::string parent = sj["parent"].get<std::string>();
      s.parent = c.index_of(parent);
      if (s.parent < 0) {
        throw DomainError("segment '" + s.name + "' names unknown or later parent '" + parent +
                          "'");
      }
    } else {
      s.parent = -1;
    }
    if (sj.contains("offset")) s.offset = vec3_from(sj["offset"]);
    if (sj.contains("direction")) s.direction = vec3_from(sj["direction"]).normalized();
    s.length = sj.value("length", s.length);
    s.radius = sj.value("radius", s.radius);
    s.rings = sj.value("rings", s.rings);
    s.sides = sj.value("sides", s.sides);
    if (std_idx < 0 && (!sj.contains("offset") || !sj.contains("direction"))) {
      throw DomainError("segment '" + s.name + "' needs offset and direction");
    }
    c.segments.push_back(s);
  }
  return c;
}

json body_config_to_json(const BodyConfig& c) {
  json segs = json::array();
  for (const SegmentConfig& s : c.segments) {
    json sj;
    sj["name"] = s.name;
    sj["parent"] = s.parent >= 0 ? json(c.segments[s.parent].name) : json(nullptr);
    sj["offset"] = vec3_to(s.offset);
    sj["direction"] = vec3_to(s.direction);
    sj["length"] = s.length;
    sj["radius"] = s.radius;
    sj["rings"] = s.rings;
    sj["sides"] = s.sides;
    segs.push_back(sj);
  }
  return json{{"segments", segs}, {"cap_rings", c.cap_rings},
              {"blend_half_width", c.blend_half_width}};
}

BodyConfig load_body_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open body config " + path.string());
  try {
    return body_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DomainError("body config " + path.string() + ": " + e.what());
  }
}

BodyState BodyState::identity(int joint_count) {
  BodyState s;
  s.beta.assign(2 * static_cast<std::size_t>(joint_count), 1.0);
  s.theta.assign(joint_count, Vec3::Zero());
  return s;
}

void BodyState::validate(int joint_count) const {
  if (beta.size() != 2 * static_cast<std::size_t>(joint_count) ||
      theta.size() != static_cast<std::size_t>(joint_count)) {
    throw DimensionError("body state expects " + std::to_string(2 * joint_count) + " beta and " +
                         std::to_string(joint_count) + " theta entries, got " +
                         std::to_string(beta.size()) + " and " + std::to_string(theta.size()));
  }
  for (double b : beta) {
    if (!(b >= 0.5 && b <= 2.0)) throw DomainError("beta entries must lie in [0.5, 2]");
  }
  for (const Vec3& t : theta) {
    if (!t.allFinite()) throw DomainError("non-finite joint rotation");
  }
}

json body_state_to_json(const BodyState& s) {
  json th = json::array();
  for (const Vec3& t : s.theta) th.push_back(vec3_to(t));
  return json{{"beta", s.beta}, {"theta", th}};
}

BodyState body_state_from_json(const json& j) {
  BodyState s;
  s.beta = j.at("beta").get<std::vector<double>>();
  for (const json& t : j.at("theta")) s.theta.push_back(vec3_from(t));
  return s;
}

// ---------------------------------------------------------------------------
// Geometry

namespace {

void validate_config(const BodyConfig& c) {
  if (c.segments.empty()) throw DomainError("body config has no segments");
  int roots = 0;
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    const SegmentConfig& s = c.segments[i];
    if (s.parent < 0) ++roots;
    if (s.parent >= static_cast<int>(i)) {
      throw DomainError("segment '" + s.name + "' must come after its parent");
    }
    if (s.rings < 3) {
      throw DomainError("segment '" + s.name + "' has " + std::to_string(s.rings) +
                        " rings; at least 3 are required");
    }
    if (s.sides < 3) throw DomainError("segment '" + s.name + "' needs at least 3 sides");
    if (!(s.length > 0) || !(s.radius > 0)) {
      throw DomainError("segment '" + s.name + "' needs positive length and radius");
    }
  }
  if (roots != 1) throw DomainError("body config must have exactly one root segment");
  if (c.cap_rings < 2) throw DomainError("cap_rings must be at least 2");
  if (static_cast<int>(c.segments.size()) > kChartGrid * kChartGrid) {
    throw DomainError("atlas holds at most 16 segments");
  }
}

// Child continues the parent's tube when it starts at the parent's end and
// points the same way.
bool continues(const SegmentConfig& parent, const SegmentConfig& child) {
  return (child.offset - parent.direction * parent.length).norm() < 1e-9 &&
         child.direction.dot(parent.direction) > 1.0 - 1e-9 && child.sides == parent.sides;
}

std::vector<std::vector<int>> find_chains(const BodyConfig& c) {
  const int n = static_cast<int>(c.segments.size());
  std::vector<int> next(n, -1);
  std::vector<bool> has_prev(n, false);
  for (int i = 0; i < n; ++i) {
    const int p = c.segments[i].parent;
    if (p >= 0 && next[p] < 0 && continues(c.segments[p], c.segments[i])) {
      next[p] = i;
      has_prev[i] = true;
    }
  }
  std::vector<std::vector<int>> chains;
  for (int i = 0; i < n; ++i) {
    if (has_prev[i]) continue;
    std::vector<int> chain;
    for (int s = i; s >= 0; s = next[s]) chain.push_back(s);
    chains.push_back(chain);
  }
  return chains;
}

// Joint rest positions; child offsets are split into a part along the parent
// direction (scaled by the parent's length factor) and a radial remainder
// (scaled by the parent's radius factor).
std::vector<Vec3> rest_joints(const BodyConfig& c, const std::vector<double>* beta) {
  std::vector<Vec3> pos(c.segments.size());
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    const SegmentConfig& s = c.segments[i];
    if (s.parent < 0) {
      pos[i] = s.offset;
      continue;
    }
    const SegmentConfig& p = c.segments[s.parent];
    Vec3 off = s.offset;
    if (beta) {
      const Vec3 axial = p.direction * p.direction.dot(s.offset);
      const Vec3 radial = s.offset - axial;
      off = axial * (*beta)[2 * s.parent] + radial * (*beta)[2 * s.parent + 1];
    }
    pos[i] = pos[s.parent] + off;
  }
  return pos;
}

void tube_frame(const Vec3& d, Vec3& a, Vec3& b) {
  const Vec3 ref = std::abs(d.dot(Vec3::UnitY())) < 0.9 ? Vec3::UnitY() : Vec3::UnitZ();
  a = (ref - d * d.dot(ref)).normalized();
  b = d.cross(a);
}

struct Geometry {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Tube> tubes;
  std::vector<int> vertex_ring_owner;
  std::vector<double> vertex_axial;
  std::vector<int> vertex_tube;
};

// Builds vertex positions and faces for the given (possibly beta-scaled)
// lengths and radii. Connectivity depends only on the chains and counts.
Geometry build_geometry(const BodyConfig& c, const std::vector<std::vector<int>>& chains,
                        const std::vector<Vec3>& joints, const std::vector<double>& lengths,
                        const std::vector<double>& radii) {
  Geometry g;
  for (const auto& chain : chains) {
    Tube tube;
    tube.segments = chain;
    const SegmentConfig& first = c.segments[chain.front()];
    tube.sides = first.sides;
    tube.axis = first.direction.normalized();
    tube_frame(tube.axis, tube.frame_a, tube.frame_b);
    tube.origin = joints[chain.front()];
    const int sides = tube.sides;

    // Ring profile: (axial, radius, owner).
    struct Profile {
      double axial, radius;
      int owner;
    };
    std::vector<Profile> prof;
    const double r0 = radii[chain.front()];
    prof.push_back({-r0, 0.0, chain.front()});
    for (int k = 1; k < c.cap_rings; ++k) {
      const double psi = 0.5 * kPi * (1.0 - static_cast<double>(k) / c.cap_rings);
      prof.push_back({-r0 * std::sin(psi), r0 * std::cos(psi), chain.front()});
    }
    double start = 0.0;
    for (std::size_t ci = 0; ci < chain.size(); ++ci) {
      const int s = chain[ci];
      const int rings = c.segments[s].rings;
      for (int k = (ci == 0 ? 0 : 1); k <= rings; ++k) {
        prof.push_back({start + lengths[s] * k / rings, radii[s], s});
      }
      start += lengths[s];
    }
    const int last = chain.back();
    const double rn = radii[last];
    for (int k = 1; k < c.cap_rings; ++k) {
      const double psi = 0.5 * kPi * static_cast<double>(k) / c.cap_rings;
      prof.push_back({start + rn * std::sin(psi), rn * std::cos(psi), last});
    }
    prof.push_back({start + rn, 0.0, last});

    const int tube_id = static_cast<int>(g.tubes.size());
    double arc = 0.0;
    for (std::size_t i = 0; i < prof.size(); ++i) {
      if (i > 0) {
        arc += std::hypot(prof[i].axial - prof[i - 1].axial, prof[i].radius - prof[i - 1].radius);
      }
      Ring ring;
      ring.first_vertex = static_cast<int>(g.vertices.size());
      ring.axial = prof[i].axial;
      ring.radius = prof[i].radius;
      ring.arc = arc;
      ring.segment = prof[i].owner;
      const bool pole = (i == 0 || i + 1 == prof.size());
      ring.count = pole ? 1 : sides;
      const Vec3 center = tube.origin + tube.axis * ring.axial;
      for (int j = 0; j < ring.count; ++j) {
        const double alpha = 2.0 * kPi * j / sides;
        const Vec3 dir = std::cos(alpha) * tube.frame_a + std::sin(alpha) * tube.frame_b;
        g.vertices.push_back(pole ? center : Vec3(center + ring.radius * dir));
        g.vertex_ring_owner.push_back(ring.segment);
        g.vertex_axial.push_back(ring.axial);
        g.vertex_tube.push_back(tube_id);
      }
      tube.rings.push_back(ring);
    }
    for (std::size_t i = 0; i + 1 < tube.rings.size(); ++i) {
      const Ring& cur = tube.rings[i];
      const Ring& nxt = tube.rings[i + 1];
      tube.band_first_face.push_back(static_cast<int>(g.faces.size()));
      for (int j = 0; j < sides; ++j) {
        const int j1 = (j + 1) % sides;
        if (cur.count == 1) {
          g.faces.push_back({cur.first_vertex, nxt.first_vertex + j1, nxt.first_vertex + j});
        } else if (nxt.count == 1) {
          g.faces.push_back({cur.first_vertex + j, cur.first_vertex + j1, nxt.first_vertex});
        } else {
          const int A = cur.first_vertex + j, B = cur.first_vertex + j1;
          const int C = nxt.first_vertex + j1, D = nxt.first_vertex + j;
          g.faces.push_back({A, B, C});
          g.faces.push_back({A, C, D});
        }
      }
    }
    g.tubes.push_back(std::move(tube));
  }
  return g;
}

void scaled_dims(const BodyConfig& c, const std::vector<double>* beta, std::vector<double>& lengths,
                 std::vector<double>& radii) {
  lengths.resize(c.segments.size());
  radii.resize(c.segments.size());
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    lengths[i] = c.segments[i].length * (beta ? (*beta)[2 * i] : 1.0);
    radii[i] = c.segments[i].radius * (beta ? (*beta)[2 * i + 1] : 1.0);
  }
}

}  // namespace

std::array<Vec2, 2> chart_bounds(int chart) {
  const double cell = 1.0 / kChartGrid;
  const int cx = chart % kChartGrid;
  const int cy = chart / kChartGrid;
  return {Vec2(cx * cell + kChartMargin, cy * cell + kChartMargin),
          Vec2((cx + 1) * cell - kChartMargin, (cy + 1) * cell - kChartMargin)};
}

BodyTemplate build_template(const BodyConfig& config) {
  validate_config(config);
  BodyTemplate tpl;
  tpl.config = config;
  for (const SegmentConfig& s : config.segments) {
    tpl.skeleton.joints.push_back({s.name, s.parent, s.offset});
  }
  const auto chains = find_chains(config);
  tpl.joint_rest = rest_joints(config, nullptr);
  std::vector<double> lengths, radii;
  scaled_dims(config, nullptr, lengths, radii);
  Geometry g = build_geometry(config, chains, tpl.joint_rest, lengths, radii);
  tpl.mesh.vertices = std::move(g.vertices);
  tpl.mesh.faces = std::move(g.faces);
  tpl.tubes = std::move(g.tubes);

  // Skin weights: owner segment, blended linearly across stitched joints.
  tpl.skin.resize(tpl.mesh.vertices.size());
  for (std::size_t v = 0; v < tpl.mesh.vertices.size(); ++v) {
    const Tube& tube = tpl.tubes[g.vertex_tube[v]];
    const double axial = g.vertex_axial[v];
    SkinWeights w;
    w.joint = {g.vertex_ring_owner[v], 0, 0, 0};
    w.weight = {1.0, 0.0, 0.0, 0.0};
    double start = 0.0;
    for (std::size_t ci = 0; ci + 1 < tube.segments.size(); ++ci) {
      start += lengths[tube.segments[ci]];
      const double bw = config.blend_half_width;
      if (std::abs(axial - start) < bw) {
        const double t = (axial - start + bw) / (2.0 * bw);
        w.joint = {tube.segments[ci], tube.segments[ci + 1], 0, 0};
        w.weight = {1.0 - t, t, 0.0, 0.0};
      }
    }
    tpl.skin[v] = w;
  }

  // Atlas: one chart per segment, u around the tube, v along the profile.
  const int nf = static_cast<int>(tpl.mesh.faces.size());
  tpl.atlas_uv.resize(nf);
  tpl.face_chart.resize(nf);
  for (const Tube& tube : tpl.tubes) {
    // Band range of each segment; v advances uniformly per ring so the chart
    // layout does not depend on lengths or radii.
    std::vector<int> lo(config.segments.size(), 1 << 30), hi(config.segments.size(), -1);
    for (std::size_t i = 0; i + 1 < tube.rings.size(); ++i) {
      const int owner = tube.rings[i + 1].segment;
      lo[owner] = std::min(lo[owner], static_cast<int>(i));
      hi[owner] = std::max(hi[owner], static_cast<int>(i) + 1);
    }
    for (std::size_t i = 0; i + 1 < tube.rings.size(); ++i) {
      const Ring& cur = tube.rings[i];
      const Ring& nxt = tube.rings[i + 1];
      const int owner = nxt.segment;
      const auto bounds = chart_bounds(owner);
      auto to_chart = [&](double u, std::size_t ring) {
        const double v = static_cast<double>(static_cast<int>(ring) - lo[owner]) / (hi[owner] - lo[owner]);
        return Vec2(bounds[0].x() + u * (bounds[1].x() - bounds[0].x()),
                    bounds[0].y() + v * (bounds[1].y() - bounds[0].y()));
      };
      int f = tube.band_first_face[i];
      for (int j = 0; j < tube.sides; ++j) {
        const double u0 = static_cast<double>(j) / tube.sides;
        const double u1 = static_cast<double>(j + 1) / tube.sides;
        const double um = (j + 0.5) / tube.sides;
        if (cur.count == 1) {
          tpl.atlas_uv[f] = {to_chart(um, i), to_chart(u1, i + 1), to_chart(u0, i + 1)};
          tpl.face_chart[f++] = owner;
        } else if (nxt.count == 1) {
          tpl.atlas_uv[f] = {to_chart(u0, i), to_chart(u1, i), to_chart(um, i + 1)};
          tpl.face_chart[f++] = owner;
        } else {
          const Vec2 A = to_chart(u0, i), B = to_chart(u1, i);
          const Vec2 C = to_chart(u1, i + 1), D = to_chart(u0, i + 1);
          tpl.atlas_uv[f] = {A, B, C};
          tpl.face_chart[f++] = owner;
          tpl.atlas_uv[f] = {A, C, D};
          tpl.face_chart[f++] = owner;
        }
      }
    }
  }
  return tpl;
}

// ---------------------------------------------------------------------------
// Posing

namespace {

Eigen::Matrix3d rotation_of(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

}  // namespace

JointTransforms forward_kinematics(const BodyTemplate& tpl, const BodyState& state) {
  state.validate(tpl.joint_count());
  const int n = tpl.joint_count();
  JointTransforms xf;
  xf.rest = rest_joints(tpl.config, &state.beta);
  xf.rotation.resize(n);
  xf.position.resize(n);
  for (int j = 0; j < n; ++j) {
    const int p = tpl.skeleton.joints[j].parent;
    const Eigen::Matrix3d local = rotation_of(state.theta[j]);
    if (p < 0) {
      xf.rotation[j] = local;
      xf.position[j] = xf.rest[j];
    } else {
      xf.rotation[j] = xf.rotation[p] * local;
      xf.position[j] = xf.position[p] + xf.rotation[p] * (xf.rest[j] - xf.rest[p]);
    }
  }
  return xf;
}

std::vector<Vec3> shaped_rest_vertices(const BodyTemplate& tpl, const BodyState& state) {
  state.validate(tpl.joint_count());
  if (std::all_of(state.beta.begin(), state.beta.end(), [](double b) { return b == 1.0; })) {
    return tpl.mesh.vertices;
  }
  const auto chains = find_chains(tpl.config);
  const auto joints = rest_joints(tpl.config, &state.beta);
  std::vector<double> lengths, radii;
  scaled_dims(tpl.config, &state.beta, lengths, radii);
  return build_geometry(tpl.config, chains, joints, lengths, radii).vertices;
}

std::vector<Vec3> skin_points(const std::vector<Vec3>& rest, const std::vector<SkinWeights>& w,
                              const JointTransforms& xf) {
  std::vector<Vec3> out(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    // v + Σ w ((R - I)(v - r) + (p - r)) is exactly v for the identity pose.
    Vec3 delta = Vec3::Zero();
    for (int k = 0; k < 4; ++k) {
      const double wk = w[i].weight[k];
      if (wk == 0.0) continue;
      const int j = w[i].joint[k];
      const Vec3 local = rest[i] - xf.rest[j];
      delta += wk * ((xf.rotation[j] * local - local) + (xf.position[j] - xf.rest[j]));
    }
    out[i] = rest[i] + delta;
  }
  return out;
}

TriMesh pose_body(const BodyTemplate& tpl, const BodyState& state) {
  const JointTransforms xf = forward_kinematics(tpl, state);
  TriMesh out;
  out.faces = tpl.mesh.faces;
  out.vertices = skin_points(shaped_rest_vertices(tpl, state), tpl.skin, xf);
  return out;
}

Vec3 segment_end(const BodyTemplate& tpl, const BodyState& state, int s) {
  const JointTransforms xf = forward_kinematics(tpl, state);
  const SegmentConfig& seg = tpl.config.segments[s];
  return xf.position[s] + xf.rotation[s] * (seg.direction * seg.length * state.length_scale(s));
}

// ---------------------------------------------------------------------------
// Atlas

AtlasPoint body_uv_lookup(const BodyTemplate& tpl, const geom::BarycentricPoint& anchor) {
  const auto& c = tpl.atlas_uv[anchor.face];
  AtlasPoint p;
  p.uv = anchor.weights[0] * c[0] + anchor.weights[1] * c[1] + anchor.weights[2] * c[2];
  p.chart = tpl.face_chart[anchor.face];
  return p;
}

std::size_t atlas_overlap_count(const BodyTemplate& tpl, int R) {
  std::vector<int> hits(static_cast<std::size_t>(R) * R, 0);
  for (std::size_t f = 0; f < tpl.atlas_uv.size(); ++f) {
    const auto& c = tpl.atlas_uv[f];
    geom::rasterize_triangle(R, c[0], c[1], c[2],
                             [&](int x, int y, const Vec3&) { ++hits[y * R + x]; });
  }
  return static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(), [](int h) { return h > 1; }));
}

AtlasLookup build_atlas_lookup(const BodyTemplate& tpl, int R) {
  AtlasLookup lut;
  lut.resolution = R;
  lut.texel.assign(static_cast<std::size_t>(R) * R, geom::BarycentricPoint{});
  for (std::size_t f = 0; f < tpl.atlas_uv.size(); ++f) {
    const auto& c = tpl.atlas_uv[f];
    geom::rasterize_triangle(R, c[0], c[1], c[2], [&](int x, int y, const Vec3& b) {
      lut.texel[y * R + x] = {static_cast<int>(f), b};
    });
  }
  return lut;
}

uv::UVMap render_normal_map(const BodyTemplate& tpl, const TriMesh& posed, int R) {
  if (posed.faces.size() != tpl.mesh.faces.size()) {
    throw DimensionError("posed body does not share the template connectivity");
  }
  const auto normals = geom::vertex_normals(posed).normals;
  uv::UVMap map(R, 3, uv::CaseTag::kCase1);
  for (std::size_t f = 0; f < tpl.atlas_uv.size(); ++f) {
    const auto& c = tpl.atlas_uv[f];
    const Face& t = posed.faces[f];
    geom::rasterize_triangle(R, c[0], c[1], c[2], [&](int x, int y, const Vec3& b) {
      Vec3 n = b[0] * normals[t[0]] + b[1] * normals[t[1]] + b[2] * normals[t[2]];
      const double len = n.norm();
      n = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
      for (int k = 0; k < 3; ++k) map.at(k, x, y) = static_cast<float>(0.5 * (n[k] + 1.0));
      map.mask()[map.index(x, y)] = 1;
    });
  }
  return map;
}

uv::UVMap render_normal_map_cylindrical(const BodyTemplate& tpl, const TriMesh& posed, int R,
                                        double y0, double world_scale) {
  if (posed.faces.size() != tpl.mesh.faces.size()) {
    throw DimensionError("posed body does not share the template connectivity");
  }
  const auto normals = geom::vertex_normals(posed).normals;
  const int root = [&] {
    for (int j = 0; j < tpl.joint_count(); ++j)
      if (tpl.skeleton.joints[j].parent < 0) return j;
    return 0;
  }();
  const Vec3 root_pos = tpl.joint_rest[root];
  uv::UVMap map(R, 3, uv::CaseTag::kCase2);
  std::vector<double> depth(map.texel_count(), -1.0);
  const auto& verts = tpl.mesh.vertices;
  std::vector<Vec2> vuv(verts.size());
  std::vector<double> vr(verts.size());
  std::vector<bool> usable(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Vec3 p = (verts[i] - root_pos) * world_scale;
    const double rho = y0 - p.y();
    const double theta = std::atan2(p.z(), p.x());
    vuv[i] = Vec2(rho * std::cos(theta) + 0.5, rho * std::sin(theta) + 0.5);
    vr[i] = std::hypot(p.x(), p.z());
    usable[i] = p.y() <= y0 && vr[i] >= 0.02 * world_scale;
  }
  for (std::size_t f = 0; f < tpl.mesh.faces.size(); ++f) {
    const int chart = tpl.face_chart[f];
    const bool lower = chart == root ||
                       tpl.config.segments[chart].direction.dot(-Vec3::UnitY()) > 0.5;
    if (!lower) continue;
    const Face& t = tpl.mesh.faces[f];
    if (!usable[t[0]] || !usable[t[1]] || !usable[t[2]]) continue;
    geom::rasterize_triangle(R, vuv[t[0]], vuv[t[1]], vuv[t[2]], [&](int x, int y, const Vec3& b) {
      const double r = b[0] * vr[t[0]] + b[1] * vr[t[1]] + b[2] * vr[t[2]];
      const std::size_t idx = map.index(x, y);
      if (r <= depth[idx]) return;
      depth[idx] = r;
      Vec3 n = b[0] * normals[t[0]] + b[1] * normals[t[1]] + b[2] * normals[t[2]];
      const double len = n.norm();
      n = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
      for (int k = 0; k < 3; ++k) map.at(k, x, y) = static_cast<float>(0.5 * (n[k] + 1.0));
      map.mask()[idx] = 1;
    });
  }
  return map;
}

}  // namespace uvcloth::body
