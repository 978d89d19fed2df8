#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "uvcloth/geom/mesh.hpp"
#include "uvcloth/uv/uv_map.hpp"

namespace uvcloth::body {

using geom::Vec2;
using geom::Vec3;

/// One capsule segment of the stand-in body. Offsets are T-pose vectors from
/// the parent joint to this segment's joint; the segment extends `length`
/// along `direction` from its joint.
struct SegmentConfig {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();
  double length = 0.1;
  double radius = 0.05;
  int rings = 4;
  int sides = 16;
};

struct BodyConfig {
  std::vector<SegmentConfig> segments;
  /// Latitude bands in each hemispherical end cap.
  int cap_rings = 4;
  /// Half-width (meters) of the linear skin-weight blend at stitched joints.
  double blend_half_width = 0.04;

  /// Torso, head, two-segment arms and legs; y up, +z forward, +x is the
  /// body's left.
  static BodyConfig standard();
  int index_of(const std::string& name) const;
};

BodyConfig body_config_from_json(const nlohmann::json& j);
nlohmann::json body_config_to_json(const BodyConfig& config);
BodyConfig load_body_config(const std::filesystem::path& path);

struct Joint {
  std::string name;
  int parent = -1;
  Vec3 rest_offset = Vec3::Zero();
};

struct BodySkeleton {
  std::vector<Joint> joints;
  int size() const { return static_cast<int>(joints.size()); }
};

/// Shape and pose. beta holds (length, radius) scale pairs per segment; theta
/// holds one axis-angle rotation per joint, relative to the parent frame.
struct BodyState {
  std::vector<double> beta;
  std::vector<Vec3> theta;

  static BodyState identity(int joint_count);
  /// Throws DimensionError on size mismatch, DomainError on out-of-range beta
  /// ([0.5, 2]) or non-finite angles.
  void validate(int joint_count) const;
  double length_scale(int j) const { return beta[2 * j]; }
  double radius_scale(int j) const { return beta[2 * j + 1]; }
};

nlohmann::json body_state_to_json(const BodyState& s);
BodyState body_state_from_json(const nlohmann::json& j);

struct SkinWeights {
  std::array<int, 4> joint{0, 0, 0, 0};
  std::array<double, 4> weight{1.0, 0.0, 0.0, 0.0};
};

/// A ring of tube vertices. Rings of one tube are ordered from the proximal
/// pole to the distal pole; pole rings hold a single vertex.
struct Ring {
  int first_vertex = 0;
  int count = 0;
  /// Signed axial coordinate along the tube (meters from the tube's first
  /// joint) and radius; informational for garment construction.
  double axial = 0.0;
  double radius = 0.0;
  /// Arc length along the tube profile from the proximal pole.
  double arc = 0.0;
  int segment = 0;
};

/// A closed capsule shell covering a chain of stitched segments.
struct Tube {
  std::vector<int> segments;
  std::vector<Ring> rings;
  /// First face of the band between rings k and k+1 is band_first_face[k].
  std::vector<int> band_first_face;
  Vec3 origin = Vec3::Zero();  // first joint position at rest
  Vec3 axis = Vec3::UnitY();
  Vec3 frame_a = Vec3::UnitZ();  // angle 0
  Vec3 frame_b = Vec3::UnitX();  // angle pi/2
  int sides = 16;
};

struct BodyTemplate {
  BodyConfig config;
  BodySkeleton skeleton;
  geom::TriMesh mesh;
  std::vector<SkinWeights> skin;
  /// Atlas uv per face corner and the chart (segment) of each face.
  std::vector<std::array<Vec2, 3>> atlas_uv;
  std::vector<int> face_chart;
  std::vector<Tube> tubes;
  std::vector<Vec3> joint_rest;  // world joint positions at T-pose
  int joint_count() const { return skeleton.size(); }
};

/// Chart grid used by the atlas.
inline constexpr int kChartGrid = 4;
/// Margin inside each chart cell, in uv units (two texels at R = 64).
inline constexpr double kChartMargin = 2.0 / 64.0;

/// Builds the T-pose body. Throws DomainError on invalid tessellation
/// (fewer than 3 rings or sides) or a malformed hierarchy.
BodyTemplate build_template(const BodyConfig& config);

/// World joint positions and rotations for a state (forward kinematics).
struct JointTransforms {
  std::vector<Eigen::Matrix3d> rotation;
  std::vector<Vec3> position;
  std::vector<Vec3> rest;  // rest positions after beta scaling
};
JointTransforms forward_kinematics(const BodyTemplate& tpl, const BodyState& state);

/// Rest-pose vertex positions with beta applied (same connectivity).
std::vector<Vec3> shaped_rest_vertices(const BodyTemplate& tpl, const BodyState& state);

/// Linear blend skinning of `rest` positions with the given weights.
std::vector<Vec3> skin_points(const std::vector<Vec3>& rest, const std::vector<SkinWeights>& w,
                              const JointTransforms& xf);

/// Applies beta then theta. The identity state reproduces the template mesh.
geom::TriMesh pose_body(const BodyTemplate& tpl, const BodyState& state);

/// End point of a segment (its joint + direction·length) for a state at the
/// posed configuration.
Vec3 segment_end(const BodyTemplate& tpl, const BodyState& state, int segment);

struct AtlasPoint {
  Vec2 uv;
  int chart = -1;
};
AtlasPoint body_uv_lookup(const BodyTemplate& tpl, const geom::BarycentricPoint& anchor);

/// Chart cell bounds (inner region, margins removed) in uv.
std::array<Vec2, 2> chart_bounds(int chart);

/// Texels covered by more than one atlas triangle at resolution R.
std::size_t atlas_overlap_count(const BodyTemplate& tpl, int R);

/// Texel → (face, barycentric) table over the atlas at resolution R. Texels
/// in gutters or unused charts hold face -1.
struct AtlasLookup {
  int resolution = 0;
  std::vector<geom::BarycentricPoint> texel;
};
AtlasLookup build_atlas_lookup(const BodyTemplate& tpl, int R);

/// Posed-space unit normals rasterized into the atlas, stored as (n+1)/2.
uv::UVMap render_normal_map(const BodyTemplate& tpl, const geom::TriMesh& posed, int R);

/// Normal map for cylindrically mapped garments: torso and leg faces are
/// projected through the cylindrical uv of their T-pose positions (scaled by
/// world_scale, threshold y0) and the outermost surface wins per texel.
uv::UVMap render_normal_map_cylindrical(const BodyTemplate& tpl, const geom::TriMesh& posed,
                                        int R, double y0, double world_scale);

}  // namespace uvcloth::body
