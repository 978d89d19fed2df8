#pragma once

#include <optional>
#include <vector>

#include "uvcloth/body/body_model.hpp"
#include "uvcloth/geom/surface.hpp"
#include "uvcloth/uv/uv_map.hpp"

namespace uvcloth::uv {

using geom::TriMesh;
using geom::Vec2;
using geom::Vec3;

/// Codec conventions. Atlas (CASE1) values are meters + 0.5. Cylindrical
/// (CASE2) values are world_scale·x + 0.5, so garments within ±1/world_scale
/// meters of the root fit the unit cube.
struct CodecConfig {
  int resolution = 64;
  double world_scale = 0.5;
  /// Cylindrical-chart pole height in scaled coordinates above the root.
  double y0 = 0.2;
  /// Ray-correspondence residual limit (meters) for atlas encoding.
  double rho = 0.005;
  /// Largest accepted |normal distance| (meters) for atlas encoding.
  double max_normal_distance = 0.08;
  /// Allowed fraction of vertices violating the two limits above.
  double max_bad_fraction = 0.01;
};

/// Per-vertex uv record for one garment.
struct GarmentUV {
  CaseTag case_tag = CaseTag::kCase1;
  std::vector<Vec2> uv;
  std::vector<geom::Face> faces;
  /// CASE1: body anchor and signed normal distance per vertex.
  std::vector<geom::Correspondence> anchors;
  std::vector<int> chart;
  double y0 = 0.2;
  double world_scale = 0.5;

  std::size_t vertex_count() const { return uv.size(); }
  int channels() const { return case_tag == CaseTag::kCase1 ? 1 : 3; }
};

/// Atlas encoding through ray correspondences on the T-pose body. Throws
/// NotEncodableError when more than max_bad_fraction of the vertices have a
/// residual above rho or a normal distance beyond max_normal_distance.
GarmentUV assign_uv_case1(const TriMesh& garment, const body::BodyTemplate& tpl,
                          const geom::SurfaceIndex& body, const CodecConfig& cfg = {});

/// Cylindrical encoding: uv = ((y0 - y)cos θ + 0.5, (y0 - y)sin θ + 0.5) of the
/// scaled position, θ = atan2(z, x) and θ = 0 on the axis. Throws DomainError
/// when two vertices more than 5 cm apart land within 1e-6 in uv.
GarmentUV assign_uv_case2(const TriMesh& garment, double y0, double world_scale = 0.5);

/// Per-vertex stored values (1 or 3 used components) before rasterization.
using VertexValues = std::vector<Vec3>;

VertexValues tpose_values(const TriMesh& garment, const GarmentUV& guv);
VertexValues posed_values(const TriMesh& posed_garment, const GarmentUV& guv,
                          const TriMesh& posed_body);

/// Rasterizes per-vertex values over the garment's uv triangles. CASE1
/// triangles whose corners lie in different charts are skipped; a vertex whose
/// texel is left uncovered is written into its own texel.
UVMap render_values(const GarmentUV& guv, const VertexValues& values, int channels, int R);

UVMap encode_tpose(const TriMesh& garment, const GarmentUV& guv, int R);

/// Posed map with the same mask as t_map; throws DimensionError when the
/// posed garment does not share the guv connectivity.
UVMap encode_posed(const TriMesh& posed_garment, const GarmentUV& guv, const TriMesh& posed_body,
                   const UVMap& t_map);

/// T-pose and posed maps that share uv coordinates and mask.
class CoupledMaps {
 public:
  CoupledMaps(UVMap t_map, UVMap a_map);
  const UVMap& t_map() const { return t_; }
  const UVMap& a_map() const { return a_; }

 private:
  UVMap t_;
  UVMap a_;
};

/// Bilinear lookup of stored values at every vertex uv. Vertices whose
/// neighbourhood has no masked texel take the nearest masked texel; more than
/// 1% of those throws DomainError (stale correspondence).
VertexValues sample_vertex_values(const UVMap& map, const GarmentUV& guv);

/// Inverse of tpose_values. CASE1 anchors are evaluated on `body` (T-pose or
/// posed, same connectivity as the template).
TriMesh decode_tpose_values(const VertexValues& values, const GarmentUV& guv,
                            const TriMesh& body);
TriMesh decode_posed_values(const VertexValues& values, const GarmentUV& guv,
                            const TriMesh& posed_body);

TriMesh decode_template_carried(const UVMap& map, const GarmentUV& guv,
                                const body::BodyTemplate& tpl,
                                const TriMesh* posed_body = nullptr);
TriMesh decode_posed(const UVMap& a_map, const GarmentUV& guv, const TriMesh& posed_body);

/// Whether a grid decode reads T-pose values (normal distance / position) or
/// posed values (shift from the posed anchor / position).
enum class MapKind { kTPose, kPosed };

struct GridDecode {
  TriMesh mesh;
  /// Masked texels that fell into atlas gutters (CASE1) and were dropped.
  std::size_t dropped = 0;
};

/// Template-free decode: one vertex per masked texel, two triangles per 2×2
/// block of masked texels. `body` is the T-pose or posed body matching kind;
/// world_scale applies to CASE2 maps only.
GridDecode decode_template_free(const UVMap& map, MapKind kind, const body::BodyTemplate& tpl,
                                const body::AtlasLookup& lookup, const TriMesh& body,
                                double world_scale);

/// World-space size of one texel: median over uv edges of |Δ3D| / |Δuv|,
/// divided by R. CASE1 edges across charts are ignored.
double texel_footprint(const TriMesh& garment, const GarmentUV& guv, int R);

/// Signed Euclidean distance-to-boundary map over a W×H mask: DT(M) - DT(1-M)
/// in texels, capped to ±d_max.
struct BiDistanceMap {
  int width = 0;
  int height = 0;
  double d_max = 0.0;
  std::vector<double> values;
};

BiDistanceMap bidistance_transform(const std::vector<std::uint8_t>& mask, int width, int height,
                                   double d_max);
BiDistanceMap bidistance_transform(const UVMap& map, double d_max);
std::vector<std::uint8_t> recover_mask(const std::vector<double>& values);
std::vector<std::uint8_t> recover_mask(const BiDistanceMap& t);

/// Stored as a one-channel UVMP map with the bi-distance tag.
UVMap to_uvmap(const BiDistanceMap& t);
BiDistanceMap bidistance_from_uvmap(const UVMap& map, double d_max);

inline double default_d_max(int R) { return R / 4.0; }

}  // namespace uvcloth::uv
