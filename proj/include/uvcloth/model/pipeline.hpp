#pragma once

#include "json.hpp"
#include "uvcloth/gen/garment.hpp"
#include "uvcloth/uv/codec.hpp"

namespace uvcloth::model {

nlohmann::json codec_config_to_json(const uv::CodecConfig& c);
uv::CodecConfig codec_config_from_json(const nlohmann::json& j);

/// Atlas charts for body-homotopic garments, the cylindrical chart for skirts.
uv::CaseTag case_for(gen::Category c);
/// Stored value channels per case.
int channels_for(uv::CaseTag tag);

/// Body normal map in the chart used by `tag`.
uv::UVMap conditioning_map(const body::BodyTemplate& tpl, const geom::TriMesh& posed_body,
                           uv::CaseTag tag, const uv::CodecConfig& cfg);

/// One dataset sample in map form: uv assignment, coupled T-pose/posed maps
/// and the posed-body normal map.
struct EncodedSample {
  gen::DatasetSample sample;
  geom::TriMesh posed_body;
  uv::GarmentUV guv;
  uv::UVMap t_map;
  uv::UVMap a_map;
  uv::UVMap normal_map;
};

/// `tbody` indexes the T-pose template mesh (used by atlas encoding).
EncodedSample encode_sample(const gen::DatasetSample& s, const body::BodyTemplate& tpl,
                            const geom::SurfaceIndex& tbody, const uv::CodecConfig& cfg);

std::vector<EncodedSample> encode_samples(const std::vector<gen::DatasetSample>& samples,
                                          const body::BodyTemplate& tpl,
                                          const uv::CodecConfig& cfg);

}  // namespace uvcloth::model
