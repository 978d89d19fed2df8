#include "uvcloth/model/pipeline.hpp"

namespace uvcloth::model {

nlohmann::json codec_config_to_json(const uv::CodecConfig& c) {
  return {{"resolution", c.resolution}, {"world_scale", c.world_scale}, {"y0", c.y0},
          {"rho", c.rho}, {"max_normal_distance", c.max_normal_distance},
          {"max_bad_fraction", c.max_bad_fraction}};
}

uv::CodecConfig codec_config_from_json(const nlohmann::json& j) {
  uv::CodecConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.world_scale = j.value("world_scale", c.world_scale);
  c.y0 = j.value("y0", c.y0);
  c.rho = j.value("rho", c.rho);
  c.max_normal_distance = j.value("max_normal_distance", c.max_normal_distance);
  c.max_bad_fraction = j.value("max_bad_fraction", c.max_bad_fraction);
  return c;
}

uv::CaseTag case_for(gen::Category c) {
  return c == gen::Category::kSkirt ? uv::CaseTag::kCase2 : uv::CaseTag::kCase1;
}

int channels_for(uv::CaseTag tag) { return tag == uv::CaseTag::kCase1 ? 1 : 3; }

uv::UVMap conditioning_map(const body::BodyTemplate& tpl, const geom::TriMesh& posed_body,
                           uv::CaseTag tag, const uv::CodecConfig& cfg) {
  if (tag == uv::CaseTag::kCase2) {
    return body::render_normal_map_cylindrical(tpl, posed_body, cfg.resolution, cfg.y0,
                                               cfg.world_scale);
  }
  return body::render_normal_map(tpl, posed_body, cfg.resolution);
}

EncodedSample encode_sample(const gen::DatasetSample& s, const body::BodyTemplate& tpl,
                            const geom::SurfaceIndex& tbody, const uv::CodecConfig& cfg) {
  EncodedSample e;
  e.sample = s;
  e.posed_body = body::pose_body(tpl, s.body_state);
  const uv::CaseTag tag = case_for(s.spec.category);
  e.guv = tag == uv::CaseTag::kCase1 ? uv::assign_uv_case1(s.tpose_garment, tpl, tbody, cfg)
                                     : uv::assign_uv_case2(s.tpose_garment, cfg.y0, cfg.world_scale);
  e.t_map = uv::encode_tpose(s.tpose_garment, e.guv, cfg.resolution);
  e.a_map = uv::encode_posed(s.posed_garment, e.guv, e.posed_body, e.t_map);
  e.normal_map = conditioning_map(tpl, e.posed_body, tag, cfg);
  return e;
}

std::vector<EncodedSample> encode_samples(const std::vector<gen::DatasetSample>& samples,
                                          const body::BodyTemplate& tpl,
                                          const uv::CodecConfig& cfg) {
  const geom::SurfaceIndex tbody(tpl.mesh);
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const gen::DatasetSample& s : samples) out.push_back(encode_sample(s, tpl, tbody, cfg));
  return out;
}

}  // namespace uvcloth::model
