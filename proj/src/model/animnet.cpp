#include "uvcloth/model/animnet.hpp"

#include "uvcloth/error.hpp"
#include "uvcloth/model/map_tensors.hpp"
#include "uvcloth/model/pipeline.hpp"
#include "uvcloth/nn/architectures.hpp"

namespace uvcloth::model {

using nlohmann::json;

json animnet_config_to_json(const AnimNetConfig& c) {
  return {{"resolution", c.resolution},
          {"latent", c.latent},
          {"base_channels", c.base_channels},
          {"d_max", c.d_max},
          {"mask_input", c.mask_input},
          {"seed", c.seed},
          {"train", train_config_to_json(c.train)},
          {"collision_margin", c.collision_margin},
          {"codec", codec_config_to_json(c.codec)}};
}

AnimNetConfig animnet_config_from_json(const json& j) {
  AnimNetConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.latent = j.value("latent", c.latent);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.d_max = j.value("d_max", c.d_max);
  c.mask_input = j.value("mask_input", c.mask_input);
  c.seed = j.value("seed", c.seed);
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  c.collision_margin = j.value("collision_margin", c.collision_margin);
  if (j.contains("codec")) c.codec = codec_config_from_json(j["codec"]);
  return c;
}

PoseSample::PoseSample(uv::UVMap t_map, uv::UVMap normal_map_, uv::UVMap a_map)
    : maps(std::move(t_map), std::move(a_map)), normal_map(std::move(normal_map_)) {
  if (normal_map.resolution() != maps.t_map().resolution() || normal_map.channels() != 3) {
    throw DimensionError("normal map must be a 3-channel map at the garment resolution");
  }
}

AnimNet::AnimNet(const AnimNetConfig& cfg, uv::CaseTag tag, int t_channels)
    : cfg_(cfg), tag_(tag), t_channels_(t_channels) {
  if (tag == uv::CaseTag::kBiDistance) throw DomainError("AnimNet needs a CASE1 or CASE2 map");
  if (t_channels <= 0) throw DimensionError("AnimNet needs at least one T-pose channel");
  cfg_.codec.resolution = cfg.resolution;
  const int R = cfg.resolution;
  const int in = input_channels();
  json spec = nn::conv_encoder(in, R, cfg.base_channels, cfg.latent);
  for (const json& layer : nn::conv_decoder(cfg.latent, 3, R, cfg.base_channels)) spec.push_back(layer);
  net_ = nn::Network(spec, {in, R, R}, cfg.seed);
}

void AnimNet::check_map(const uv::UVMap& m, int channels, const char* what) const {
  if (m.resolution() != cfg_.resolution || m.channels() != channels) {
    throw DimensionError(std::string(what) + " is " + std::to_string(m.resolution()) + "x" +
                         std::to_string(m.resolution()) + "x" + std::to_string(m.channels()) +
                         ", model expects " + std::to_string(cfg_.resolution) + "x" +
                         std::to_string(cfg_.resolution) + "x" + std::to_string(channels));
  }
}

nn::Tensor AnimNet::input_tensor(const uv::UVMap& t_map, const uv::UVMap& normal_map) const {
  check_map(t_map, t_channels_, "T-pose map");
  check_map(normal_map, 3, "normal map");
  if (t_map.case_tag() != tag_) {
    throw DomainError(std::string("map is ") + uv::case_name(t_map.case_tag()) + ", model is " +
                      uv::case_name(tag_));
  }
  const nn::Tensor v = values_tensor(t_map);
  const nn::Tensor n = values_tensor(normal_map);
  if (!cfg_.mask_input) return concat_channels({&v, &n});
  const nn::Tensor t = tmask_tensor(t_map, d_max());
  return concat_channels({&v, &t, &n});
}

PoseTensors AnimNet::prepare(const PoseSample& s) const {
  check_map(s.maps.a_map(), 3, "posed map");
  PoseTensors p;
  p.input = input_tensor(s.maps.t_map(), s.normal_map);
  p.target = values_tensor(s.maps.a_map());
  p.mask = mask_tensor(s.maps.a_map());
  return p;
}

uv::UVMap AnimNet::predict(const uv::UVMap& t_map, const uv::UVMap& normal_map) const {
  return tensor_to_map(net_.forward(input_tensor(t_map, normal_map)), t_map.mask(), tag_);
}

double AnimNet::sample_loss(const PoseTensors& s, nn::Gradients* grads,
                            std::vector<double>& parts) const {
  nn::ForwardCache cache;
  const nn::Tensor out = net_.forward(s.input, grads ? &cache : nullptr);
  const nn::LossResult l = nn::l1_masked_loss(out, s.target, &s.mask);
  parts = {l.value};
  if (grads) net_.backward(cache, l.grad, *grads);
  return l.value;
}

void AnimNet::save(const std::filesystem::path& path, const json& extra) const {
  nn::Checkpoint ck;
  ck.meta = {{"kind", "animnet"},
             {"config", animnet_config_to_json(cfg_)},
             {"case_tag", static_cast<int>(tag_)},
             {"t_channels", t_channels_}};
  ck.meta["network"] = nn::store_network(net_, "animnet", ck);
  if (!extra.is_null()) ck.meta["extra"] = extra;
  nn::save_checkpoint(ck, path);
}

AnimNet AnimNet::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.meta.value("kind", "") != "animnet") throw ParseError(path.string() + " is not an AnimNet checkpoint", 0);
  AnimNet net;
  net.cfg_ = animnet_config_from_json(ck.meta.at("config"));
  net.tag_ = static_cast<uv::CaseTag>(ck.meta.at("case_tag").get<int>());
  net.t_channels_ = ck.meta.at("t_channels").get<int>();
  net.net_ = nn::restore_network(ck.meta.at("network"), "animnet", ck);
  return net;
}

nn::TrainLog train_animnet(AnimNet& net, const std::vector<PoseSample>& samples) {
  if (samples.size() < 20) {
    throw DomainError("AnimNet training needs at least 20 samples, got " +
                      std::to_string(samples.size()));
  }
  std::vector<PoseTensors> data;
  data.reserve(samples.size());
  for (const PoseSample& s : samples) {
    if (s.maps.t_map().case_tag() != samples.front().maps.t_map().case_tag()) {
      throw DomainError("training samples mix case tags; train one model per garment category");
    }
    data.push_back(net.prepare(s));
  }
  const auto step = [&](std::size_t i, nn::Gradients* g, std::vector<double>& parts) {
    return net.sample_loss(data[i], g, parts);
  };
  return nn::train(data.size(), net.config().train, net.params(), step);
}

AnimateResult animate_map(const AnimNet& net, const uv::UVMap& t_map,
                          const body::BodyTemplate& tpl, const body::BodyState& state,
                          const uv::GarmentUV* guv) {
  if (t_map.mask_count() == 0) throw DomainError("cannot animate a garment with an empty mask");
  if (t_map.case_tag() != net.case_tag()) {
    throw DomainError(std::string("garment map is ") + uv::case_name(t_map.case_tag()) +
                      ", animation model is " + uv::case_name(net.case_tag()));
  }
  state.validate(tpl.joint_count());
  const uv::CodecConfig& codec = net.config().codec;
  const geom::TriMesh posed = body::pose_body(tpl, state);

  AnimateResult out;
  out.a_map = net.predict(t_map, conditioning_map(tpl, posed, net.case_tag(), codec));
  out.mask_texels = out.a_map.mask_count();
  geom::TriMesh mesh;
  if (guv) {
    mesh = uv::decode_posed(out.a_map, *guv, posed);
  } else {
    const body::AtlasLookup lookup = body::build_atlas_lookup(tpl, t_map.resolution());
    uv::GridDecode grid = uv::decode_template_free(out.a_map, uv::MapKind::kPosed, tpl, lookup,
                                                   posed, codec.world_scale);
    mesh = std::move(grid.mesh);
    out.dropped = grid.dropped;
  }
  const geom::SurfaceIndex index(posed);
  anim::CollisionResult resolved =
      anim::resolve_collisions(mesh, index, net.config().collision_margin);
  out.mesh = std::move(resolved.mesh);
  out.collisions = resolved.report;
  return out;
}

AnimateResult animate_params(const AnimNet& net, const ParamNet& shape, const Eigen::VectorXd& s,
                             const body::BodyTemplate& tpl, const body::BodyState& state) {
  if (shape.case_tag() != net.case_tag() || shape.resolution() != net.config().resolution) {
    throw DomainError("shape model and animation model disagree on case or resolution");
  }
  const DecodedShape d = shape.decode(from_params(shape.pca(), s));
  return animate_map(net, d.map, tpl, state);
}

}  // namespace uvcloth::model
