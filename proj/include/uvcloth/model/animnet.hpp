#pragma once

#include "uvcloth/anim/collision.hpp"
#include "uvcloth/model/paramnet.hpp"
#include "uvcloth/uv/codec.hpp"

namespace uvcloth::model {

struct AnimNetConfig {
  int resolution = 64;
  int latent = 128;
  int base_channels = 8;
  double d_max = 0.0;  // 0 selects R/4
  bool mask_input = true;
  std::uint64_t seed = 11;
  nn::TrainConfig train{};
  double collision_margin = 0.003;
  uv::CodecConfig codec{};

  double effective_d_max() const { return d_max > 0.0 ? d_max : resolution / 4.0; }
};

nlohmann::json animnet_config_to_json(const AnimNetConfig& c);
AnimNetConfig animnet_config_from_json(const nlohmann::json& j);

/// Coupled T-pose/posed maps plus the posed-body normal map. Construction
/// throws when the two garment maps do not share their mask.
struct PoseSample {
  PoseSample(uv::UVMap t_map, uv::UVMap normal_map, uv::UVMap a_map);
  uv::CoupledMaps maps;
  uv::UVMap normal_map;
};

struct PoseTensors {
  nn::Tensor input;   // [values ‖ tmask ‖ normals]
  nn::Tensor target;  // (3, R, R)
  nn::Tensor mask;    // (R, R)
};

/// Posed-map regressor: a conv encoder over the stacked T-pose map, its
/// bi-distance channel and the body normal map, and a conv decoder emitting
/// the three posed channels.
class AnimNet {
 public:
  AnimNet(const AnimNetConfig& cfg, uv::CaseTag tag, int t_channels);

  const AnimNetConfig& config() const { return cfg_; }
  uv::CaseTag case_tag() const { return tag_; }
  int t_channels() const { return t_channels_; }
  int input_channels() const { return t_channels_ + (cfg_.mask_input ? 1 : 0) + 3; }
  double d_max() const { return cfg_.effective_d_max(); }

  nn::Tensor input_tensor(const uv::UVMap& t_map, const uv::UVMap& normal_map) const;
  PoseTensors prepare(const PoseSample& s) const;

  /// Posed map restricted to the T-pose map's mask.
  uv::UVMap predict(const uv::UVMap& t_map, const uv::UVMap& normal_map) const;

  /// Masked L1 inside the ground-truth mask; parts = {map}.
  double sample_loss(const PoseTensors& s, nn::Gradients* grads, std::vector<double>& parts) const;

  std::vector<nn::Tensor*> params() { return net_.params(); }
  nn::Gradients zero_gradients() const { return net_.zero_gradients(); }
  nn::Network& network() { return net_; }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static AnimNet load(const std::filesystem::path& path);

 private:
  AnimNet() = default;
  void check_map(const uv::UVMap& m, int channels, const char* what) const;

  AnimNetConfig cfg_;
  uv::CaseTag tag_ = uv::CaseTag::kCase1;
  int t_channels_ = 1;
  nn::Network net_;
};

/// Needs ≥20 samples of one case tag.
nn::TrainLog train_animnet(AnimNet& net, const std::vector<PoseSample>& samples);

struct AnimateResult {
  geom::TriMesh mesh;
  uv::UVMap a_map;
  anim::CollisionReport collisions;
  std::size_t mask_texels = 0;
  /// Masked texels dropped by the grid decode (atlas gutters).
  std::size_t dropped = 0;
};

/// Runs the posed-map regressor for `t_map` under `state`, decodes the result
/// and resolves body collisions. With `guv` the garment's own connectivity is
/// reused; otherwise the map is decoded as a texel grid. Throws DomainError on
/// an empty mask or a case mismatch.
AnimateResult animate_map(const AnimNet& net, const uv::UVMap& t_map,
                          const body::BodyTemplate& tpl, const body::BodyState& state,
                          const uv::GarmentUV* guv = nullptr);

/// Decodes shape parameters through the shape space, then animates.
AnimateResult animate_params(const AnimNet& net, const ParamNet& shape, const Eigen::VectorXd& s,
                             const body::BodyTemplate& tpl, const body::BodyState& state);

}  // namespace uvcloth::model
