#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "uvcloth/model/pca.hpp"
#include "uvcloth/nn/train.hpp"
#include "uvcloth/uv/uv_map.hpp"

namespace uvcloth::model {

struct ParamNetConfig {
  int resolution = 64;
  int latent = 128;
  int base_channels = 8;
  /// Bi-distance cap in texels; 0 selects R/4.
  double d_max = 0.0;
  /// Append the bi-distance channel to the encoder input.
  bool mask_input = true;
  double lambda_mask = 1.0;
  int pca_dims = 10;
  std::uint64_t seed = 1;
  nn::TrainConfig train{};

  double effective_d_max() const { return d_max > 0.0 ? d_max : resolution / 4.0; }
};

nlohmann::json train_config_to_json(const nn::TrainConfig& c);
nn::TrainConfig train_config_from_json(const nlohmann::json& j, nn::TrainConfig defaults = {});
nlohmann::json paramnet_config_to_json(const ParamNetConfig& c);
ParamNetConfig paramnet_config_from_json(const nlohmann::json& j);

/// Network-ready tensors of one T-pose map.
struct ShapeSample {
  nn::Tensor input;   // (C [+1], R, R)
  nn::Tensor target;  // (C, R, R), zero outside the mask
  nn::Tensor mask;    // (R, R)
  nn::Tensor tmask;   // (1, R, R) in units of d_max
};

struct DecodedShape {
  uv::UVMap map;      // carries the mask recovered from tmask
  nn::Tensor values;  // (C, R, R) raw decoder output
  nn::Tensor tmask;   // (1, R, R) in units of d_max
};

/// Shape-space autoencoder: one encoder, a value decoder and a bi-distance
/// decoder sharing the latent, plus the PCA subspace of the training latents.
class ParamNet {
 public:
  ParamNet(const ParamNetConfig& cfg, uv::CaseTag tag, int channels);

  const ParamNetConfig& config() const { return cfg_; }
  uv::CaseTag case_tag() const { return tag_; }
  int channels() const { return channels_; }
  int resolution() const { return cfg_.resolution; }
  int latent_dim() const { return cfg_.latent; }
  double d_max() const { return cfg_.effective_d_max(); }

  /// Throws DimensionError for a resolution/channel mismatch and DomainError
  /// for a case mismatch.
  ShapeSample prepare(const uv::UVMap& map) const;

  Latent encode(const uv::UVMap& map) const;
  Latent encode_sample(const ShapeSample& s) const;
  DecodedShape decode(const Latent& z) const;

  /// Map L1 (ground-truth mask applied inside the norm) plus lambda_mask times
  /// the bi-distance L1. parts = {map, mask}. Gradients, when requested, are
  /// added in params() order.
  double sample_loss(const ShapeSample& s, nn::Gradients* grads, std::vector<double>& parts) const;

  std::vector<nn::Tensor*> params();
  nn::Gradients zero_gradients() const;

  nn::Network& encoder() { return encoder_; }
  nn::Network& map_decoder() { return map_decoder_; }
  nn::Network& mask_decoder() { return mask_decoder_; }

  bool has_pca() const { return pca_.has_value(); }
  /// Throws DomainError when no PCA has been fitted.
  const PCASubspace& pca() const;
  void set_pca(PCASubspace p) { pca_ = std::move(p); }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static ParamNet load(const std::filesystem::path& path);

 private:
  ParamNet() = default;

  ParamNetConfig cfg_;
  uv::CaseTag tag_ = uv::CaseTag::kCase1;
  int channels_ = 1;
  nn::Network encoder_;
  nn::Network map_decoder_;
  nn::Network mask_decoder_;
  std::optional<PCASubspace> pca_;
};

struct ParamNetTraining {
  nn::TrainLog log;
  std::vector<Latent> latents;
  /// Non-empty when the requested PCA dimension exceeds the latent rank.
  std::string pca_warning;
};

/// Trains on ≥10 T-pose maps of a single case tag, then fits the PCA of the
/// training latents (n = min(pca_dims, count − 1)).
ParamNetTraining train_paramnet(ParamNet& net, const std::vector<uv::UVMap>& maps);

/// Masked L1 between raw decoded values and a reference over its mask.
double masked_l1(const nn::Tensor& pred_values, const uv::UVMap& ref);

}  // namespace uvcloth::model
