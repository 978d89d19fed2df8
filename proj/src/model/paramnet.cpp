#include "uvcloth/model/paramnet.hpp"

#include <algorithm>

#include "detail.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/model/map_tensors.hpp"
#include "uvcloth/nn/architectures.hpp"

namespace uvcloth::model {

using nlohmann::json;

json train_config_to_json(const nn::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"min_lr_fraction", c.min_lr_fraction},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"eval_every", c.eval_every}};
}

nn::TrainConfig train_config_from_json(const json& j, nn::TrainConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.min_lr_fraction = j.value("min_lr_fraction", c.min_lr_fraction);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  return c;
}

json paramnet_config_to_json(const ParamNetConfig& c) {
  return {{"resolution", c.resolution},   {"latent", c.latent},
          {"base_channels", c.base_channels}, {"d_max", c.d_max},
          {"mask_input", c.mask_input},   {"lambda_mask", c.lambda_mask},
          {"pca_dims", c.pca_dims},       {"seed", c.seed},
          {"train", train_config_to_json(c.train)}};
}

ParamNetConfig paramnet_config_from_json(const json& j) {
  ParamNetConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.latent = j.value("latent", c.latent);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.d_max = j.value("d_max", c.d_max);
  c.mask_input = j.value("mask_input", c.mask_input);
  c.lambda_mask = j.value("lambda_mask", c.lambda_mask);
  c.pca_dims = j.value("pca_dims", c.pca_dims);
  c.seed = j.value("seed", c.seed);
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  return c;
}

ParamNet::ParamNet(const ParamNetConfig& cfg, uv::CaseTag tag, int channels)
    : cfg_(cfg), tag_(tag), channels_(channels) {
  if (tag == uv::CaseTag::kBiDistance) throw DomainError("ParamNet needs a CASE1 or CASE2 map");
  if (channels <= 0) throw DimensionError("ParamNet needs at least one value channel");
  if (cfg.latent <= 0 || cfg.base_channels <= 0) throw DomainError("invalid ParamNet sizes");
  const int R = cfg.resolution;
  const int in = channels + (cfg.mask_input ? 1 : 0);
  encoder_ = nn::Network(nn::conv_encoder(in, R, cfg.base_channels, cfg.latent), {in, R, R},
                         cfg.seed);
  map_decoder_ = nn::Network(nn::conv_decoder(cfg.latent, channels, R, cfg.base_channels),
                             {cfg.latent}, cfg.seed + 1);
  mask_decoder_ = nn::Network(nn::conv_decoder(cfg.latent, 1, R, cfg.base_channels),
                              {cfg.latent}, cfg.seed + 2);
}

ShapeSample ParamNet::prepare(const uv::UVMap& map) const {
  if (map.resolution() != cfg_.resolution || map.channels() != channels_) {
    throw DimensionError("map is " + std::to_string(map.resolution()) + "x" +
                         std::to_string(map.resolution()) + "x" + std::to_string(map.channels()) +
                         ", model expects " + std::to_string(cfg_.resolution) + "x" +
                         std::to_string(cfg_.resolution) + "x" + std::to_string(channels_));
  }
  if (map.case_tag() != tag_) {
    throw DomainError(std::string("map is ") + uv::case_name(map.case_tag()) + ", model is " +
                      uv::case_name(tag_));
  }
  ShapeSample s;
  s.target = values_tensor(map);
  s.mask = mask_tensor(map);
  s.tmask = tmask_tensor(map, d_max());
  s.input = cfg_.mask_input ? concat_channels({&s.target, &s.tmask}) : s.target;
  return s;
}

Latent ParamNet::encode_sample(const ShapeSample& s) const {
  const nn::Tensor z = encoder_.forward(s.input);
  return Eigen::Map<const Eigen::VectorXd>(z.data.data(), static_cast<Eigen::Index>(z.size()));
}

Latent ParamNet::encode(const uv::UVMap& map) const { return encode_sample(prepare(map)); }

DecodedShape ParamNet::decode(const Latent& z) const {
  if (z.size() != cfg_.latent) {
    throw DimensionError("latent has " + std::to_string(z.size()) + " entries, model expects " +
                         std::to_string(cfg_.latent));
  }
  nn::Tensor zt({cfg_.latent}, std::vector<double>(z.data(), z.data() + z.size()));
  DecodedShape out;
  out.tmask = mask_decoder_.forward(zt);
  out.values = map_decoder_.forward(zt);
  out.map = tensor_to_map(out.values, mask_from_tmask(out.tmask, d_max()), tag_);
  return out;
}

double ParamNet::sample_loss(const ShapeSample& s, nn::Gradients* grads,
                             std::vector<double>& parts) const {
  const bool want = grads != nullptr;
  nn::ForwardCache ce, cm, ck;
  const nn::Tensor z = encoder_.forward(s.input, want ? &ce : nullptr);
  const nn::Tensor pm = map_decoder_.forward(z, want ? &cm : nullptr);
  const nn::Tensor pk = mask_decoder_.forward(z, want ? &ck : nullptr);
  const nn::LossResult lm = nn::l1_masked_loss(pm, s.target, &s.mask);
  const nn::LossResult lk = nn::l1_masked_loss(pk, s.tmask);
  parts = {lm.value, lk.value};
  const double total = lm.value + cfg_.lambda_mask * lk.value;
  if (!want) return total;

  const std::size_t ne = detail::param_tensors(encoder_);
  const std::size_t nm = detail::param_tensors(map_decoder_);
  nn::Tensor dz;
  {
    detail::GradSlice g(grads, ne, map_decoder_);
    dz = map_decoder_.backward(cm, lm.grad, g.get());
  }
  {
    nn::Tensor gk = lk.grad;
    for (double& v : gk.data) v *= cfg_.lambda_mask;
    detail::GradSlice g(grads, ne + nm, mask_decoder_);
    dz.add(mask_decoder_.backward(ck, gk, g.get()));
  }
  detail::GradSlice g(grads, 0, encoder_);
  encoder_.backward(ce, dz, g.get());
  return total;
}

std::vector<nn::Tensor*> ParamNet::params() {
  std::vector<nn::Tensor*> out;
  detail::append(out, encoder_);
  detail::append(out, map_decoder_);
  detail::append(out, mask_decoder_);
  return out;
}

nn::Gradients ParamNet::zero_gradients() const {
  nn::Gradients out;
  detail::append_zero(out, encoder_);
  detail::append_zero(out, map_decoder_);
  detail::append_zero(out, mask_decoder_);
  return out;
}

const PCASubspace& ParamNet::pca() const {
  if (!pca_) throw DomainError("no PCA subspace fitted; run fit-pca or train-paramnet first");
  return *pca_;
}

namespace {

nn::Tensor vector_tensor(const Eigen::VectorXd& v) {
  return nn::Tensor({static_cast<int>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd tensor_vector(const nn::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

}  // namespace

void ParamNet::save(const std::filesystem::path& path, const json& extra) const {
  nn::Checkpoint ck;
  ck.meta = {{"kind", "paramnet"},
             {"config", paramnet_config_to_json(cfg_)},
             {"case_tag", static_cast<int>(tag_)},
             {"channels", channels_}};
  ck.meta["encoder"] = nn::store_network(encoder_, "encoder", ck);
  ck.meta["map_decoder"] = nn::store_network(map_decoder_, "map_decoder", ck);
  ck.meta["mask_decoder"] = nn::store_network(mask_decoder_, "mask_decoder", ck);
  if (pca_) {
    ck.meta["pca"] = {{"n", pca_->dims()}, {"rank", pca_->rank}};
    ck.add("pca.mean", vector_tensor(pca_->mean));
    nn::Tensor basis({pca_->dims(), pca_->latent_dim()});
    for (int r = 0; r < pca_->dims(); ++r)
      for (int c = 0; c < pca_->latent_dim(); ++c) basis[r * pca_->latent_dim() + c] = pca_->basis(r, c);
    ck.add("pca.basis", basis);
    ck.add("pca.sigma", vector_tensor(pca_->sigma));
  }
  if (!extra.is_null()) ck.meta["extra"] = extra;
  nn::save_checkpoint(ck, path);
}

ParamNet ParamNet::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.meta.value("kind", "") != "paramnet") throw ParseError(path.string() + " is not a ParamNet checkpoint", 0);
  ParamNet net;
  net.cfg_ = paramnet_config_from_json(ck.meta.at("config"));
  net.tag_ = static_cast<uv::CaseTag>(ck.meta.at("case_tag").get<int>());
  net.channels_ = ck.meta.at("channels").get<int>();
  net.encoder_ = nn::restore_network(ck.meta.at("encoder"), "encoder", ck);
  net.map_decoder_ = nn::restore_network(ck.meta.at("map_decoder"), "map_decoder", ck);
  net.mask_decoder_ = nn::restore_network(ck.meta.at("mask_decoder"), "mask_decoder", ck);
  if (ck.meta.contains("pca")) {
    PCASubspace p;
    p.rank = ck.meta["pca"].value("rank", 0);
    p.mean = tensor_vector(ck.tensor("pca.mean"));
    p.sigma = tensor_vector(ck.tensor("pca.sigma"));
    const nn::Tensor& b = ck.tensor("pca.basis");
    p.basis.resize(b.dim(0), b.dim(1));
    for (int r = 0; r < b.dim(0); ++r)
      for (int c = 0; c < b.dim(1); ++c) p.basis(r, c) = b[r * b.dim(1) + c];
    net.pca_ = std::move(p);
  }
  return net;
}

ParamNetTraining train_paramnet(ParamNet& net, const std::vector<uv::UVMap>& maps) {
  if (maps.size() < 10) {
    throw DomainError("ParamNet training needs at least 10 maps, got " + std::to_string(maps.size()));
  }
  for (const uv::UVMap& m : maps) {
    if (m.case_tag() != maps.front().case_tag()) {
      throw DomainError("training maps mix case tags; train one model per garment category");
    }
  }
  std::vector<ShapeSample> samples;
  samples.reserve(maps.size());
  for (const uv::UVMap& m : maps) samples.push_back(net.prepare(m));

  ParamNetTraining out;
  const auto step = [&](std::size_t i, nn::Gradients* g, std::vector<double>& parts) {
    return net.sample_loss(samples[i], g, parts);
  };
  out.log = nn::train(samples.size(), net.config().train, net.params(), step);

  for (const ShapeSample& s : samples) out.latents.push_back(net.encode_sample(s));
  const int n = std::min({net.config().pca_dims, static_cast<int>(samples.size()) - 1,
                          net.latent_dim()});
  PCASubspace pca = fit_pca(out.latents, n);
  if (n > pca.rank) {
    out.pca_warning = "PCA dimension " + std::to_string(n) + " exceeds the latent rank " +
                      std::to_string(pca.rank) + "; trailing sigma are 0";
  }
  net.set_pca(std::move(pca));
  return out;
}

double masked_l1(const nn::Tensor& pred_values, const uv::UVMap& ref) {
  const nn::Tensor m = mask_tensor(ref);
  return nn::l1_masked_loss(pred_values, values_tensor(ref), &m).value;
}

}  // namespace uvcloth::model
