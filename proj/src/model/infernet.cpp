#include "uvcloth/model/infernet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detail.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/nn/architectures.hpp"

namespace uvcloth::model {

using nlohmann::json;

json infernet_config_to_json(const InferNetConfig& c) {
  return {{"points", c.points},
          {"widths", c.widths},
          {"fusion_hidden", c.fusion_hidden},
          {"scale", c.scale},
          {"seed", c.seed},
          {"sample_seed", c.sample_seed},
          {"train", train_config_to_json(c.train)},
          {"flag_percentile", c.flag_percentile}};
}

InferNetConfig infernet_config_from_json(const json& j) {
  InferNetConfig c;
  c.points = j.value("points", c.points);
  c.widths = j.value("widths", c.widths);
  c.fusion_hidden = j.value("fusion_hidden", c.fusion_hidden);
  c.scale = j.value("scale", c.scale);
  c.seed = j.value("seed", c.seed);
  c.sample_seed = j.value("sample_seed", c.sample_seed);
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  c.flag_percentile = j.value("flag_percentile", c.flag_percentile);
  return c;
}

nn::Tensor sample_surface(const geom::TriMesh& mesh, int points, std::uint64_t seed, double scale) {
  if (points <= 0) throw DomainError("point budget must be positive");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const geom::Face& f : mesh.faces) {
    const geom::Vec3& a = mesh.vertices[f[0]];
    total += 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw DomainError("cannot sample points from a mesh without surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nn::Tensor out({points, 3});
  for (int i = 0; i < points; ++i) {
    const double pick = u(rng) * total;
    const std::size_t fi = std::min<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
        cumulative.size() - 1);
    double r1 = u(rng);
    double r2 = u(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const geom::Face& f = mesh.faces[fi];
    const geom::Vec3 p = (1.0 - r1 - r2) * mesh.vertices[f[0]] + r1 * mesh.vertices[f[1]] +
                         r2 * mesh.vertices[f[2]];
    for (int k = 0; k < 3; ++k) out[3 * i + k] = scale * p[k];
  }
  return out;
}

InferNet::InferNet(const InferNetConfig& cfg, int latent_dim) : cfg_(cfg), latent_(latent_dim) {
  if (latent_dim <= 0) throw DomainError("latent size must be positive");
  if (cfg.widths.size() < 2 || cfg.widths.front() != 3) {
    throw DomainError("point branches must start from 3 coordinates");
  }
  const int feat = cfg.widths.back();
  human_ = nn::Network(nn::point_encoder(cfg.widths), {cfg.points, 3}, cfg.seed);
  garment_ = nn::Network(nn::point_encoder(cfg.widths), {cfg.points, 3}, cfg.seed + 1);
  fusion_ = nn::Network(nn::fusion_mlp(2 * feat, cfg.fusion_hidden, latent_dim), {2 * feat},
                        cfg.seed + 2);
}

InferPair InferNet::make_pair(const geom::TriMesh& garment, const geom::TriMesh& human,
                              const Latent& target) const {
  if (target.size() != latent_) {
    throw DomainError("target latent has " + std::to_string(target.size()) +
                      " entries, the shape space uses " + std::to_string(latent_));
  }
  return {sample_surface(human, cfg_.points, cfg_.sample_seed, cfg_.scale),
          sample_surface(garment, cfg_.points, cfg_.sample_seed + 1, cfg_.scale), target};
}

namespace {

nn::Tensor concat(const nn::Tensor& a, const nn::Tensor& b) {
  nn::Tensor out({static_cast<int>(a.size() + b.size())});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
  return out;
}

Latent to_latent(const nn::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

nn::Tensor to_tensor(const Latent& z) {
  return nn::Tensor({static_cast<int>(z.size())}, std::vector<double>(z.data(), z.data() + z.size()));
}

}  // namespace

BranchFeatures InferNet::features(const nn::Tensor& human, const nn::Tensor& garment) const {
  return {human_.forward(human), garment_.forward(garment)};
}

Latent InferNet::predict(const nn::Tensor& human, const nn::Tensor& garment) const {
  const BranchFeatures f = features(human, garment);
  return to_latent(fusion_.forward(concat(f.human, f.garment)));
}

double InferNet::sample_loss(const InferPair& p, nn::Gradients* grads,
                             std::vector<double>& parts) const {
  const bool want = grads != nullptr;
  nn::ForwardCache ch, cg, cf;
  const nn::Tensor fh = human_.forward(p.human, want ? &ch : nullptr);
  const nn::Tensor fg = garment_.forward(p.garment, want ? &cg : nullptr);
  const nn::Tensor z = fusion_.forward(concat(fh, fg), want ? &cf : nullptr);
  const nn::LossResult l = nn::l1_masked_loss(z, to_tensor(p.target));
  parts = {l.value};
  if (!want) return l.value;

  const std::size_t nh = detail::param_tensors(human_);
  const std::size_t ng = detail::param_tensors(garment_);
  nn::Tensor dcat;
  {
    detail::GradSlice g(grads, nh + ng, fusion_);
    dcat = fusion_.backward(cf, l.grad, g.get());
  }
  nn::Tensor dh(fh.shape), dg(fg.shape);
  std::copy(dcat.data.begin(), dcat.data.begin() + fh.size(), dh.data.begin());
  std::copy(dcat.data.begin() + fh.size(), dcat.data.end(), dg.data.begin());
  {
    detail::GradSlice g(grads, 0, human_);
    human_.backward(ch, dh, g.get());
  }
  detail::GradSlice g(grads, nh, garment_);
  garment_.backward(cg, dg, g.get());
  return l.value;
}

std::vector<nn::Tensor*> InferNet::params() {
  std::vector<nn::Tensor*> out;
  detail::append(out, human_);
  detail::append(out, garment_);
  detail::append(out, fusion_);
  return out;
}

nn::Gradients InferNet::zero_gradients() const {
  nn::Gradients out;
  detail::append_zero(out, human_);
  detail::append_zero(out, garment_);
  detail::append_zero(out, fusion_);
  return out;
}

std::pair<double, int> InferNet::nearest_training(const Latent& z) const {
  if (targets_.empty()) throw DomainError("model carries no training latents");
  double best = std::numeric_limits<double>::infinity();
  int idx = -1;
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    const double d = (z - targets_[i]).cwiseAbs().mean();
    if (d < best) {
      best = d;
      idx = static_cast<int>(i);
    }
  }
  return {best, idx};
}

void InferNet::set_training_reference(std::vector<Latent> targets, double threshold) {
  for (const Latent& t : targets)
    if (t.size() != latent_) throw DimensionError("training latent size mismatch");
  targets_ = std::move(targets);
  threshold_ = threshold;
}

void InferNet::save(const std::filesystem::path& path, const json& extra) const {
  nn::Checkpoint ck;
  ck.meta = {{"kind", "infernet"},
             {"config", infernet_config_to_json(cfg_)},
             {"latent", latent_},
             {"residual_threshold", threshold_}};
  ck.meta["human"] = nn::store_network(human_, "human", ck);
  ck.meta["garment"] = nn::store_network(garment_, "garment", ck);
  ck.meta["fusion"] = nn::store_network(fusion_, "fusion", ck);
  if (!targets_.empty()) {
    nn::Tensor t({static_cast<int>(targets_.size()), latent_});
    for (std::size_t i = 0; i < targets_.size(); ++i)
      for (int k = 0; k < latent_; ++k) t[i * latent_ + k] = targets_[i](k);
    ck.add("training_latents", t);
  }
  if (!extra.is_null()) ck.meta["extra"] = extra;
  nn::save_checkpoint(ck, path);
}

InferNet InferNet::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.meta.value("kind", "") != "infernet") throw ParseError(path.string() + " is not an InferNet checkpoint", 0);
  InferNet net;
  net.cfg_ = infernet_config_from_json(ck.meta.at("config"));
  net.latent_ = ck.meta.at("latent").get<int>();
  net.threshold_ = ck.meta.value("residual_threshold", 0.0);
  net.human_ = nn::restore_network(ck.meta.at("human"), "human", ck);
  net.garment_ = nn::restore_network(ck.meta.at("garment"), "garment", ck);
  net.fusion_ = nn::restore_network(ck.meta.at("fusion"), "fusion", ck);
  for (const auto& [name, t] : ck.tensors) {
    if (name != "training_latents") continue;
    for (int i = 0; i < t.dim(0); ++i) {
      net.targets_.push_back(Eigen::Map<const Eigen::VectorXd>(t.data.data() + i * t.dim(1), t.dim(1)));
    }
  }
  return net;
}

nn::TrainLog train_infernet(InferNet& net, const std::vector<InferPair>& pairs) {
  if (pairs.size() < 20) {
    throw DomainError("InferNet training needs at least 20 pairs, got " + std::to_string(pairs.size()));
  }
  for (const InferPair& p : pairs) {
    if (p.target.size() != net.latent_dim()) {
      throw DomainError("target latent size does not match the model");
    }
  }
  const auto step = [&](std::size_t i, nn::Gradients* g, std::vector<double>& parts) {
    return net.sample_loss(pairs[i], g, parts);
  };
  nn::TrainLog log = nn::train(pairs.size(), net.config().train, net.params(), step);

  std::vector<Latent> targets;
  for (const InferPair& p : pairs) targets.push_back(p.target);
  net.set_training_reference(targets, 0.0);
  std::vector<double> residuals;
  for (const InferPair& p : pairs) residuals.push_back(net.nearest_training(net.predict(p.human, p.garment)).first);
  std::sort(residuals.begin(), residuals.end());
  const double q = std::clamp(net.config().flag_percentile, 0.0, 100.0) / 100.0;
  const std::size_t k = static_cast<std::size_t>(std::ceil(q * residuals.size())) - (q > 0 ? 1 : 0);
  net.set_training_reference(std::move(targets), residuals[std::min(k, residuals.size() - 1)]);
  return log;
}

InferenceResult infer_shape(const InferNet& net, const ParamNet& shape,
                            const geom::TriMesh& garment, const geom::TriMesh& human) {
  if (net.latent_dim() != shape.latent_dim()) {
    throw DomainError("inference model and shape space disagree on the latent size");
  }
  if (garment.vertices.empty() || garment.faces.empty() || human.vertices.empty() ||
      human.faces.empty()) {
    throw DomainError("inference needs non-empty garment and human meshes");
  }
  const InferNetConfig& c = net.config();
  const nn::Tensor h = sample_surface(human, c.points, c.sample_seed, c.scale);
  const nn::Tensor g = sample_surface(garment, c.points, c.sample_seed + 1, c.scale);
  InferenceResult r;
  r.features = net.features(h, g);
  r.z = net.predict(h, g);
  r.s = to_params(shape.pca(), r.z);
  if (!net.training_latents().empty()) {
    std::tie(r.residual, r.nearest) = net.nearest_training(r.z);
    r.flagged = !std::isfinite(r.residual) || r.residual > net.residual_threshold();
  }
  if (!r.z.allFinite()) r.flagged = true;
  return r;
}

std::vector<AnimateResult> edit_and_animate(const InferenceResult& result,
                                            const std::vector<std::pair<int, double>>& edits,
                                            const ParamNet& shape, const AnimNet& anim,
                                            const body::BodyTemplate& tpl,
                                            const std::vector<body::BodyState>& poses) {
  if (poses.empty()) throw DomainError("pose sequence is empty");
  Eigen::VectorXd s = result.s;
  for (const auto& [j, value] : edits) {
    if (j < 0 || j >= s.size()) {
      throw DomainError("edit dimension " + std::to_string(j) + " outside [0, " +
                        std::to_string(s.size()) + ")");
    }
    s(j) = value;
  }
  std::vector<AnimateResult> frames;
  frames.reserve(poses.size());
  for (const body::BodyState& pose : poses) frames.push_back(animate_params(anim, shape, s, tpl, pose));
  return frames;
}

}  // namespace uvcloth::model
